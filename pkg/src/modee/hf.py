"""Optional binding to a pretrained seq2seq transformer.

Wraps an encoder-decoder checkpoint from the transformers library behind
the Backbone interface. Imported lazily: the rest of the package, and the
whole test suite, runs without the extra dependency installed.
"""

from __future__ import annotations

import copy
from typing import Sequence

import torch
import torch.nn as nn

from .backbone import Backbone, BackboneError, FrozenEncoder, GenerationConfig, Tokenization


class HFBackbone(nn.Module, Backbone):
    def __init__(self, model_name: str):
        super().__init__()
        try:
            from transformers import AutoModelForSeq2SeqLM, AutoTokenizer
        except ImportError as exc:
            raise BackboneError(
                "transformers is not installed; install the package with the "
                "[hf] extra to use pretrained backbones"
            ) from exc
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(model_name)
            self.model = AutoModelForSeq2SeqLM.from_pretrained(model_name)
        except Exception as exc:
            raise BackboneError(f"failed to load {model_name!r}: {exc}") from exc
        if not self.tokenizer.is_fast:
            raise BackboneError("a fast tokenizer is required for character offsets")
        self.model.train()
        self.identifier = f"hf:{model_name}"
        self.hidden_dim = self.model.config.d_model
        self.vocab_size = self.model.config.vocab_size
        self._start_id = self.model.config.decoder_start_token_id
        self._end_id = self.model.config.eos_token_id
        frozen = copy.deepcopy(self.model.get_encoder())
        frozen.requires_grad_(False)
        frozen.eval()
        self._frozen_encoder = [frozen]

    def tokenize(self, text: str, cap: int) -> Tokenization:
        enc = self.tokenizer(text, return_offsets_mapping=True, truncation=True,
                             max_length=cap + 1, add_special_tokens=True)
        ids, offsets = [], []
        for tid, (a, b) in zip(enc["input_ids"], enc["offset_mapping"]):
            if a == b:  # special tokens carry empty offsets
                continue
            ids.append(tid)
            offsets.append((a, b))
        truncated = len(ids) > cap
        return Tokenization(tuple(ids[:cap]), tuple(offsets[:cap]), truncated)

    def encode_target(self, text: str) -> list[int]:
        return self.tokenizer(text, add_special_tokens=False)["input_ids"]

    def decode_ids(self, ids: Sequence[int]) -> str:
        return self.tokenizer.decode(list(ids), skip_special_tokens=True)

    def encode_tokens(self, tok: Tokenization) -> torch.Tensor:
        ids = torch.tensor([tok.token_ids], dtype=torch.long)
        return self.model.get_encoder()(input_ids=ids).last_hidden_state.squeeze(0)

    def _lm_logits(self, cond: torch.Tensor, decoder_ids: torch.Tensor) -> torch.Tensor:
        from transformers.modeling_outputs import BaseModelOutput

        memory = cond.unsqueeze(0).expand(decoder_ids.shape[0], -1, -1)
        out = self.model(encoder_outputs=BaseModelOutput(last_hidden_state=memory),
                         decoder_input_ids=decoder_ids)
        return out.logits

    def teacher_forced_logits(self, cond: torch.Tensor, gold_ids: Sequence[int]) -> torch.Tensor:
        ids = torch.tensor([[self._start_id, *gold_ids]], dtype=torch.long)
        return self._lm_logits(cond, ids).squeeze(0)

    def decode_step(self, cond: torch.Tensor, prefixes: list[list[int]]) -> torch.Tensor:
        ids = torch.tensor(prefixes, dtype=torch.long)
        return self._lm_logits(cond, ids)[:, -1, :]

    def frozen_pretrained_encoder(self) -> FrozenEncoder:
        frozen = self._frozen_encoder[0]

        def encode(tok: Tokenization) -> torch.Tensor:
            if tok.n == 0:
                return torch.zeros(0, self.hidden_dim)
            ids = torch.tensor([tok.token_ids], dtype=torch.long)
            return frozen(input_ids=ids).last_hidden_state.squeeze(0)

        return FrozenEncoder(encode, frozen)

    def generation_defaults(self) -> GenerationConfig:
        return GenerationConfig(beam_size=5, max_output_tokens=512,
                                start_token=self._start_id, end_token=self._end_id)
