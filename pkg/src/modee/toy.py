"""Tiny word-level encoder-decoder backbone.

Runs the full pipeline at desk scale: 64-word vocabulary, 16-dim hidden
states, two transformer layers on each side. The vocabulary covers the
synthetic corpus exactly, so a trained model can emit every target string
verbatim. Construction is seeded and therefore reproducible.
"""

from __future__ import annotations

import copy
import math
import re
from typing import Sequence

import torch
import torch.nn as nn

from .backbone import Backbone, FrozenEncoder, GenerationConfig, Tokenization
from .synth import AGENTS, CAUSES, EVENTS, PLACES, TIMES

PAD_ID = 0
EOS_ID = 1
UNK_ID = 2

_SPECIALS = ("<pad>", "</s>", "<unk>")
_PUNCT = (":", ";", ".")
_LABELS = ("where", "when", "what", "who", "why", "none")
_GLUE = ("a", "hit", "the", "it", "came", "on", "were", "there", "this", "after", "argument", "types")

VOCAB: tuple[str, ...] = _SPECIALS + _PUNCT + _LABELS + _GLUE + PLACES + TIMES + EVENTS + AGENTS + CAUSES
_WORD_TO_ID = {w: i for i, w in enumerate(VOCAB)}

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


def _sinusoidal_table(max_len: int, dim: int) -> torch.Tensor:
    position = torch.arange(max_len, dtype=torch.float32).unsqueeze(1)
    div = torch.exp(torch.arange(0, dim, 2, dtype=torch.float32) * (-math.log(10000.0) / dim))
    table = torch.zeros(max_len, dim)
    table[:, 0::2] = torch.sin(position * div)
    table[:, 1::2] = torch.cos(position * div)
    return table


def _detokenize(words: Sequence[str]) -> str:
    out: list[str] = []
    for w in words:
        if out and w in (";", ".", ":"):
            out[-1] += w
        elif out and out[-1].endswith(":"):
            out[-1] += w
        else:
            out.append(w)
    return " ".join(out)


class _Encoder(nn.Module):
    def __init__(self, vocab_size: int, dim: int, layers: int, heads: int, ff: int, max_len: int):
        super().__init__()
        self.dim = dim
        self.embed = nn.Embedding(vocab_size, dim)
        self.register_buffer("pos", _sinusoidal_table(max_len, dim))
        layer = nn.TransformerEncoderLayer(
            d_model=dim, nhead=heads, dim_feedforward=ff,
            dropout=0.0, batch_first=True, norm_first=True,
        )
        self.stack = nn.TransformerEncoder(layer, num_layers=layers, enable_nested_tensor=False)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        """ids (n,) -> contextual states (n, dim)."""
        x = self.embed(ids) * math.sqrt(self.dim) + self.pos[: ids.shape[0]]
        return self.stack(x.unsqueeze(0)).squeeze(0)


class ToyBackbone(nn.Module, Backbone):
    def __init__(self, seed: int = 0, hidden_dim: int = 16, layers: int = 2, heads: int = 2,
                 ff: int = 64, max_len: int = 2048):
        super().__init__()
        self.hidden_dim = hidden_dim
        self.vocab_size = len(VOCAB)
        self.identifier = f"toy-{hidden_dim}d-seed{seed}"
        with torch.random.fork_rng():
            torch.manual_seed(seed)
            self.encoder = _Encoder(self.vocab_size, hidden_dim, layers, heads, ff, max_len)
            self.embed_out = nn.Embedding(self.vocab_size, hidden_dim)
            dec_layer = nn.TransformerDecoderLayer(
                d_model=hidden_dim, nhead=heads, dim_feedforward=ff,
                dropout=0.0, batch_first=True, norm_first=True,
            )
            self.decoder = nn.TransformerDecoder(dec_layer, num_layers=layers)
            self.out_proj = nn.Linear(hidden_dim, self.vocab_size)
        # Snapshot of the encoder at its initial state, standing in for the
        # pretrained weights a large backbone would ship with. Kept in a
        # plain list so it stays out of parameters() and the state dict.
        frozen = copy.deepcopy(self.encoder)
        frozen.requires_grad_(False)
        frozen.eval()
        self._frozen_encoder = [frozen]
        self.register_buffer("_pos_dec", _sinusoidal_table(max_len, hidden_dim))

    # -- text <-> ids -------------------------------------------------

    def tokenize(self, text: str, cap: int) -> Tokenization:
        ids: list[int] = []
        offsets: list[tuple[int, int]] = []
        truncated = False
        for m in _TOKEN_RE.finditer(text):
            if len(ids) >= cap:
                truncated = True
                break
            ids.append(_WORD_TO_ID.get(m.group().lower(), UNK_ID))
            offsets.append((m.start(), m.end()))
        return Tokenization(tuple(ids), tuple(offsets), truncated)

    def encode_target(self, text: str) -> list[int]:
        return [_WORD_TO_ID.get(m.group().lower(), UNK_ID) for m in _TOKEN_RE.finditer(text)]

    def decode_ids(self, ids: Sequence[int]) -> str:
        words = [VOCAB[i] for i in ids if i not in (PAD_ID, EOS_ID)]
        return _detokenize(words)

    # -- model passes ---------------------------------------------------

    def encode_tokens(self, tok: Tokenization) -> torch.Tensor:
        if tok.n == 0:
            return torch.zeros(0, self.hidden_dim)
        return self.encoder(torch.tensor(tok.token_ids, dtype=torch.long))

    def _decode(self, cond: torch.Tensor, ids: torch.Tensor) -> torch.Tensor:
        """ids (B, L) -> next-token logits (B, L, vocab)."""
        x = self.embed_out(ids) * math.sqrt(self.hidden_dim) + self._pos_dec[: ids.shape[1]]
        mask = torch.triu(torch.full((ids.shape[1], ids.shape[1]), float("-inf")), diagonal=1)
        memory = cond.unsqueeze(0).expand(ids.shape[0], -1, -1)
        h = self.decoder(x, memory, tgt_mask=mask)
        return self.out_proj(h)

    def teacher_forced_logits(self, cond: torch.Tensor, gold_ids: Sequence[int]) -> torch.Tensor:
        inp = torch.tensor([[PAD_ID, *gold_ids]], dtype=torch.long)
        return self._decode(cond, inp).squeeze(0)

    def decode_step(self, cond: torch.Tensor, prefixes: list[list[int]]) -> torch.Tensor:
        ids = torch.tensor(prefixes, dtype=torch.long)
        return self._decode(cond, ids)[:, -1, :]

    def frozen_pretrained_encoder(self) -> FrozenEncoder:
        frozen = self._frozen_encoder[0]

        def encode(tok: Tokenization) -> torch.Tensor:
            if tok.n == 0:
                return torch.zeros(0, self.hidden_dim)
            return frozen(torch.tensor(tok.token_ids, dtype=torch.long))

        return FrozenEncoder(encode, frozen)

    def generation_defaults(self) -> GenerationConfig:
        return GenerationConfig(beam_size=5, max_output_tokens=512,
                                start_token=PAD_ID, end_token=EOS_ID)
