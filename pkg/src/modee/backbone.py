"""Encoder-decoder backbone abstraction.

A backbone supplies tokenization with character offsets, token-level
encoding, teacher-forced decoding for training, and beam-search generation
conditioned on an externally supplied embedding matrix. Conditioning is
always an explicit (n, d) tensor so the fusion stage can replace the raw
encoder states.
"""

from __future__ import annotations

import hashlib
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Sequence

import torch
import torch.nn.functional as F


class BackboneError(RuntimeError):
    """Raised when the underlying model fails."""


@dataclass(frozen=True)
class Tokenization:
    token_ids: tuple[int, ...]
    offsets: tuple[tuple[int, int], ...]
    truncated: bool

    def __post_init__(self):
        if len(self.token_ids) != len(self.offsets):
            raise ValueError("token_ids and offsets must have equal length")

    @property
    def n(self) -> int:
        return len(self.token_ids)


@dataclass(frozen=True)
class GenerationConfig:
    beam_size: int = 5
    max_output_tokens: int = 512
    start_token: int = 0
    end_token: int = 1

    def __post_init__(self):
        if self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be >= 1")


def parameter_checksum(module: torch.nn.Module) -> str:
    """Order-stable digest of a module's parameters and buffers."""
    digest = hashlib.sha256()
    state = module.state_dict()
    for key in sorted(state):
        digest.update(key.encode())
        digest.update(state[key].detach().cpu().contiguous().numpy().tobytes())
    return digest.hexdigest()


def beam_search(
    step_fn: Callable[[list[list[int]]], torch.Tensor],
    cfg: GenerationConfig,
) -> list[int]:
    """Beam search over an autoregressive step function.

    ``step_fn`` receives the current prefixes (all of equal length,
    beginning with the start token) and returns next-token logits of shape
    (num_prefixes, vocab). Scores are raw summed log-probabilities; ties
    break on the token sequence so the search is fully deterministic.
    Returns the generated ids without the start or end token.
    """
    live: list[tuple[tuple[int, ...], float]] = [((cfg.start_token,), 0.0)]
    done: list[tuple[tuple[int, ...], float]] = []
    for _ in range(cfg.max_output_tokens):
        logits = step_fn([list(seq) for seq, _ in live])
        logprobs = F.log_softmax(logits.double(), dim=-1)
        k = min(cfg.beam_size, logprobs.shape[-1])
        top = torch.topk(logprobs, k=k, dim=-1)
        pool = list(done)
        for b, (seq, score) in enumerate(live):
            for val, idx in zip(top.values[b].tolist(), top.indices[b].tolist()):
                pool.append((seq + (idx,), score + val))
        pool.sort(key=lambda item: (-item[1], item[0]))
        pool = pool[:cfg.beam_size]
        done = [c for c in pool if c[0][-1] == cfg.end_token]
        live = [c for c in pool if c[0][-1] != cfg.end_token]
        if not live:
            break
    # Prefer finished candidates; an unfinished prefix only wins when the
    # length cap cut the whole beam off before any end token appeared.
    def pick(pool):
        return min(pool, key=lambda item: (-item[1], item[0]))

    best = pick(done) if done else pick(live)
    seq = list(best[0][1:])
    if seq and seq[-1] == cfg.end_token:
        seq.pop()
    return seq


class FrozenEncoder:
    """Read-only snapshot of a backbone's encoder at its pretrained state."""

    def __init__(self, encode_fn: Callable[[Tokenization], torch.Tensor], module: torch.nn.Module):
        self._encode = encode_fn
        self._module = module

    def encode(self, tok: Tokenization) -> torch.Tensor:
        with torch.no_grad():
            return self._encode(tok)

    def checksum(self) -> str:
        return parameter_checksum(self._module)


class Backbone(ABC):
    """Pluggable encoder-decoder language model."""

    hidden_dim: int
    vocab_size: int
    identifier: str

    @abstractmethod
    def tokenize(self, text: str, cap: int) -> Tokenization:
        ...

    @abstractmethod
    def encode_tokens(self, tok: Tokenization) -> torch.Tensor:
        """Contextual token embeddings, shape (tok.n, hidden_dim)."""

    @abstractmethod
    def encode_target(self, text: str) -> list[int]:
        """Token ids of a target string, without the end-of-sequence token."""

    @abstractmethod
    def decode_ids(self, ids: Sequence[int]) -> str:
        ...

    @abstractmethod
    def teacher_forced_logits(self, cond: torch.Tensor, gold_ids: Sequence[int]) -> torch.Tensor:
        """Next-token logits under teacher forcing.

        Shape (len(gold_ids) + 1, vocab): one row per gold position plus a
        final row that should predict the end token.
        """

    @abstractmethod
    def decode_step(self, cond: torch.Tensor, prefixes: list[list[int]]) -> torch.Tensor:
        """Next-token logits for a batch of equal-length prefixes, shape (B, vocab)."""

    @abstractmethod
    def frozen_pretrained_encoder(self) -> FrozenEncoder:
        ...

    @abstractmethod
    def generation_defaults(self) -> GenerationConfig:
        """Start/end token ids filled in; caller overrides beam size and cap."""

    def generate(self, cond: torch.Tensor, cfg: GenerationConfig) -> str:
        """Beam-search generation conditioned on ``cond``."""
        with torch.no_grad():
            ids = beam_search(lambda prefixes: self.decode_step(cond, prefixes), cfg)
        return self.decode_ids(ids)
