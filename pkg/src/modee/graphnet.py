"""Document-level token graph and its two-layer neighborhood encoder.

Every token of a document becomes a node. The default topology connects
every pair of tokens; the ablation topology keeps only the chain between
adjacent tokens. Node states are refined by two rounds of neighborhood
aggregation where a random ordering of sampled neighbor states is fed
through an LSTM and the final hidden state is concatenated with the node's
own state before a linear transform.

All randomness is drawn from a generator seeded per call, so the encoding
is a pure function of (inputs, parameters, seed).
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass
from pathlib import Path

import torch
import torch.nn as nn
import torch.nn.functional as F
from torch.nn.utils.rnn import pack_padded_sequence

from .backbone import FrozenEncoder, Tokenization


class Topology(enum.Enum):
    COMPLETE = "complete"
    LINEAR = "linear"


@dataclass(frozen=True)
class TokenGraph:
    """Undirected, self-loop-free graph over the n tokens of one document."""

    n: int
    topology: Topology

    def neighbors(self, i: int) -> list[int]:
        if not 0 <= i < self.n:
            raise ValueError(f"node {i} out of range for n={self.n}")
        if self.topology is Topology.COMPLETE:
            return [j for j in range(self.n) if j != i]
        return [j for j in (i - 1, i + 1) if 0 <= j < self.n]

    def edge_count(self) -> int:
        if self.topology is Topology.COMPLETE:
            return self.n * (self.n - 1) // 2
        return self.n - 1


def build_token_graph(n: int, topology: Topology) -> TokenGraph:
    if n < 1:
        raise ValueError(f"graph needs at least one node, got n={n}")
    return TokenGraph(n, topology)


class GraphEncoder(nn.Module):
    """Two rounds of sampled LSTM neighborhood aggregation.

    Per layer and node: draw up to ``sample_sizes[k]`` neighbors in random
    order (the full neighborhood, still randomly ordered, when it is small
    enough or ``full_neighborhood`` is set), run the LSTM over their
    states, concatenate the final hidden state with the node's own state,
    then apply a linear map and ReLU. The first layer's output rows are
    L2-normalized. A node with no neighbors aggregates the zero vector.
    """

    def __init__(self, dim: int, sample_sizes: tuple[int, int] = (25, 10),
                 full_neighborhood: bool = False):
        super().__init__()
        if any(s < 1 for s in sample_sizes):
            raise ValueError("sample sizes must be >= 1")
        self.dim = dim
        self.sample_sizes = tuple(sample_sizes)
        self.full_neighborhood = full_neighborhood
        self.aggregators = nn.ModuleList(
            nn.LSTM(dim, dim, batch_first=True) for _ in self.sample_sizes
        )
        self.transforms = nn.ModuleList(
            nn.Linear(2 * dim, dim) for _ in self.sample_sizes
        )

    def forward(self, graph: TokenGraph, features: torch.Tensor, seed: int) -> torch.Tensor:
        if features.ndim != 2 or features.shape[0] != graph.n or features.shape[1] != self.dim:
            raise ValueError(
                f"features must be ({graph.n}, {self.dim}), got {tuple(features.shape)}"
            )
        gen = torch.Generator().manual_seed(seed)
        h = features
        last = len(self.sample_sizes) - 1
        for k, (lstm, transform) in enumerate(zip(self.aggregators, self.transforms)):
            orders = [self._sample(graph.neighbors(i), self.sample_sizes[k], gen)
                      for i in range(graph.n)]
            agg = self._aggregate(h, orders, lstm)
            h = F.relu(transform(torch.cat([h, agg], dim=1)))
            if k < last:
                h = F.normalize(h, dim=1, eps=1e-12)
        return h

    def _sample(self, neighbors: list[int], size: int, gen: torch.Generator) -> list[int]:
        if not neighbors:
            return []
        perm = torch.randperm(len(neighbors), generator=gen).tolist()
        if not self.full_neighborhood:
            perm = perm[:size]
        return [neighbors[p] for p in perm]

    def _aggregate(self, h: torch.Tensor, orders: list[list[int]], lstm: nn.LSTM) -> torch.Tensor:
        out = h.new_zeros(len(orders), self.dim)
        busy = [i for i, order in enumerate(orders) if order]
        if not busy:
            return out
        lengths = torch.tensor([len(orders[i]) for i in busy])
        padded = h.new_zeros(len(busy), int(lengths.max()), self.dim)
        for row, i in enumerate(busy):
            padded[row, : len(orders[i])] = h[orders[i]]
        packed = pack_padded_sequence(padded, lengths, batch_first=True, enforce_sorted=False)
        _, (h_n, _) = lstm(packed)
        out[busy] = h_n.squeeze(0)
        return out


def encode_graph(graph: TokenGraph, features: torch.Tensor,
                 encoder: GraphEncoder, seed: int) -> torch.Tensor:
    return encoder(graph, features, seed)


def init_node_features(tok: Tokenization, frozen_encoder: FrozenEncoder,
                       cache: "FeatureCache | None" = None,
                       doc_id: str | None = None) -> torch.Tensor:
    """Frozen contextual embeddings used as initial node states.

    Constant across training for a fixed document, which is what makes
    caching exact rather than approximate.
    """
    key = None
    if cache is not None and doc_id is not None:
        key = cache.make_key(doc_id, frozen_encoder.checksum(), tok)
        hit = cache.get(key)
        if hit is not None:
            return hit
    features = frozen_encoder.encode(tok)
    if key is not None:
        cache.put(key, features)
    return features


class FeatureCache:
    """Per-document cache of frozen node features, optionally disk-backed."""

    def __init__(self, directory: str | Path | None = None):
        self._mem: dict[str, torch.Tensor] = {}
        self._dir = Path(directory) if directory else None
        if self._dir is not None:
            self._dir.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def make_key(doc_id: str, encoder_checksum: str, tok: Tokenization) -> str:
        raw = f"{doc_id}|{encoder_checksum}|{tok.n}|{tok.token_ids}"
        return hashlib.sha256(raw.encode()).hexdigest()

    def get(self, key: str) -> torch.Tensor | None:
        if key in self._mem:
            return self._mem[key]
        if self._dir is not None:
            path = self._dir / f"{key}.pt"
            if path.exists():
                tensor = torch.load(path, weights_only=True)
                self._mem[key] = tensor
                return tensor
        return None

    def put(self, key: str, tensor: torch.Tensor) -> None:
        self._mem[key] = tensor.detach()
        if self._dir is not None:
            torch.save(tensor.detach(), self._dir / f"{key}.pt")
