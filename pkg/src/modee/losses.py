"""Training objectives: token cross-entropy and node-level contrastive loss.

The contrastive term operates on a per-document sample of graph-node
embeddings, up to ``per_class`` nodes for each of the five W classes plus
the NONE class. Cosine similarities are tempered by ``tau``; each ordered
same-class pair contributes one log-ratio whose denominator holds the
positive itself plus every sampled node of a different class. A literal
variant with all other nodes in the denominator is kept behind a flag.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

import torch
import torch.nn.functional as F

from .corpus import SlotClass, TokenLabeling


class SkipBatch(Exception):
    """No positive pair available; the contrastive term is dropped."""


def cross_entropy_loss(logits: torch.Tensor, gold_ids: Sequence[int],
                       reduction: str = "sum") -> torch.Tensor:
    """Negative log-likelihood of the gold ids, summed over positions.

    The summed form is the default; ``reduction='mean'`` trades it for
    per-token averaging on long targets.
    """
    if reduction not in ("sum", "mean"):
        raise ValueError(f"unknown reduction {reduction!r}")
    m = len(gold_ids)
    if m < 1:
        raise ValueError("need at least one target position")
    if logits.ndim != 2 or logits.shape[0] != m:
        raise ValueError(f"logits must be ({m}, V), got {tuple(logits.shape)}")
    logp = F.log_softmax(logits, dim=-1)
    picked = logp[torch.arange(m), torch.tensor(gold_ids, dtype=torch.long)]
    return -picked.sum() if reduction == "sum" else -picked.mean()


@dataclass(frozen=True)
class ContrastiveBatch:
    embeddings: torch.Tensor
    labels: tuple[SlotClass, ...]

    def __post_init__(self):
        if self.embeddings.ndim != 2 or self.embeddings.shape[0] != len(self.labels):
            raise ValueError("one label per embedding row required")

    @property
    def k(self) -> int:
        return len(self.labels)


def sample_contrastive_nodes(labeling: TokenLabeling, per_class: int, seed: int,
                             none_positive: bool = True) -> list[int]:
    """Seeded per-class sample of token indices for the contrastive batch.

    Raises SkipBatch when the sample cannot contain a positive pair: no
    class (or no W class, when NONE pairs are disabled) ends up with two
    or more members.
    """
    if not labeling.labels:
        raise ValueError("empty labeling")
    if per_class < 2:
        raise ValueError("per_class must be >= 2, a pair is required")
    rng = random.Random(seed)
    chosen: list[int] = []
    pair_exists = False
    for cls in SlotClass:
        members = [i for i, lab in enumerate(labeling.labels) if lab is cls]
        if not members:
            continue
        take = rng.sample(members, min(per_class, len(members)))
        chosen.extend(take)
        if len(take) >= 2 and (none_positive or cls is not SlotClass.NONE):
            pair_exists = True
    if not pair_exists:
        raise SkipBatch("no class contributes a positive pair")
    return chosen


def contrastive_loss(batch: ContrastiveBatch, tau: float,
                     none_positive: bool = True,
                     denominator: str = "negatives") -> torch.Tensor:
    """Mean over ordered positive pairs of the tempered cosine log-ratio.

    ``denominator='negatives'`` uses {positive j} plus all differently
    labeled nodes; ``'all'`` uses every node other than the anchor.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    if denominator not in ("negatives", "all"):
        raise ValueError(f"unknown denominator {denominator!r}")
    z = F.normalize(batch.embeddings, dim=1, eps=1e-12)
    sim = (z @ z.T) / tau
    labels = batch.labels
    terms = []
    for i in range(batch.k):
        if labels[i] is SlotClass.NONE and not none_positive:
            continue
        negatives = [l for l in range(batch.k) if labels[l] is not labels[i]]
        for j in range(batch.k):
            if j == i or labels[j] is not labels[i]:
                continue
            if denominator == "all":
                pool = [l for l in range(batch.k) if l != i]
            else:
                pool = [j] + negatives
            denom = torch.logsumexp(sim[i, pool], dim=0)
            terms.append(denom - sim[i, j])
    if not terms:
        raise SkipBatch("no positive pair in batch")
    return torch.stack(terms).mean()
