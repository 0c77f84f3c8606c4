"""Attention-based gated fusion of text and graph token states.

Both modalities are projected into a shared space, combined through tanh,
and scored down to one scalar per token. The sigmoid of that score is a
per-token gate applied multiplicatively to the text states. Graph cues
therefore modulate magnitudes but never overwrite the text representation.
"""

from __future__ import annotations

import torch
import torch.nn as nn


def _check_pair(a: torch.Tensor, b: torch.Tensor) -> None:
    if a.ndim != 2 or b.ndim != 2 or a.shape != b.shape:
        raise ValueError(f"expected two matrices of equal shape, got {tuple(a.shape)} and {tuple(b.shape)}")


class GatedFusion(nn.Module):
    """gate = sigma(tanh(H_text W_t^T + H_graph W_g^T) v), output = gate * H_text.

    Projections are bias-free by default. ``gate_mode='softmax'`` swaps the
    per-token sigmoid for a softmax over tokens; it exists for
    experimentation and is off by default.
    """

    def __init__(self, dim: int, bias: bool = False, gate_mode: str = "sigmoid"):
        super().__init__()
        if gate_mode not in ("sigmoid", "softmax"):
            raise ValueError(f"unknown gate_mode {gate_mode!r}")
        self.dim = dim
        self.gate_mode = gate_mode
        self.text_proj = nn.Linear(dim, dim, bias=bias)
        self.graph_proj = nn.Linear(dim, dim, bias=bias)
        self.attn = nn.Linear(dim, 1, bias=False)
        for lin in (self.text_proj, self.graph_proj, self.attn):
            nn.init.xavier_uniform_(lin.weight)
            if lin.bias is not None:
                nn.init.zeros_(lin.bias)

    def gate(self, h_text: torch.Tensor, h_graph: torch.Tensor) -> torch.Tensor:
        """Per-token gating vector, shape (n, 1), entries strictly in (0, 1)."""
        _check_pair(h_text, h_graph)
        if h_text.shape[1] != self.dim:
            raise ValueError(f"expected width {self.dim}, got {h_text.shape[1]}")
        hidden = torch.tanh(self.text_proj(h_text) + self.graph_proj(h_graph))
        score = self.attn(hidden)
        if self.gate_mode == "softmax":
            return torch.softmax(score, dim=0)
        return torch.sigmoid(score)

    def forward(self, h_text: torch.Tensor, h_graph: torch.Tensor) -> torch.Tensor:
        return integrate(h_text, self.gate(h_text, h_graph))


def gating_vector(h_text: torch.Tensor, h_graph: torch.Tensor, fusion: GatedFusion) -> torch.Tensor:
    return fusion.gate(h_text, h_graph)


def integrate(h_text: torch.Tensor, alpha: torch.Tensor) -> torch.Tensor:
    """Scale row i of ``h_text`` by gate entry i."""
    if alpha.ndim == 1:
        alpha = alpha.unsqueeze(1)
    if alpha.ndim != 2 or alpha.shape[1] != 1 or alpha.shape[0] != h_text.shape[0]:
        raise ValueError(f"gate must be ({h_text.shape[0]}, 1), got {tuple(alpha.shape)}")
    return alpha * h_text


def fuse_additive(h_text: torch.Tensor, h_graph: torch.Tensor) -> torch.Tensor:
    """Element-wise sum, the gate-free ablation path."""
    _check_pair(h_text, h_graph)
    return h_text + h_graph
