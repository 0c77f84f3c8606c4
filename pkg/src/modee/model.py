"""Pipeline assembly: backbone + token graph + gated fusion + generation.

The model owns every trainable module and the frozen feature path. A
forward pass over one document produces the live text states, the graph
states built on frozen features, the gate, and the integrated states the
decoder conditions on. Construction is fully seeded so two builds from the
same config are bit-identical.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import torch
import torch.nn as nn

from .backbone import Backbone, GenerationConfig, Tokenization
from .config import ConfigError, RunConfig, config_from_dict
from .corpus import EventRecord, ParseError, parse_5w_string, render_5w_string
from .fusion import GatedFusion, fuse_additive, integrate
from .graphnet import (FeatureCache, GraphEncoder, Topology, build_token_graph,
                       init_node_features)


class Ablation(enum.Enum):
    FULL = "full"
    NO_CONTRASTIVE = "no-contrastive"
    ADDITIVE = "additive"
    LINEAR_GRAPH = "linear-graph"


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary labeled parts.

    Every stochastic choice in training draws from a seed derived this way
    from (run seed, epoch, document position, purpose), so resuming from a
    checkpoint replays exactly the stream an uninterrupted run would see.
    """
    digest = hashlib.sha256("|".join(repr(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


@dataclass
class ForwardPass:
    tok: Tokenization
    h_text: torch.Tensor
    features: torch.Tensor
    h_graph: torch.Tensor
    alpha: torch.Tensor | None
    h_integrated: torch.Tensor


def _build_backbone(cfg: RunConfig) -> Backbone:
    if cfg.backbone == "toy":
        from .toy import ToyBackbone
        return ToyBackbone(seed=cfg.seed, hidden_dim=cfg.hidden_dim,
                           layers=cfg.backbone_layers, heads=cfg.backbone_heads,
                           ff=cfg.backbone_ff)
    if cfg.backbone.startswith("hf:"):
        from .hf import HFBackbone
        return HFBackbone(cfg.backbone[3:])
    raise ConfigError(f"unknown backbone {cfg.backbone!r}")


class EventModel(nn.Module):
    def __init__(self, cfg: RunConfig):
        super().__init__()
        self.cfg = cfg
        self.ablation = Ablation(cfg.ablation)
        self.topology = (Topology.LINEAR if self.ablation is Ablation.LINEAR_GRAPH
                         else Topology(cfg.topology))
        with torch.random.fork_rng():
            torch.manual_seed(derive_seed(cfg.seed, "build"))
            self.backbone = _build_backbone(cfg)
            self.graph_encoder = GraphEncoder(self.backbone.hidden_dim,
                                              sample_sizes=cfg.sample_sizes,
                                              full_neighborhood=cfg.full_neighborhood)
            if self.ablation is Ablation.ADDITIVE:
                self.fusion = None
            else:
                self.fusion = GatedFusion(self.backbone.hidden_dim,
                                          bias=cfg.fusion_bias, gate_mode=cfg.gate_mode)
        self._frozen = self.backbone.frozen_pretrained_encoder()
        self.feature_cache = FeatureCache(cfg.cache_dir)

    # -- forward ------------------------------------------------------

    def states(self, text: str, graph_seed: int, doc_id: str | None = None) -> ForwardPass:
        tok = self.backbone.tokenize(text, self.cfg.input_cap)
        h_text = self.backbone.encode_tokens(tok)
        features = init_node_features(tok, self._frozen,
                                      cache=self.feature_cache, doc_id=doc_id)
        graph = build_token_graph(tok.n, self.topology)
        h_graph = self.graph_encoder(graph, features, graph_seed)
        if self.fusion is None:
            alpha = None
            h_int = fuse_additive(h_text, h_graph)
        else:
            alpha = self.fusion.gate(h_text, h_graph)
            h_int = integrate(h_text, alpha)
        return ForwardPass(tok, h_text, features, h_graph, alpha, h_int)

    def target_ids(self, record: EventRecord) -> list[int]:
        return self.backbone.encode_target(render_5w_string(record))

    def generate(self, h_integrated: torch.Tensor) -> str:
        defaults = self.backbone.generation_defaults()
        gen = GenerationConfig(beam_size=self.cfg.beam_size,
                               max_output_tokens=self.cfg.max_output_tokens,
                               start_token=defaults.start_token,
                               end_token=defaults.end_token)
        return self.backbone.generate(h_integrated, gen)

    def extract(self, text: str, doc_id: str | None = None,
                graph_seed: int = 0) -> tuple[str, EventRecord | None]:
        """Generate the 5W string for one document and parse it.

        Inference uses a fixed graph seed so repeated extraction of the
        same document is identical. Returns (raw string, record or None on
        parse failure).
        """
        self.eval()
        with torch.no_grad():
            fwd = self.states(text, graph_seed, doc_id=doc_id)
            raw = self.generate(fwd.h_integrated)
        try:
            return raw, parse_5w_string(raw)
        except ParseError:
            return raw, None

    # -- persistence ----------------------------------------------------

    def checkpoint_payload(self, epoch: int, optimizers: "list[torch.optim.Optimizer] | None" = None) -> dict:
        payload = {
            "config": self.cfg.to_dict(),
            "epoch": epoch,
            "model_state": {k: v.cpu() for k, v in self.state_dict().items()},
            "backbone_identifier": self.backbone.identifier,
        }
        if optimizers is not None:
            payload["optimizer_states"] = [opt.state_dict() for opt in optimizers]
        return payload


def save_checkpoint(path: str | Path, model: EventModel, epoch: int,
                    optimizers: "list[torch.optim.Optimizer] | None" = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(model.checkpoint_payload(epoch, optimizers), path)


def load_checkpoint(path: str | Path) -> tuple[EventModel, dict]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    payload = torch.load(path, weights_only=False)
    cfg = config_from_dict(payload["config"])
    model = EventModel(cfg)
    model.load_state_dict(payload["model_state"])
    return model, payload


# artifact locations do not describe the model; two runs that differ only
# in where they write must hash identically
_UNHASHED_CONFIG_KEYS = frozenset({"out_dir", "cache_dir", "dataset",
                                   "train_path", "val_path"})


def checkpoint_hash(path: str | Path) -> str:
    """Content digest of a checkpoint: config, epoch, and every tensor.

    Hashing content rather than file bytes keeps the digest stable across
    serialization-level noise (pickle protocol details, zip timestamps).
    """
    payload = torch.load(Path(path), weights_only=False)
    digest = hashlib.sha256()
    semantic = {k: v for k, v in payload["config"].items()
                if k not in _UNHASHED_CONFIG_KEYS}
    digest.update(json.dumps(semantic, sort_keys=True).encode())
    digest.update(str(payload["epoch"]).encode())
    state = payload["model_state"]
    for key in sorted(state):
        digest.update(key.encode())
        digest.update(state[key].detach().cpu().contiguous().numpy().tobytes())
    return digest.hexdigest()
