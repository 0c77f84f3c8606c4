"""Run configuration: a flat, versioned JSON schema shared by every command.

One file describes a run end to end: backbone, graph and fusion settings,
optimization, data paths, and output directory. Unknown keys are rejected
so typos fail loudly instead of silently using a default.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Bad or inconsistent run configuration."""


@dataclass
class RunConfig:
    version: int = SCHEMA_VERSION
    seed: int = 0

    # backbone
    backbone: str = "toy"
    hidden_dim: int = 16
    backbone_layers: int = 2
    backbone_heads: int = 2
    backbone_ff: int = 64
    input_cap: int = 512
    beam_size: int = 5
    max_output_tokens: int = 512

    # graph
    topology: str = "complete"
    sample_sizes: tuple[int, int] = (25, 10)
    full_neighborhood: bool = False

    # fusion
    fusion_bias: bool = False
    gate_mode: str = "sigmoid"

    # optimization
    epochs: int = 10
    effective_batch: int = 8
    lr_text: float = 1e-3
    lr_graph_fusion: float = 1e-3
    weight_decay_graph_fusion: float = 5e-4
    tau: float = 0.1
    lambda_contrastive: float = 1.0
    per_class_samples: int = 5
    none_positive: bool = True
    contrastive_denominator: str = "negatives"
    ce_reduction: str = "sum"
    ablation: str = "full"

    # data and artifacts
    dataset: str | None = None
    schema: str = "open-domain"
    split_ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    train_path: str | None = None
    val_path: str | None = None
    out_dir: str = "runs/default"
    cache_dir: str | None = None

    def validate(self) -> "RunConfig":
        if self.version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported config version {self.version}")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        for name in ("lr_text", "lr_graph_fusion", "tau"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.weight_decay_graph_fusion < 0 or self.lambda_contrastive < 0:
            raise ConfigError("weights must be non-negative")
        if self.per_class_samples < 2:
            raise ConfigError("per_class_samples must be >= 2")
        if self.effective_batch < 1:
            raise ConfigError("effective_batch must be >= 1")
        if self.ablation not in ("full", "no-contrastive", "additive", "linear-graph"):
            raise ConfigError(f"unknown ablation {self.ablation!r}")
        if self.topology not in ("complete", "linear"):
            raise ConfigError(f"unknown topology {self.topology!r}")
        if self.gate_mode not in ("sigmoid", "softmax"):
            raise ConfigError(f"unknown gate_mode {self.gate_mode!r}")
        if self.contrastive_denominator not in ("negatives", "all"):
            raise ConfigError(f"unknown contrastive_denominator {self.contrastive_denominator!r}")
        if self.ce_reduction not in ("sum", "mean"):
            raise ConfigError(f"unknown ce_reduction {self.ce_reduction!r}")
        if self.schema not in ("open-domain", "closed-domain"):
            raise ConfigError(f"unknown schema {self.schema!r}")
        if not self.backbone.startswith(("toy", "hf:")):
            raise ConfigError(f"unknown backbone {self.backbone!r}")
        if self.dataset is None and self.train_path is None:
            raise ConfigError("either dataset or train_path is required")
        if len(self.split_ratios) != 3:
            raise ConfigError("split_ratios must have three entries")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sample_sizes"] = list(self.sample_sizes)
        d["split_ratios"] = list(self.split_ratios)
        return d


_FIELDS = {f.name for f in fields(RunConfig)}


def config_from_dict(raw: dict) -> RunConfig:
    unknown = set(raw) - _FIELDS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    coerced = dict(raw)
    if "sample_sizes" in coerced:
        coerced["sample_sizes"] = tuple(coerced["sample_sizes"])
    if "split_ratios" in coerced:
        coerced["split_ratios"] = tuple(coerced["split_ratios"])
    try:
        cfg = RunConfig(**coerced)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    return config_from_dict(raw)


def save_config(cfg: RunConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
