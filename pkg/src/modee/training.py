"""Joint training loop with per-module optimizer groups.

Two optimizers run side by side: a decoupled-weight-decay one over the
backbone (text encoder and decoder) and a plain adaptive-moment one over
the graph encoder and fusion parameters. Gradients accumulate across
documents and both optimizers step together once per effective batch.

Every random draw is re-derived from (run seed, epoch, position), so a
resumed run consumes exactly the randomness stream of an uninterrupted
one; nothing about RNG state needs to be checkpointed.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

import torch

from .config import ConfigError, RunConfig
from .corpus import AnnotatedDocument, align_labels
from .evalkit import exact_match_scores
from .losses import (ContrastiveBatch, SkipBatch, contrastive_loss,
                     cross_entropy_loss, sample_contrastive_nodes)
from .model import Ablation, EventModel, derive_seed, save_checkpoint


def make_optimizer_groups(model: EventModel, cfg: RunConfig) -> list[torch.optim.Optimizer]:
    """AdamW over the backbone, Adam with weight decay over graph + fusion."""
    backbone_params = [p for p in model.backbone.parameters() if p.requires_grad]
    graph_fusion = list(model.graph_encoder.parameters())
    if model.fusion is not None:
        graph_fusion += list(model.fusion.parameters())
    graph_fusion = [p for p in graph_fusion if p.requires_grad]

    assigned = {id(p) for p in backbone_params} | {id(p) for p in graph_fusion}
    if len(assigned) != len(backbone_params) + len(graph_fusion):
        raise ConfigError("a parameter landed in both optimizer groups")
    stray = [n for n, p in model.named_parameters()
             if p.requires_grad and id(p) not in assigned]
    if stray:
        raise ConfigError(f"parameters missing an optimizer group: {stray}")

    opt_text = torch.optim.AdamW(backbone_params, lr=cfg.lr_text)
    opt_graph = torch.optim.Adam(graph_fusion, lr=cfg.lr_graph_fusion,
                                 weight_decay=cfg.weight_decay_graph_fusion)
    return [opt_text, opt_graph]


def training_step(model: EventModel, adoc: AnnotatedDocument, cfg: RunConfig,
                  epoch: int, doc_index: int, backward: bool = True) -> dict:
    """Forward + loss for one document; backward scaled for accumulation."""
    fwd = model.states(adoc.document.text, derive_seed(cfg.seed, "graph", epoch, doc_index),
                       doc_id=adoc.document.id)
    gold_ids = model.target_ids(adoc.gold)
    logits = model.backbone.teacher_forced_logits(fwd.h_integrated, gold_ids)
    end = model.backbone.generation_defaults().end_token
    ce = cross_entropy_loss(logits, [*gold_ids, end], reduction=cfg.ce_reduction)

    contrastive = None
    if model.ablation is not Ablation.NO_CONTRASTIVE:
        labeling = align_labels(adoc, fwd.tok.offsets)
        try:
            idx = sample_contrastive_nodes(
                labeling, cfg.per_class_samples,
                derive_seed(cfg.seed, "nodes", epoch, doc_index),
                none_positive=cfg.none_positive)
            batch = ContrastiveBatch(fwd.h_graph[idx],
                                     tuple(labeling.labels[i] for i in idx))
            contrastive = contrastive_loss(batch, cfg.tau,
                                           none_positive=cfg.none_positive,
                                           denominator=cfg.contrastive_denominator)
        except SkipBatch:
            contrastive = None

    total = ce if contrastive is None else ce + cfg.lambda_contrastive * contrastive
    if backward:
        (total / cfg.effective_batch).backward()
    return {
        "ce": float(ce.detach()),
        "contrastive": 0.0 if contrastive is None else float(contrastive.detach()),
        "skipped": contrastive is None and model.ablation is not Ablation.NO_CONTRASTIVE,
        "total": float(total.detach()),
    }


def _validate(model: EventModel, docs: list[AnnotatedDocument], seed: int) -> tuple[float | None, int]:
    if not docs:
        return None, 0
    preds, golds, failures = [], [], 0
    for adoc in docs:
        _, rec = model.extract(adoc.document.text, doc_id=adoc.document.id,
                               graph_seed=derive_seed(seed, "eval"))
        if rec is None:
            from .corpus import EventRecord
            rec = EventRecord()
            failures += 1
        preds.append(rec)
        golds.append(adoc.gold)
    model.train()
    return exact_match_scores(preds, golds).overall[2], failures


def run_training(train_docs: list[AnnotatedDocument], val_docs: list[AnnotatedDocument],
                 cfg: RunConfig, out_dir: str | Path,
                 resume_payload: dict | None = None,
                 model: EventModel | None = None) -> tuple[EventModel, list[dict]]:
    """Train for cfg.epochs epochs, checkpointing and logging per epoch.

    ``resume_payload`` is a loaded checkpoint dict; training continues at
    the epoch after the one it recorded and appends to the metrics log.
    """
    if not train_docs:
        raise ValueError("empty training split")
    out = Path(out_dir)
    ckpt_dir = out / "checkpoints"
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    metrics_path = out / "metrics.jsonl"

    if model is None:
        model = EventModel(cfg)
    else:
        # a resumed model adopts the new config, but only fields that do not
        # alter the architecture or the derived randomness stream may change
        fixed = ("backbone", "hidden_dim", "backbone_layers", "backbone_heads",
                 "backbone_ff", "topology", "sample_sizes", "full_neighborhood",
                 "fusion_bias", "gate_mode", "ablation", "seed")
        for key in fixed:
            if getattr(model.cfg, key) != getattr(cfg, key):
                raise ConfigError(f"resume cannot change {key!r}")
        model.cfg = cfg
    optimizers = make_optimizer_groups(model, cfg)
    start_epoch = 0
    if resume_payload is not None:
        start_epoch = resume_payload["epoch"]
        for opt, state in zip(optimizers, resume_payload.get("optimizer_states", [])):
            opt.load_state_dict(state)

    metrics: list[dict] = []
    log = metrics_path.open("a")
    try:
        model.train()
        for epoch in range(start_epoch, cfg.epochs):
            order = list(range(len(train_docs)))
            random.Random(derive_seed(cfg.seed, "order", epoch)).shuffle(order)
            sums = {"ce": 0.0, "contrastive": 0.0, "skipped": 0}
            pending = 0
            for opt in optimizers:
                opt.zero_grad()
            for pos, doc_index in enumerate(order):
                stats = training_step(model, train_docs[doc_index], cfg, epoch, doc_index)
                sums["ce"] += stats["ce"]
                sums["contrastive"] += stats["contrastive"]
                sums["skipped"] += int(stats["skipped"])
                pending += 1
                if pending == cfg.effective_batch or pos == len(order) - 1:
                    for opt in optimizers:
                        opt.step()
                        opt.zero_grad()
                    pending = 0
            val_f1, val_failures = _validate(model, val_docs, cfg.seed)
            row = {
                "epoch": epoch + 1,
                "ce": sums["ce"] / len(train_docs),
                "contrastive": sums["contrastive"] / len(train_docs),
                "skipped_contrastive": sums["skipped"],
                "val_em_f1": val_f1,
                "val_parse_failures": val_failures,
            }
            metrics.append(row)
            log.write(json.dumps(row) + "\n")
            log.flush()
            save_checkpoint(ckpt_dir / f"epoch-{epoch + 1:04d}.pt", model,
                            epoch + 1, optimizers)
        save_checkpoint(ckpt_dir / "final.pt", model, cfg.epochs, optimizers)
    finally:
        log.close()
    return model, metrics
