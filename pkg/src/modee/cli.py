"""Command-line entry point.

Subcommands: train, ablate (train with an ablation preset), predict,
evaluate, synth. Every run writes a manifest first, atomically, so a
crashed run still records what it was asked to do.

Exit codes: 0 success, 2 config or input error, 3 data alignment error,
1 internal error.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import subprocess
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, load_config
from .corpus import (AnnotatedDocument, EventRecord, SchemaError, load_corpus,
                     render_5w_string, split_corpus, write_corpus)
from .evalkit import (EvalReport, embed_scores, exact_match_scores,
                      HashEmbedScorer, report_dict, report_table, rouge_l_scores)


class AlignmentError(Exception):
    """Prediction and gold files disagree on document ids."""


def _source_revision() -> str:
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], capture_output=True,
                             text=True, timeout=5, cwd=Path(__file__).parent)
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    try:
        from importlib.metadata import version
        return f"pkg-{version('modee')}"
    except Exception:
        return "unknown"


def _write_manifest(out_dir: Path, command: str, cfg: RunConfig,
                    config_path: str | None, extra: dict | None = None) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "config_path": config_path,
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "source_revision": _source_revision(),
        "backbone": cfg.backbone,
        "topology": "linear" if cfg.ablation == "linear-graph" else cfg.topology,
        "created_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    if extra:
        manifest.update(extra)
    tmp = out_dir / "manifest.json.tmp"
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, out_dir / "manifest.json")


def _load_splits(cfg: RunConfig) -> tuple[list[AnnotatedDocument], list[AnnotatedDocument]]:
    if cfg.train_path is not None:
        train = load_corpus(cfg.train_path, cfg.schema)
        val = load_corpus(cfg.val_path, cfg.schema) if cfg.val_path else []
        return train, val
    docs = load_corpus(cfg.dataset, cfg.schema)
    train, val, _ = split_corpus(docs, cfg.split_ratios, cfg.seed)
    return train, val


def _apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "ablation", None):
        cfg.ablation = args.ablation
    if getattr(args, "out", None):
        cfg.out_dir = args.out
    if getattr(args, "closed_domain", False):
        cfg.schema = "closed-domain"
    if cfg.cache_dir is None:
        cfg.cache_dir = os.environ.get("MODEE_CACHE_DIR")
    return cfg.validate()


def cmd_train(args: argparse.Namespace) -> int:
    from .training import run_training

    cfg = _apply_overrides(load_config(args.config), args)
    out_dir = Path(cfg.out_dir)
    try:
        train, val = _load_splits(cfg)
    except FileNotFoundError as exc:
        raise ConfigError(f"dataset file not found: {exc.filename}") from exc
    _write_manifest(out_dir, "train", cfg, args.config)
    _, metrics = run_training(train, val, cfg, out_dir)
    final = metrics[-1] if metrics else {}
    print(f"trained {cfg.epochs} epochs; final ce {final.get('ce', float('nan')):.4f}; "
          f"checkpoints in {out_dir / 'checkpoints'}")
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    return cmd_train(args)


def _doc_lines(path: Path) -> list[dict]:
    if not path.exists():
        raise ConfigError(f"input file not found: {path}")
    lines = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                lines.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON: {exc}", line_no) from None
    return lines


def cmd_predict(args: argparse.Namespace) -> int:
    from .model import load_checkpoint

    try:
        model, _ = load_checkpoint(args.checkpoint)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from exc
    except Exception as exc:
        raise ConfigError(f"cannot load checkpoint {args.checkpoint}: {exc}") from exc
    schema = "closed-domain" if args.closed_domain else "open-domain"
    docs = load_corpus(args.input, schema)
    failures = 0
    out_path = Path(args.output)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8") as fh:
        for adoc in docs:
            raw, rec = model.extract(adoc.document.text, doc_id=adoc.document.id)
            failed = rec is None
            if failed:
                rec = EventRecord()
                failures += 1
            fh.write(json.dumps({
                "id": adoc.document.id,
                "raw": raw,
                "rendered": render_5w_string(rec),
                "slots": rec.slots(),
                "parse_failure": failed,
            }) + "\n")
    print(f"predicted {len(docs)} documents, {failures} parse failures -> {out_path}")
    return 0


def _read_record_file(path: Path) -> dict[str, tuple[EventRecord, bool]]:
    records: dict[str, tuple[EventRecord, bool]] = {}
    for line_no, obj in enumerate(_doc_lines(path), start=1):
        if "id" not in obj:
            raise SchemaError("record missing 'id'", line_no)
        slots = obj.get("slots", obj.get("gold"))
        if not isinstance(slots, dict):
            raise SchemaError("record needs a 'slots' or 'gold' object", line_no)
        try:
            rec = EventRecord.from_dict(slots)
        except (TypeError, ValueError) as exc:
            raise SchemaError(str(exc), line_no) from None
        if obj["id"] in records:
            raise SchemaError(f"duplicate id {obj['id']!r}", line_no)
        records[obj["id"]] = (rec, bool(obj.get("parse_failure")))
    return records


def cmd_evaluate(args: argparse.Namespace) -> int:
    preds = _read_record_file(Path(args.pred))
    golds = _read_record_file(Path(args.gold))
    missing = sorted(set(golds) - set(preds))
    extra = sorted(set(preds) - set(golds))
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"ids missing from predictions: {missing}")
        if extra:
            parts.append(f"ids missing from gold: {extra}")
        raise AlignmentError("; ".join(parts))
    ids = sorted(golds)
    pred_list = [preds[i][0] for i in ids]
    gold_list = [golds[i][0] for i in ids]
    failures = sum(preds[i][1] for i in ids)

    report = EvalReport(
        em=exact_match_scores(pred_list, gold_list),
        rouge_l=rouge_l_scores(pred_list, gold_list),
        embed=embed_scores(pred_list, gold_list, HashEmbedScorer()),
        n_docs=len(ids),
        parse_failures=failures,
    )
    wanted = args.metric
    table = report_table(report, metrics=wanted)
    print(table)
    payload = report_dict(report)
    if wanted != "all":
        keep = {"em": "em", "rouge": "rouge_l", "embed": "embed"}[wanted]
        payload = {k: v for k, v in payload.items()
                   if k in ("n_docs", "parse_failures", keep)}
    if args.output:
        out_path = Path(args.output)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    from .synth import generate_corpus

    docs = generate_corpus(args.n, args.seed)
    write_corpus(docs, args.out)
    print(f"wrote {len(docs)} synthetic documents -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="modee",
                                     description="5W event extraction: train, predict, evaluate")
    sub = parser.add_subparsers(dest="command", required=True)

    ablations = ["full", "no-contrastive", "additive", "linear-graph"]

    p_train = sub.add_parser("train", help="train a model from a run config")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--ablation", choices=ablations)
    p_train.add_argument("--out", help="override out_dir from the config")
    p_train.add_argument("--closed-domain", action="store_true")
    p_train.set_defaults(func=cmd_train)

    p_abl = sub.add_parser("ablate", help="train with an ablation preset")
    p_abl.add_argument("--config", required=True)
    p_abl.add_argument("--ablation", choices=ablations[1:], required=True)
    p_abl.add_argument("--seed", type=int)
    p_abl.add_argument("--out")
    p_abl.add_argument("--closed-domain", action="store_true")
    p_abl.set_defaults(func=cmd_ablate)

    p_pred = sub.add_parser("predict", help="extract 5Ws for a document file")
    p_pred.add_argument("--checkpoint", required=True)
    p_pred.add_argument("--input", required=True)
    p_pred.add_argument("--output", required=True)
    p_pred.add_argument("--closed-domain", action="store_true")
    p_pred.set_defaults(func=cmd_predict)

    p_eval = sub.add_parser("evaluate", help="score predictions against gold")
    p_eval.add_argument("--pred", required=True)
    p_eval.add_argument("--gold", required=True)
    p_eval.add_argument("--metric", choices=["em", "rouge", "embed", "all"], default="all")
    p_eval.add_argument("--output", help="also write the report as JSON")
    p_eval.set_defaults(func=cmd_evaluate)

    p_synth = sub.add_parser("synth", help="generate a synthetic templated corpus")
    p_synth.add_argument("--n", type=int, default=128)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", required=True)
    p_synth.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AlignmentError as exc:
        print(f"alignment error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - last-resort diagnostic
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
