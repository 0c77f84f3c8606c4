"""Scoring of predicted event records against gold.

Three metric families over the five W slots: exact match with a light
string normalization, ROUGE-L over whitespace tokens computed per document
and averaged, and a pluggable embedding-similarity score with the same
averaging. Slots absent on both sides are never counted against a system.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Sequence

from .corpus import SLOT_NAMES, EventRecord

_TERMINAL_PUNCT = re.compile(r"[.,;:!?]+$")
_WS = re.compile(r"\s+")


class ScorerError(RuntimeError):
    """An embedding scorer failed on a string pair."""


def normalize_slot(value: str) -> str:
    value = _WS.sub(" ", value.strip().lower())
    return _TERMINAL_PUNCT.sub("", value).strip()


def _f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


@dataclass(frozen=True)
class SlotScores:
    per_w: dict[str, tuple[float, float, float]]
    overall: tuple[float, float, float]
    counts: dict[str, tuple[int, int, int]] | None = None


@dataclass(frozen=True)
class EvalReport:
    em: SlotScores
    rouge_l: SlotScores
    embed: SlotScores | None
    n_docs: int
    parse_failures: int


def _check_lengths(preds: Sequence[EventRecord], golds: Sequence[EventRecord]) -> None:
    if len(preds) != len(golds):
        raise ValueError(f"got {len(preds)} predictions for {len(golds)} golds")


def exact_match_scores(preds: Sequence[EventRecord], golds: Sequence[EventRecord],
                       normalized: bool = True, average: str = "micro") -> SlotScores:
    """Slot-level exact match. Both-absent slots stay out of every denominator.

    ``average='micro'`` pools correct/present counts across the five slots
    for the overall row; ``'macro'`` averages the per-slot P/R/F1 instead.
    """
    _check_lengths(preds, golds)
    if average not in ("micro", "macro"):
        raise ValueError(f"unknown average {average!r}")
    norm: Callable[[str], str] = normalize_slot if normalized else (lambda s: s)
    counts = {}
    for name in SLOT_NAMES:
        pred_present = gold_present = correct = 0
        for pred, gold in zip(preds, golds):
            p, g = getattr(pred, name), getattr(gold, name)
            pred_present += p is not None
            gold_present += g is not None
            if p is not None and g is not None and norm(p) == norm(g):
                correct += 1
        counts[name] = (pred_present, gold_present, correct)

    per_w = {}
    for name, (pp, gp, c) in counts.items():
        p = c / pp if pp else 0.0
        r = c / gp if gp else 0.0
        per_w[name] = (p, r, _f1(p, r))

    if average == "micro":
        pp = sum(v[0] for v in counts.values())
        gp = sum(v[1] for v in counts.values())
        c = sum(v[2] for v in counts.values())
        p = c / pp if pp else 0.0
        r = c / gp if gp else 0.0
        overall = (p, r, _f1(p, r))
    else:
        k = len(SLOT_NAMES)
        overall = tuple(sum(per_w[n][i] for n in SLOT_NAMES) / k for i in range(3))
    return SlotScores(per_w, overall, counts)


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, 1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def _pair_rouge(pred: str | None, gold: str | None) -> tuple[float, float, float]:
    pt = pred.split() if pred else []
    gt = gold.split() if gold else []
    lcs = lcs_length(pt, gt)
    p = lcs / len(pt) if pt else 0.0
    r = lcs / len(gt) if gt else 0.0
    return (p, r, _f1(p, r))


def _per_doc_average(preds: Sequence[EventRecord], golds: Sequence[EventRecord],
                     pair_fn: Callable[[str | None, str | None], tuple[float, float, float]]) -> SlotScores:
    """Shared averaging: score each present-in-either slot, average within a
    document, then across documents. Per-W columns average over the
    documents where that slot was scored."""
    _check_lengths(preds, golds)
    slot_totals = {name: [0.0, 0.0, 0.0, 0] for name in SLOT_NAMES}
    doc_means = []
    for pred, gold in zip(preds, golds):
        doc_scores = []
        for name in SLOT_NAMES:
            p, g = getattr(pred, name), getattr(gold, name)
            if p is None and g is None:
                continue
            triple = pair_fn(p, g)
            doc_scores.append(triple)
            acc = slot_totals[name]
            for i in range(3):
                acc[i] += triple[i]
            acc[3] += 1
        if doc_scores:
            doc_means.append(tuple(sum(t[i] for t in doc_scores) / len(doc_scores)
                                   for i in range(3)))
    per_w = {}
    for name, (sp, sr, sf, n) in slot_totals.items():
        per_w[name] = (sp / n, sr / n, sf / n) if n else (0.0, 0.0, 0.0)
    if doc_means:
        overall = tuple(sum(m[i] for m in doc_means) / len(doc_means) for i in range(3))
    else:
        overall = (0.0, 0.0, 0.0)
    return SlotScores(per_w, overall)


def rouge_l_scores(preds: Sequence[EventRecord], golds: Sequence[EventRecord]) -> SlotScores:
    return _per_doc_average(preds, golds, _pair_rouge)


class HashEmbedScorer:
    """Deterministic stub scorer: each distinct token maps to a one-hot axis.

    Cosine similarity is then 1 for equal tokens and 0 otherwise (barring
    hash collisions in the 2^30 axis space), which makes hand-computed
    oracles possible without any external model.
    """

    def _axis(self, token: str) -> int:
        h = 0
        for ch in token:
            h = (h * 1000003 + ord(ch)) & 0x3FFFFFFF
        return h

    def pair_scores(self, pred: str | None, gold: str | None) -> tuple[float, float, float]:
        pt = pred.split() if pred else []
        gt = gold.split() if gold else []
        if not pt or not gt:
            return (0.0, 0.0, 0.0)
        paxes = [self._axis(t) for t in pt]
        gaxes = [self._axis(t) for t in gt]
        p = sum(1.0 for a in paxes if a in set(gaxes)) / len(paxes)
        r = sum(1.0 for a in gaxes if a in set(paxes)) / len(gaxes)
        return (p, r, _f1(p, r))


def embed_scores(preds: Sequence[EventRecord], golds: Sequence[EventRecord],
                 scorer) -> SlotScores:
    """Greedy max-similarity token matching, averaged like ROUGE-L.

    ``scorer`` must expose pair_scores(pred, gold) -> (P, R, F); failures
    surface as ScorerError.
    """
    def pair(p: str | None, g: str | None) -> tuple[float, float, float]:
        try:
            return scorer.pair_scores(p, g)
        except Exception as exc:
            raise ScorerError(f"scorer failed on {p!r} vs {g!r}") from exc

    return _per_doc_average(preds, golds, pair)


def evaluate_corpus(model, docs, with_embed: bool = True,
                    graph_seed: int = 0) -> EvalReport:
    """Generate, parse, and score every document with a trained model.

    Parse failures are counted and scored as all-absent records, never
    raised: a model that emits garbage should score badly, not crash the
    evaluation.
    """
    if not docs:
        raise ValueError("no documents to evaluate")
    preds, golds, failures = [], [], 0
    for adoc in docs:
        _, rec = model.extract(adoc.document.text, doc_id=adoc.document.id, graph_seed=graph_seed)
        if rec is None:
            rec = EventRecord()
            failures += 1
        preds.append(rec)
        golds.append(adoc.gold)
    em = exact_match_scores(preds, golds)
    rouge = rouge_l_scores(preds, golds)
    embed = embed_scores(preds, golds, HashEmbedScorer()) if with_embed else None
    return EvalReport(em, rouge, embed, len(docs), failures)


def report_dict(report: EvalReport) -> dict:
    def block(s: SlotScores | None) -> dict | None:
        if s is None:
            return None
        out = {
            "per_w": {n: list(v) for n, v in s.per_w.items()},
            "overall": list(s.overall),
        }
        if s.counts is not None:
            out["counts"] = {n: list(v) for n, v in s.counts.items()}
        return out

    return {
        "n_docs": report.n_docs,
        "parse_failures": report.parse_failures,
        "em": block(report.em),
        "rouge_l": block(report.rouge_l),
        "embed": block(report.embed),
    }


def report_table(report: EvalReport, metrics: str = "all") -> str:
    """Aligned plain-text table: one row per W plus overall, P/R/F1 per metric."""
    blocks = []
    if metrics in ("all", "em"):
        blocks.append(("EM", report.em))
    if metrics in ("all", "rouge"):
        blocks.append(("ROUGE-L", report.rouge_l))
    if metrics in ("all", "embed") and report.embed is not None:
        blocks.append(("EMBED", report.embed))
    header = f"{'slot':<8}" + "".join(
        f"{name + ' ' + c:>12}" for name, _ in blocks for c in ("P", "R", "F1"))
    lines = [header]
    for slot in (*SLOT_NAMES, "overall"):
        row = f"{slot:<8}"
        for _, scores in blocks:
            triple = scores.overall if slot == "overall" else scores.per_w[slot]
            row += "".join(f"{v:>12.4f}" for v in triple)
        lines.append(row)
    lines.append(f"docs: {report.n_docs}  parse failures: {report.parse_failures}")
    return "\n".join(lines)
