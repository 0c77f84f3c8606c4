"""Data model, 5W output-string codec, and dataset I/O.

A corpus is a line-delimited UTF-8 JSON file, one record per line:

    {"id": ..., "title": ..., "body": ..., "text": ...,
     "gold": {"where": ..., "when": ..., "what": ..., "who": ..., "why": ...},
     "spans": [{"class": "WHERE", "start": 0, "end": 6}, ...]}

``text`` is the already-materialized extraction unit (title plus leading
sentences). Gold slot values may be null; spans are optional and, when
present, must reproduce a fragment of the corresponding gold value.
"""

from __future__ import annotations

import json
import math
import random
import re
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Sequence

SLOT_NAMES = ("where", "when", "what", "who", "why")


class SlotClass(IntEnum):
    """Token/span classes. Order doubles as overlap priority (WHY wins)."""

    WHERE = 0
    WHEN = 1
    WHAT = 2
    WHO = 3
    WHY = 4
    NONE = 5

    @property
    def slot(self) -> str:
        return SLOT_NAMES[self.value]


W_CLASSES = (SlotClass.WHERE, SlotClass.WHEN, SlotClass.WHAT, SlotClass.WHO, SlotClass.WHY)


class ParseError(ValueError):
    """Raised when a 5W output string has no recognizable slot segment."""


class SchemaError(ValueError):
    """Raised on a malformed corpus record; carries the 1-based line number."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


def _ws_normalize(s: str) -> str:
    return re.sub(r"\s+", " ", s).strip()


@dataclass(frozen=True)
class Document:
    """A single document: the unit of extraction."""

    id: str
    title: str
    body: str
    text: str

    def __post_init__(self):
        if not self.text:
            raise ValueError(f"document {self.id!r} has empty text")


@dataclass(frozen=True)
class EventRecord:
    """The five optional W slots of one event. Absent is distinct from empty."""

    where: str | None = None
    when: str | None = None
    what: str | None = None
    who: str | None = None
    why: str | None = None

    def __post_init__(self):
        for name in SLOT_NAMES:
            value = getattr(self, name)
            if value is None:
                continue
            stripped = value.strip()
            if not stripped:
                raise ValueError(f"slot {name!r} is present but empty")
            if stripped != value:
                object.__setattr__(self, name, stripped)

    def slots(self) -> dict[str, str | None]:
        return {name: getattr(self, name) for name in SLOT_NAMES}

    def get(self, cls: SlotClass) -> str | None:
        return getattr(self, cls.slot)

    @classmethod
    def from_dict(cls, d: dict) -> "EventRecord":
        return cls(**{name: d.get(name) for name in SLOT_NAMES})


# --- 5W string codec ------------------------------------------------------

_SEGMENT_RE = re.compile(
    r"\b(where|when|what|who|why)\s*:", re.IGNORECASE
)


def parse_5w_string(s: str) -> EventRecord:
    """Parse decoder output into an EventRecord.

    Tolerant by design: slot labels match case-insensitively, missing
    trailing slots become absent, and 'none' (trimmed, any case) or an
    empty value marks an absent slot. Later duplicates of a label win.
    Raises ParseError only when no "label:" segment is found at all.
    """
    matches = list(_SEGMENT_RE.finditer(s))
    if not matches:
        raise ParseError(f"no 5W slot segment found in {s!r}")
    values: dict[str, str | None] = {}
    for i, m in enumerate(matches):
        label = m.group(1).lower()
        end = matches[i + 1].start() if i + 1 < len(matches) else len(s)
        value = s[m.end():end].strip().rstrip(";").strip()
        if not value or value.lower() == "none":
            values[label] = None
        else:
            values[label] = value
    return EventRecord(**{name: values.get(name) for name in SLOT_NAMES})


def render_5w_string(r: EventRecord) -> str:
    """Render an EventRecord in the canonical decoder output format."""
    parts = [f"{name}:{getattr(r, name) or 'none'}" for name in SLOT_NAMES]
    return "; ".join(parts)


# --- annotated documents --------------------------------------------------

@dataclass(frozen=True)
class Span:
    """A gold character span: [start, end) into Document.text."""

    cls: SlotClass
    start: int
    end: int


@dataclass(frozen=True)
class AnnotatedDocument:
    document: Document
    gold: EventRecord
    spans: tuple[Span, ...] = ()

    def __post_init__(self):
        text = self.document.text
        for span in self.spans:
            if span.cls is SlotClass.NONE:
                raise ValueError("span class must be one of the five Ws")
            if not (0 <= span.start < span.end <= len(text)):
                raise ValueError(
                    f"span ({span.start}, {span.end}) out of bounds for text of "
                    f"length {len(text)}"
                )
            gold_value = self.gold.get(span.cls)
            if gold_value is None:
                raise ValueError(f"span for {span.cls.name} but gold slot is absent")
            fragment = _ws_normalize(text[span.start:span.end])
            if fragment not in _ws_normalize(gold_value):
                raise ValueError(
                    f"span text {fragment!r} is not a fragment of gold "
                    f"{span.cls.name.lower()} value {gold_value!r}"
                )


@dataclass(frozen=True)
class TokenLabeling:
    """Per-token slot classes aligned to one tokenization of a document."""

    labels: tuple[SlotClass, ...]
    dropped_spans: int = 0


# --- dataset I/O ----------------------------------------------------------

def _record_from_line(obj: dict, schema: str) -> AnnotatedDocument:
    for field in ("id", "title", "body", "text"):
        if field not in obj:
            raise ValueError(f"missing field {field!r}")
        if not isinstance(obj[field], str):
            raise ValueError(f"field {field!r} must be a string")
    text = obj["text"]
    if schema == "closed-domain":
        types = obj.get("argument_types")
        if not isinstance(types, list) or not all(isinstance(t, str) for t in types):
            raise ValueError("closed-domain record needs an 'argument_types' list")
        doc = Document(obj["id"], obj["title"], obj["body"], text)
        text = build_closed_domain_input(doc, types)
    document = Document(obj["id"], obj["title"], obj["body"], text)

    gold_obj = obj.get("gold") or {}
    if not isinstance(gold_obj, dict):
        raise ValueError("field 'gold' must be an object or null")
    unknown = set(gold_obj) - set(SLOT_NAMES)
    if unknown:
        raise ValueError(f"unknown gold slots {sorted(unknown)}")
    gold = EventRecord.from_dict(gold_obj)

    spans = []
    for s in obj.get("spans") or ():
        try:
            cls = SlotClass[s["class"].upper()]
        except (KeyError, TypeError, AttributeError):
            raise ValueError(f"bad span class in {s!r}") from None
        if not isinstance(s.get("start"), int) or not isinstance(s.get("end"), int):
            raise ValueError(f"span start/end must be integers in {s!r}")
        spans.append(Span(cls, s["start"], s["end"]))
    return AnnotatedDocument(document, gold, tuple(spans))


def load_corpus(path: str | Path, schema: str = "open-domain") -> list[AnnotatedDocument]:
    """Load a line-delimited corpus file, validating every record.

    Raises SchemaError (with line number) on the first malformed record;
    I/O failures propagate as OSError.
    """
    if schema not in ("open-domain", "closed-domain"):
        raise ValueError(f"unknown schema {schema!r}")
    docs: list[AnnotatedDocument] = []
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise SchemaError(f"invalid JSON: {e}", line_no) from None
            try:
                record = _record_from_line(obj, schema)
            except ValueError as e:
                raise SchemaError(str(e), line_no) from None
            if record.document.id in seen_ids:
                raise SchemaError(f"duplicate id {record.document.id!r}", line_no)
            seen_ids.add(record.document.id)
            docs.append(record)
    return docs


def record_to_dict(doc: AnnotatedDocument) -> dict:
    return {
        "id": doc.document.id,
        "title": doc.document.title,
        "body": doc.document.body,
        "text": doc.document.text,
        "gold": doc.gold.slots(),
        "spans": [
            {"class": s.cls.name, "start": s.start, "end": s.end} for s in doc.spans
        ],
    }


def write_corpus(docs: Iterable[AnnotatedDocument], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(record_to_dict(doc), ensure_ascii=False) + "\n")


def split_corpus(
    docs: Sequence[AnnotatedDocument],
    ratios: tuple[float, float, float],
    seed: int,
) -> tuple[list[AnnotatedDocument], list[AnnotatedDocument], list[AnnotatedDocument]]:
    """Deterministic shuffle + partition into (train, val, test).

    Sizes are floor-allocated from the ratios with the remainder going to
    train. Ratio components may be zero but not negative.
    """
    if any(r < 0 for r in ratios):
        raise ValueError(f"ratios must be non-negative, got {ratios}")
    if not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        raise ValueError(f"ratios must sum to 1, got {ratios}")
    shuffled = list(docs)
    random.Random(seed).shuffle(shuffled)
    n = len(shuffled)
    n_val = int(n * ratios[1])
    n_test = int(n * ratios[2])
    n_train = n - n_val - n_test
    train = shuffled[:n_train]
    val = shuffled[n_train:n_train + n_val]
    test = shuffled[n_train + n_val:]
    return train, val, test


def align_labels(
    doc: AnnotatedDocument,
    token_offsets: Sequence[tuple[int, int]],
) -> TokenLabeling:
    """Project gold character spans onto token labels.

    A token gets the class of any span overlapping its character range by
    at least one character; overlaps of different classes resolve by class
    priority (WHY highest). Spans overlapping no token (e.g. truncated
    away) are counted in ``dropped_spans``.
    """
    labels = [SlotClass.NONE] * len(token_offsets)
    dropped = 0
    for span in sorted(doc.spans, key=lambda s: s.cls):
        hit = False
        for i, (ts, te) in enumerate(token_offsets):
            if max(span.start, ts) < min(span.end, te):
                labels[i] = span.cls
                hit = True
        if not hit:
            dropped += 1
    return TokenLabeling(tuple(labels), dropped)


def build_closed_domain_input(doc: Document, argument_types: Sequence[str]) -> str:
    """Append the event's argument types to the document text."""
    if not argument_types:
        raise ValueError("argument_types must be non-empty")
    return f"{doc.text} argument types: {'; '.join(argument_types)}"
