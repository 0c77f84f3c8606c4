"""Synthetic templated news corpus for desk-scale training and tests.

Documents are built from fixed word pools so that a tiny word-level
backbone can represent every document exactly. Slot presence follows the
marginals of a large annotated news corpus: what always present, where
93.9%, when 94.9%, who 73.9%, why 44.5%.
"""

from __future__ import annotations

import random

from .corpus import AnnotatedDocument, Document, EventRecord, SlotClass, Span

PLACES = ("mumbai", "delhi", "agra", "pune", "chennai", "kolkata", "jaipur", "nagpur")
TIMES = ("monday", "tuesday", "friday", "sunday", "january", "march", "june", "october")
EVENTS = ("flood", "protest", "fire", "storm", "accident", "outbreak", "strike", "crash")
AGENTS = ("residents", "workers", "students", "farmers", "officials", "police", "villagers", "drivers")
CAUSES = ("rain", "unrest", "shortage", "heatwave", "dispute", "leak", "drought", "fog")

PRESENCE = {"where": 0.939, "when": 0.949, "who": 0.739, "why": 0.445}

# (slot, prefix, suffix): sentence = prefix + value + suffix
_SENTENCES = (
    ("what", "a ", " hit it ."),
    ("where", "it hit ", " ."),
    ("when", "it came on ", " ."),
    ("who", "", " were there ."),
    ("why", "this came after ", " ."),
)


def generate_document(rng: random.Random, doc_id: str) -> AnnotatedDocument:
    values = {
        "what": rng.choice(EVENTS),
        "where": rng.choice(PLACES),
        "when": rng.choice(TIMES),
        "who": rng.choice(AGENTS),
        "why": rng.choice(CAUSES),
    }
    present = {slot: slot == "what" or rng.random() < PRESENCE[slot] for slot in values}

    title = f"the {values['what']}"
    pieces = [title]
    spans = []
    cursor = len(title)
    for slot, prefix, suffix in _SENTENCES:
        if not present[slot]:
            continue
        value = values[slot]
        sentence = prefix + value + suffix
        start = cursor + 1 + len(prefix)  # +1 for the joining space
        spans.append(Span(SlotClass[slot.upper()], start, start + len(value)))
        pieces.append(sentence)
        cursor += 1 + len(sentence)

    body = " ".join(pieces[1:])
    text = " ".join(pieces)
    gold = EventRecord(**{slot: values[slot] for slot in values if present[slot]})
    return AnnotatedDocument(Document(doc_id, title, body, text), gold, tuple(spans))


def generate_corpus(n: int, seed: int) -> list[AnnotatedDocument]:
    """Generate ``n`` documents deterministically from ``seed``."""
    rng = random.Random(seed)
    return [generate_document(rng, f"synth-{seed}-{i:05d}") for i in range(n)]
