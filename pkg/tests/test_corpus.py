"""Data model, corpus files, splits, and span-to-token alignment."""

import json

import pytest

from modee.corpus import (AnnotatedDocument, Document, EventRecord, SchemaError,
                          SlotClass, Span, align_labels,
                          build_closed_domain_input, load_corpus, record_to_dict,
                          split_corpus, write_corpus)
from modee.synth import generate_corpus


def _adoc(text="a flood hit agra .", **gold):
    return AnnotatedDocument(Document("d1", "t", text, text),
                             EventRecord(**gold) if gold else EventRecord(what="flood"))


# -- validation -----------------------------------------------------------


def test_document_rejects_empty_text():
    with pytest.raises(ValueError):
        Document("d", "t", "b", "")


def test_event_record_strips_and_rejects_blank_slots():
    assert EventRecord(what="  flood ").what == "flood"
    with pytest.raises(ValueError):
        EventRecord(where="   ")


def test_annotated_document_span_bounds_checked():
    text = "a flood hit agra ."
    with pytest.raises(ValueError):
        AnnotatedDocument(Document("d", "t", text, text), EventRecord(what="flood"),
                          (Span(SlotClass.WHAT, 2, 99),))


def test_annotated_document_span_must_match_gold_fragment():
    text = "a flood hit agra ."
    gold = EventRecord(what="flood", where="agra")
    ok = AnnotatedDocument(Document("d", "t", text, text), gold,
                           (Span(SlotClass.WHAT, 2, 7), Span(SlotClass.WHERE, 12, 16)))
    assert len(ok.spans) == 2
    with pytest.raises(ValueError):
        AnnotatedDocument(Document("d", "t", text, text), gold,
                          (Span(SlotClass.WHAT, 12, 16),))  # says WHAT, covers "agra"


def test_span_class_none_rejected():
    text = "a flood ."
    with pytest.raises(ValueError):
        AnnotatedDocument(Document("d", "t", text, text), EventRecord(what="flood"),
                          (Span(SlotClass.NONE, 2, 7),))


# -- corpus files ---------------------------------------------------------


def test_corpus_round_trip(tmp_path):
    docs = generate_corpus(12, seed=3)
    path = tmp_path / "c.jsonl"
    write_corpus(docs, path)
    loaded = load_corpus(path)
    assert loaded == docs


def test_load_reports_line_numbers(tmp_path):
    path = tmp_path / "bad.jsonl"
    good = json.dumps(record_to_dict(generate_corpus(1, seed=0)[0]))
    path.write_text(good + "\n" + "{not json\n")
    with pytest.raises(SchemaError) as err:
        load_corpus(path)
    assert err.value.line_no == 2


def test_load_rejects_duplicate_ids(tmp_path):
    doc = record_to_dict(generate_corpus(1, seed=0)[0])
    path = tmp_path / "dup.jsonl"
    path.write_text(json.dumps(doc) + "\n" + json.dumps(doc) + "\n")
    with pytest.raises(SchemaError) as err:
        load_corpus(path)
    assert "duplicate" in str(err.value)


def test_closed_domain_schema_appends_types(tmp_path):
    doc = record_to_dict(generate_corpus(1, seed=0)[0])
    doc["argument_types"] = ["where", "what"]
    path = tmp_path / "cd.jsonl"
    path.write_text(json.dumps(doc) + "\n")
    loaded = load_corpus(path, schema="closed-domain")
    assert loaded[0].document.text.endswith("argument types: where; what")
    del doc["argument_types"]
    path.write_text(json.dumps(doc) + "\n")
    with pytest.raises(SchemaError):
        load_corpus(path, schema="closed-domain")


def test_build_closed_domain_input_requires_types():
    doc = Document("d", "t", "b", "text here")
    assert build_closed_domain_input(doc, ["who"]) == "text here argument types: who"
    with pytest.raises(ValueError):
        build_closed_domain_input(doc, [])


# -- splits ---------------------------------------------------------------


def test_split_sizes_and_determinism():
    docs = generate_corpus(20, seed=1)
    train, val, test = split_corpus(docs, (0.8, 0.1, 0.1), seed=5)
    assert (len(train), len(val), len(test)) == (16, 2, 2)
    again = split_corpus(docs, (0.8, 0.1, 0.1), seed=5)
    assert (train, val, test) == again
    ids = {d.document.id for part in (train, val, test) for d in part}
    assert len(ids) == 20


def test_split_allows_zero_ratio():
    docs = generate_corpus(10, seed=1)
    train, val, test = split_corpus(docs, (0.5, 0.5, 0.0), seed=0)
    assert (len(train), len(val), len(test)) == (5, 5, 0)


def test_split_rejects_bad_ratios():
    docs = generate_corpus(4, seed=1)
    with pytest.raises(ValueError):
        split_corpus(docs, (0.5, 0.2, 0.1), seed=0)
    with pytest.raises(ValueError):
        split_corpus(docs, (1.2, -0.2, 0.0), seed=0)


# -- alignment ------------------------------------------------------------


def test_align_labels_marks_overlapping_tokens():
    text = "a flood hit agra ."
    gold = EventRecord(what="flood", where="agra")
    adoc = AnnotatedDocument(Document("d", "t", text, text), gold,
                             (Span(SlotClass.WHAT, 2, 7), Span(SlotClass.WHERE, 12, 16)))
    offsets = ((0, 1), (2, 7), (8, 11), (12, 16), (17, 18))
    labeling = align_labels(adoc, offsets)
    assert labeling.labels == (SlotClass.NONE, SlotClass.WHAT, SlotClass.NONE,
                               SlotClass.WHERE, SlotClass.NONE)
    assert labeling.dropped_spans == 0


def test_align_labels_counts_spans_beyond_truncation():
    text = "a flood hit agra ."
    gold = EventRecord(what="flood", where="agra")
    adoc = AnnotatedDocument(Document("d", "t", text, text), gold,
                             (Span(SlotClass.WHAT, 2, 7), Span(SlotClass.WHERE, 12, 16)))
    offsets = ((0, 1), (2, 7))  # truncated before "agra"
    labeling = align_labels(adoc, offsets)
    assert labeling.labels == (SlotClass.NONE, SlotClass.WHAT)
    assert labeling.dropped_spans == 1


def test_align_labels_overlap_priority_later_class_wins():
    # one token covered by two spans: WHY (class 4) must beat WHERE (class 0)
    text = "delhi unrest ."
    gold = EventRecord(where="delhi unrest", why="delhi unrest")
    adoc = AnnotatedDocument(Document("d", "t", text, text), gold,
                             (Span(SlotClass.WHERE, 0, 12), Span(SlotClass.WHY, 6, 12)))
    offsets = ((0, 5), (6, 12), (13, 14))
    labeling = align_labels(adoc, offsets)
    assert labeling.labels == (SlotClass.WHERE, SlotClass.WHY, SlotClass.NONE)


def test_synth_spans_point_at_gold_values():
    for adoc in generate_corpus(50, seed=11):
        text = adoc.document.text
        for span in adoc.spans:
            assert text[span.start:span.end] == adoc.gold.get(span.cls)


def test_synth_marginals_roughly_match():
    docs = generate_corpus(2000, seed=13)
    present = lambda slot: sum(getattr(d.gold, slot) is not None for d in docs) / len(docs)
    assert present("what") == 1.0
    assert abs(present("where") - 0.939) < 0.03
    assert abs(present("when") - 0.949) < 0.03
    assert abs(present("who") - 0.739) < 0.04
    assert abs(present("why") - 0.445) < 0.04
