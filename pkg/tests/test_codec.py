"""Parse/render codec for the 5W output string."""

import random
import string

import pytest

from modee.corpus import EventRecord, ParseError, parse_5w_string, render_5w_string

SLOTS = ("where", "when", "what", "who", "why")


def test_render_canonical_order_and_none_placeholders():
    rec = EventRecord(what="flood", where="mumbai")
    assert render_5w_string(rec) == "where:mumbai; when:none; what:flood; who:none; why:none"


def test_render_all_absent():
    assert render_5w_string(EventRecord()) == "where:none; when:none; what:none; who:none; why:none"


def test_parse_canonical():
    rec = parse_5w_string("where:mumbai; when:monday; what:flood; who:residents; why:rain")
    assert rec == EventRecord(where="mumbai", when="monday", what="flood",
                              who="residents", why="rain")


def test_parse_none_and_empty_mean_absent():
    rec = parse_5w_string("where:none; when: ; what:fire; who:NONE; why:")
    assert rec == EventRecord(what="fire")


def test_parse_is_case_insensitive_on_labels():
    rec = parse_5w_string("WHERE: delhi; What: storm")
    assert rec.where == "delhi"
    assert rec.what == "storm"
    assert rec.when is None


def test_parse_missing_trailing_slots_absent():
    rec = parse_5w_string("where:agra")
    assert rec.where == "agra"
    assert all(getattr(rec, s) is None for s in SLOTS[1:])


def test_parse_duplicate_label_last_wins():
    rec = parse_5w_string("what:fire; what:flood")
    assert rec.what == "flood"


def test_parse_value_whitespace_trimmed():
    rec = parse_5w_string("where:  new   delhi  ; what:x")
    assert rec.where == "new   delhi"


def test_parse_rejects_label_free_strings():
    for bad in ("", "hello world", "nothing here", "whereabouts unknown"):
        with pytest.raises(ParseError):
            parse_5w_string(bad)


def test_parse_label_inside_word_does_not_match():
    # "somewhere:" must not be read as a where-slot: label needs a word boundary.
    rec = parse_5w_string("what:x; somewhere: y")
    assert rec.where is None
    assert rec.what == "x; somewhere: y"


def _random_record(rng: random.Random) -> EventRecord:
    # values avoid ';' and ':' (rendering reserves them) and the literal 'none'
    alphabet = string.ascii_lowercase + " "
    kwargs = {}
    for slot in SLOTS:
        if rng.random() < 0.5:
            continue
        while True:
            value = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 12))).strip()
            if value and value.lower() != "none":
                break
        kwargs[slot] = value
    return EventRecord(**kwargs)


def test_round_trip_random_records():
    rng = random.Random(42)
    for _ in range(2000):
        rec = _random_record(rng)
        assert parse_5w_string(render_5w_string(rec)) == rec


def test_fuzz_never_panics():
    rng = random.Random(7)
    chars = string.printable
    outcomes = {"record": 0, "error": 0}
    for _ in range(500):
        s = "".join(rng.choice(chars) for _ in range(rng.randint(0, 60)))
        try:
            rec = parse_5w_string(s)
            assert isinstance(rec, EventRecord)
            outcomes["record"] += 1
        except ParseError:
            outcomes["error"] += 1
    assert sum(outcomes.values()) == 500
