"""Transcript parsing, validation, and JSONL round-trips."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clinconv import (
    ParseError,
    Transcript,
    Utterance,
    ValidationError,
    load_transcripts,
    save_transcripts,
)
from clinconv.jsonio import FieldWarnings
from clinconv.transcripts import parse_transcript, transcript_to_record, validate_transcript

GOOD = {
    "id": "visit-1",
    "utterances": [
        {"speaker": "physician", "start_ms": 0, "text": "what brings you in"},
        {"speaker": "patient", "start_ms": 2100, "text": "chest pain again"},
    ],
}


def test_parse_and_rebuild_record():
    transcript = parse_transcript(GOOD)
    assert transcript.id == "visit-1"
    assert len(transcript) == 2
    assert transcript.word_count() == 7
    assert transcript_to_record(transcript) == GOOD


def test_parse_accepts_json_text():
    import json

    assert parse_transcript(json.dumps(GOOD)).id == "visit-1"


def test_unknown_fields_tolerated_and_counted():
    record = dict(GOOD, session="am")
    record["utterances"] = [dict(u, confidence=0.9) for u in GOOD["utterances"]]
    warnings = FieldWarnings()
    parse_transcript(record, warnings=warnings)
    assert warnings.summary() == {"transcript.session": 1, "utterance.confidence": 2}


@pytest.mark.parametrize("missing", ["id", "utterances"])
def test_missing_required_field_rejected(missing):
    record = {k: v for k, v in GOOD.items() if k != missing}
    with pytest.raises(ParseError):
        parse_transcript(record)


def test_unknown_speaker_rejected():
    with pytest.raises(ValidationError, match="unknown speaker"):
        validate_transcript(
            Transcript("t", [Utterance("nurse", 0, "hello")])
        )


def test_timestamps_must_be_non_decreasing():
    transcript = Transcript(
        "t",
        [Utterance("patient", 500, "first"), Utterance("patient", 400, "second")],
    )
    with pytest.raises(ValidationError, match="start_ms decreases"):
        validate_transcript(transcript)


def test_equal_timestamps_allowed():
    validate_transcript(
        Transcript(
            "t",
            [Utterance("patient", 500, "a"), Utterance("physician", 500, "b")],
        )
    )


def test_negative_or_non_integer_timestamp_rejected():
    with pytest.raises(ValidationError):
        validate_transcript(Transcript("t", [Utterance("patient", -1, "a")]))
    with pytest.raises(ValidationError):
        validate_transcript(Transcript("t", [Utterance("patient", 1.5, "a")]))


def test_blank_text_rejected():
    with pytest.raises(ValidationError, match="empty text"):
        validate_transcript(Transcript("t", [Utterance("patient", 0, "   ")]))


def test_corpus_round_trip(tmp_path, small_corpus):
    path = tmp_path / "transcripts.jsonl"
    save_transcripts(path, small_corpus.transcripts)
    loaded = load_transcripts(path)
    assert loaded == small_corpus.transcripts


def test_duplicate_ids_rejected(tmp_path):
    path = tmp_path / "dup.jsonl"
    transcript = parse_transcript(GOOD)
    save_transcripts(path, [transcript, transcript])
    with pytest.raises(ValidationError, match="duplicate transcript id"):
        load_transcripts(path)


def test_malformed_line_reports_line_number(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"id": "a", "utterances": []}\nnot json\n')
    with pytest.raises(ParseError, match="line 2"):
        load_transcripts(path)


@st.composite
def transcripts(draw):
    text = st.text(
        alphabet="abcdefghij ", min_size=1, max_size=30
    ).filter(lambda s: s.strip())
    n = draw(st.integers(min_value=0, max_value=6))
    starts = sorted(draw(st.lists(st.integers(0, 10_000), min_size=n, max_size=n)))
    utterances = [
        Utterance(
            speaker=draw(st.sampled_from(["physician", "patient", "other"])),
            start_ms=start,
            text=draw(text),
        )
        for start in starts
    ]
    return Transcript(id=draw(st.text(min_size=1, max_size=8)), utterances=utterances)


@given(st.lists(transcripts(), min_size=0, max_size=5))
@settings(max_examples=50, deadline=None)
def test_save_load_is_identity(tmp_path_factory, items):
    for i, t in enumerate(items):  # guarantee unique ids
        t.id = f"{i}-{t.id}"
    path = tmp_path_factory.mktemp("roundtrip") / "corpus.jsonl"
    save_transcripts(path, items)
    assert load_transcripts(path) == items
