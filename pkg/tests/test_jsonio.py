"""JSONL helpers, atomic writes, and digests."""

from __future__ import annotations

import json

import pytest

from clinconv import ParseError
from clinconv.jsonio import (
    atomic_write_text,
    dump_json,
    iter_jsonl,
    sha256_file,
    sha256_text,
    write_jsonl,
)


def test_write_then_iter_round_trip(tmp_path):
    path = tmp_path / "rows.jsonl"
    rows = [{"a": 1}, {"b": [1, 2]}, "bare string"]
    write_jsonl(path, rows)
    assert [record for _, record in iter_jsonl(path)] == rows
    assert [number for number, _ in iter_jsonl(path)] == [1, 2, 3]


def test_iter_jsonl_skips_blank_lines(tmp_path):
    path = tmp_path / "gaps.jsonl"
    path.write_text('{"a": 1}\n\n{"b": 2}\n')
    assert [(n, r) for n, r in iter_jsonl(path)] == [(1, {"a": 1}), (3, {"b": 2})]


def test_iter_jsonl_reports_offending_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"ok": true}\n{broken\n')
    with pytest.raises(ParseError, match="line 2"):
        list(iter_jsonl(path))


def test_dump_json_is_compact_and_order_preserving():
    text = dump_json({"b": 1, "a": [1.5, None]})
    assert text == '{"b":1,"a":[1.5,null]}'


def test_atomic_write_replaces_content(tmp_path):
    path = tmp_path / "out.txt"
    atomic_write_text(path, "first\n")
    atomic_write_text(path, "second\n")
    assert path.read_text() == "second\n"
    assert list(tmp_path.iterdir()) == [path]  # no temp files left behind


def test_sha256_helpers_agree(tmp_path):
    path = tmp_path / "data.bin"
    path.write_text("payload")
    assert sha256_file(path) == sha256_text("payload")
    assert len(sha256_file(path)) == 64
