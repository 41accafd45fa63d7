"""Small JSON/JSONL helpers used by the data model and the CLI."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from collections import Counter
from collections.abc import Iterable, Iterator
from pathlib import Path
from typing import Any

from .errors import ParseError


class FieldWarnings:
    """Counter for tolerated irregularities (unknown fields) seen while parsing.

    Unknown fields are ignored rather than rejected so that corpora exported
    with extra metadata still load, but each occurrence is counted so callers
    can surface the fact.
    """

    def __init__(self) -> None:
        self.counts: Counter[str] = Counter()

    def note(self, where: str, field: str) -> None:
        self.counts[f"{where}.{field}"] += 1

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def summary(self) -> dict[str, int]:
        return dict(sorted(self.counts.items()))


def json_loads(text: str | bytes, line_number: int | None = None) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc.msg}", line_number) from exc


def iter_jsonl(path: str | Path) -> Iterator[tuple[int, Any]]:
    """Yield (line_number, parsed_object) for every non-blank line."""
    with open(path, "rb") as handle:
        for line_number, raw in enumerate(handle, start=1):
            if not raw.strip():
                continue
            yield line_number, json_loads(raw, line_number)


def dump_json(obj: Any) -> str:
    # Compact separators keep artifact files diff-friendly and byte-stable.
    return json.dumps(obj, ensure_ascii=False, sort_keys=False, separators=(",", ":"))


def write_jsonl(path: str | Path, records: Iterable[Any]) -> None:
    atomic_write_text(path, "".join(dump_json(rec) + "\n" for rec in records))


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a temp file and rename so failed runs leave no partial output."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
