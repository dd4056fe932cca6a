"""Canonical JSON / JSON-lines serialization for all artifact files.

Every artifact is written through :func:`dumps_canonical` so that repeated
runs with identical inputs produce byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable


def dumps_canonical(obj: Any) -> str:
    """Serialize with sorted keys and no whitespace variation."""
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def write_jsonl(path, records: Iterable[dict]) -> int:
    """Write one canonical JSON object per line; returns the record count."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(dumps_canonical(record))
            fh.write("\n")
            n += 1
    return n


def read_jsonl(path) -> list[dict]:
    """Read a JSON-lines file, skipping blank lines."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON record: {exc}") from exc
    return records


def write_json(path, obj: Any) -> None:
    """Write a single canonical JSON document (with trailing newline)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_canonical(obj))
        fh.write("\n")


def read_json(path) -> Any:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
