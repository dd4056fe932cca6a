"""Labeled mention datasets in the canonical JSON-lines layout.

One record per mention: ``id``, ``context``, ``surface``, ``span`` (char
offsets) and ``gold_types`` (type paths). Converters from other benchmark
layouts are expected to target this format.
"""

from __future__ import annotations

from dataclasses import dataclass

from .inference import Mention
from .jsonl import read_jsonl
from .ontology import TypeOntology, normalize_path


@dataclass(frozen=True)
class DatasetRecord:
    id: str
    context: str
    surface: str
    span: tuple[int, int]
    gold_types: tuple[str, ...]

    def mention(self) -> Mention:
        return Mention(context=self.context, surface=self.surface, span=self.span)

    @classmethod
    def from_record(cls, record: dict) -> "DatasetRecord":
        span = record.get("span")
        if not isinstance(span, (list, tuple)) or len(span) != 2:
            raise ValueError(f"record {record.get('id')!r}: span must be [start, end]")
        gold = tuple(normalize_path(p) for p in record.get("gold_types", ()))
        if not gold:
            raise ValueError(f"record {record.get('id')!r}: gold_types must be non-empty")
        rec = cls(
            id=str(record["id"]),
            context=record["context"],
            surface=record["surface"],
            span=(int(span[0]), int(span[1])),
            gold_types=gold,
        )
        rec.mention()  # validates span/surface consistency
        return rec


def load_dataset(path) -> list[DatasetRecord]:
    records = [DatasetRecord.from_record(r) for r in read_jsonl(path)]
    seen = set()
    for rec in records:
        if rec.id in seen:
            raise ValueError(f"duplicate mention id {rec.id!r}")
        seen.add(rec.id)
    return records


def unmapped_gold_types(records, ontology: TypeOntology) -> list[str]:
    """Gold paths that do not resolve against the loaded ontology, sorted."""
    missing = {
        path
        for rec in records
        for path in rec.gold_types
        if path not in ontology
    }
    return sorted(missing)
