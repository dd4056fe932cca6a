"""Error categorization for evaluated predictions.

Erroneous mentions (predicted type set != gold set) land in one of three
buckets: the predicted path is a proper ancestor of some gold path
(stopped too coarse), a proper descendant of some gold path (went finer
than the annotation; often debatable rather than wrong), or neither
(disjoint). Mentions whose surface sits strictly inside a longer
capitalized span of the context are flagged as possible nesting cases.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

from .inference import Mention, TypePrediction
from .metrics import EvalPair

TOO_COARSE = "too_coarse"
FINER_THAN_GOLD = "finer_than_gold"
DISJOINT = "disjoint"

_CAP_SPAN = re.compile(r"[A-Z][\w'.-]*(?:\s+[A-Z][\w'.-]*)*")


def _is_proper_ancestor(anc: str, path: str) -> bool:
    return path.startswith(anc + "/")


@dataclass
class ErrorReport:
    total: int = 0
    errors: int = 0
    counts: dict = field(default_factory=lambda: {TOO_COARSE: 0, FINER_THAN_GOLD: 0, DISJOINT: 0})
    exemplars: dict = field(default_factory=lambda: {TOO_COARSE: [], FINER_THAN_GOLD: [], DISJOINT: []})
    possible_nesting: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "errors": self.errors,
            "counts": dict(self.counts),
            "exemplars": {k: list(v) for k, v in self.exemplars.items()},
            "possible_nesting": list(self.possible_nesting),
        }


def categorize(gold: frozenset, predicted_path: str) -> str:
    if any(_is_proper_ancestor(predicted_path, g) for g in gold):
        return TOO_COARSE
    if any(_is_proper_ancestor(g, predicted_path) for g in gold):
        return FINER_THAN_GOLD
    return DISJOINT


def has_nested_capitalized_span(mention: Mention) -> bool:
    """True when the surface is a strict substring of a longer capitalized span."""
    for match in _CAP_SPAN.finditer(mention.context):
        span = match.group(0)
        if mention.surface in span and len(span) > len(mention.surface):
            return True
    return False


def error_report(
    pairs: Sequence[EvalPair],
    predictions: Sequence[TypePrediction],
    mentions: Sequence[Mention] | None = None,
    ids: Sequence[str] | None = None,
    exemplars_per_bucket: int = 5,
) -> ErrorReport:
    """Bucket erroneous mentions; inputs must be aligned index-wise."""
    if len(pairs) != len(predictions):
        raise ValueError("pairs and predictions must be aligned")
    if mentions is not None and len(mentions) != len(pairs):
        raise ValueError("mentions must align with pairs")
    ids = list(ids) if ids is not None else [str(i) for i in range(len(pairs))]
    if len(ids) != len(pairs):
        raise ValueError("ids must align with pairs")

    report = ErrorReport(total=len(pairs))
    for i, (pair, pred) in enumerate(zip(pairs, predictions)):
        if mentions is not None and has_nested_capitalized_span(mentions[i]):
            report.possible_nesting.append(ids[i])
        if pair.predicted == pair.gold:
            continue
        report.errors += 1
        bucket = categorize(pair.gold, pred.path)
        report.counts[bucket] += 1
        if len(report.exemplars[bucket]) < exemplars_per_bucket:
            report.exemplars[bucket].append(
                {"id": ids[i], "predicted": pred.path, "gold": sorted(pair.gold)}
            )
    return report


def render_error_report(report: ErrorReport) -> str:
    lines = [
        f"mentions evaluated : {report.total}",
        f"erroneous          : {report.errors}",
        f"  too coarse       : {report.counts[TOO_COARSE]}",
        f"  finer than gold  : {report.counts[FINER_THAN_GOLD]}",
        f"  disjoint         : {report.counts[DISJOINT]}",
        f"possible nesting   : {len(report.possible_nesting)}",
    ]
    for bucket in (TOO_COARSE, FINER_THAN_GOLD, DISJOINT):
        for ex in report.exemplars[bucket]:
            lines.append(f"  [{bucket}] {ex['id']}: predicted {ex['predicted']} vs gold {','.join(ex['gold'])}")
    return "\n".join(lines)
