"""Strict accuracy and macro/micro precision, recall, F1 over type sets.

A prediction and its gold annotation are both sets of type paths; paths are
normalized (lowercase, single leading slash) before comparison so results
are bit-comparable across pipelines.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Iterable, Sequence

from .ontology import normalize_path


@dataclass(frozen=True)
class EvalPair:
    """Gold and predicted type-path sets for one mention."""

    gold: frozenset
    predicted: frozenset

    @classmethod
    def from_paths(cls, gold: Iterable[str], predicted: Iterable[str]) -> "EvalPair":
        gold_set = frozenset(normalize_path(p) for p in gold)
        if not gold_set:
            raise ValueError("gold type set must be non-empty")
        return cls(gold=gold_set, predicted=frozenset(normalize_path(p) for p in predicted))


@dataclass(frozen=True)
class MetricsReport:
    strict_accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    micro_precision: float
    micro_recall: float
    micro_f1: float

    def to_dict(self) -> dict:
        return asdict(self)


def _require_pairs(pairs: Sequence[EvalPair]) -> Sequence[EvalPair]:
    if not pairs:
        raise ValueError("pairs must be non-empty")
    return pairs


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def strict_accuracy(pairs: Sequence[EvalPair]) -> float:
    """Fraction of pairs whose predicted set equals the gold set exactly."""
    _require_pairs(pairs)
    hits = sum(1 for pair in pairs if pair.gold == pair.predicted)
    return hits / len(pairs)


def macro_f1(pairs: Sequence[EvalPair]) -> tuple[float, float, float]:
    """Mention-averaged precision and recall; F1 is their harmonic mean.

    A pair with an empty prediction set contributes 0 to the precision mean.
    """
    _require_pairs(pairs)
    precision = sum(
        len(p.gold & p.predicted) / len(p.predicted) if p.predicted else 0.0
        for p in pairs
    ) / len(pairs)
    recall = sum(len(p.gold & p.predicted) / len(p.gold) for p in pairs) / len(pairs)
    return precision, recall, _f1(precision, recall)


def micro_f1(pairs: Sequence[EvalPair]) -> tuple[float, float, float]:
    """Globally summed precision and recall; F1 is their harmonic mean."""
    _require_pairs(pairs)
    overlap = sum(len(p.gold & p.predicted) for p in pairs)
    n_pred = sum(len(p.predicted) for p in pairs)
    n_gold = sum(len(p.gold) for p in pairs)
    precision = overlap / n_pred if n_pred else 0.0
    recall = overlap / n_gold
    return precision, recall, _f1(precision, recall)


def evaluate(pairs: Sequence[EvalPair]) -> MetricsReport:
    """All metrics in one report; values agree with the individual functions."""
    _require_pairs(pairs)
    ma_p, ma_r, ma_f = macro_f1(pairs)
    mi_p, mi_r, mi_f = micro_f1(pairs)
    return MetricsReport(
        strict_accuracy=strict_accuracy(pairs),
        macro_precision=ma_p,
        macro_recall=ma_r,
        macro_f1=ma_f,
        micro_precision=mi_p,
        micro_recall=mi_r,
        micro_f1=mi_f,
    )
