"""Type assignment for mentions by recursive entailment scoring.

Starting from the depth-1 types, the typer scores every candidate child
with the entailment model (premise = context, hypothesis = "<surface> is a
<type name>", topics = context keywords) and follows the argmax child while
its entailment probability clears the descent threshold. A flat mode scores
all ontology nodes in one pass instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from sklearn.base import BaseEstimator

from ._validation import check_count, check_nonempty_str, check_open_unit
from .nli_data import render_hypothesis
from .ontology import TypeOntology, name_from_segment, path_closure
from .text import rank_terms

COARSE_TO_FINE = "coarse_to_fine"
FLAT = "flat"


@dataclass(frozen=True)
class Mention:
    """An entity mention inside its sentence context."""

    context: str
    surface: str
    span: tuple[int, int]

    def __post_init__(self):
        check_nonempty_str(self.context, "context")
        check_nonempty_str(self.surface, "surface")
        start, end = self.span
        if self.context[start:end] != self.surface:
            raise ValueError(
                f"span {self.span} of context does not match surface {self.surface!r}"
            )


@dataclass(frozen=True)
class TypePrediction:
    """Chosen type path plus the entailment score at each visited level."""

    path: str
    level_scores: tuple[tuple[str, float], ...]
    mode: str

    def type_set(self) -> set[str]:
        """Full root-to-node path set used for evaluation."""
        return path_closure(self.path)

    def to_record(self) -> dict:
        return {
            "path": self.path,
            "level_scores": [[p, s] for p, s in self.level_scores],
            "mode": self.mode,
        }


def extract_keywords(
    context: str,
    k: int,
    background: Mapping[str, float] | None = None,
) -> list[str]:
    """Top-``k`` context terms by tf-idf; test-time stand-in for topics."""
    check_count(k, "k")
    return rank_terms(context, k, background)


def _candidate_name(path: str, ontology: TypeOntology | None) -> str:
    if ontology is not None and path in ontology:
        return ontology.name(path)
    return name_from_segment(path.rsplit("/", 1)[1])


def score_children(
    model,
    mention: Mention,
    candidates: Sequence[str],
    keywords: Sequence[str],
    ontology: TypeOntology | None = None,
) -> list[tuple[str, float]]:
    """Entailment probability per candidate type, in candidate order."""
    if not candidates:
        raise ValueError("candidates must be non-empty")
    X = [
        (
            mention.context,
            render_hypothesis(mention.surface, _candidate_name(path, ontology)),
            tuple(keywords),
        )
        for path in candidates
    ]
    proba = model.predict_proba(X)
    return [(path, float(proba[i, 0])) for i, path in enumerate(candidates)]


def _mention_keywords(mention, k_keywords, background, use_topics):
    if not use_topics:
        return []
    return extract_keywords(mention.context, k_keywords, background)


def type_mention(
    model,
    ontology: TypeOntology,
    mention: Mention,
    threshold: float = 0.5,
    k_keywords: int = 5,
    background: Mapping[str, float] | None = None,
    use_topics: bool = True,
) -> TypePrediction:
    """Coarse-to-fine descent; always returns at least the depth-1 argmax."""
    if len(ontology) == 0:
        raise ValueError("ontology is empty")
    check_open_unit(threshold, "threshold")
    keywords = _mention_keywords(mention, k_keywords, background, use_topics)

    trace: list[tuple[str, float]] = []
    candidates = list(ontology.roots)
    current = None
    while candidates:
        scored = score_children(model, mention, candidates, keywords, ontology)
        best_path, best_score = max(scored, key=lambda item: item[1])
        # max() keeps the earliest (document-order) candidate on ties
        if current is None:
            trace.append((best_path, best_score))
            current = best_path
            if best_score < threshold:
                break
        elif best_score >= threshold:
            trace.append((best_path, best_score))
            current = best_path
        else:
            break
        candidates = list(ontology.children(current))
    return TypePrediction(path=current, level_scores=tuple(trace), mode=COARSE_TO_FINE)


def type_mention_flat(
    model,
    ontology: TypeOntology,
    mention: Mention,
    k_keywords: int = 5,
    background: Mapping[str, float] | None = None,
    use_topics: bool = True,
) -> TypePrediction:
    """Single-pass argmax over every ontology node (ablation mode)."""
    if len(ontology) == 0:
        raise ValueError("ontology is empty")
    keywords = _mention_keywords(mention, k_keywords, background, use_topics)
    scored = score_children(model, mention, list(ontology.paths()), keywords, ontology)
    best_path, best_score = max(scored, key=lambda item: item[1])
    return TypePrediction(
        path=best_path, level_scores=((best_path, best_score),), mode=FLAT
    )


class OntologyTyper(BaseEstimator):
    """Batch predictor wrapping a trained model and a type ontology.

    Follows the estimator convention: construction stores configuration,
    ``predict`` maps mentions to :class:`TypePrediction`.
    """

    def __init__(
        self,
        model=None,
        ontology: TypeOntology | None = None,
        threshold: float = 0.5,
        k_keywords: int = 5,
        background: Mapping[str, float] | None = None,
        flat: bool = False,
        use_topics: bool = True,
    ):
        self.model = model
        self.ontology = ontology
        self.threshold = threshold
        self.k_keywords = k_keywords
        self.background = background
        self.flat = flat
        self.use_topics = use_topics

    def _check_ready(self):
        if self.model is None or self.ontology is None:
            raise ValueError("OntologyTyper requires both a model and an ontology")

    def predict_mention(self, mention: Mention) -> TypePrediction:
        self._check_ready()
        if self.flat:
            return type_mention_flat(
                self.model,
                self.ontology,
                mention,
                k_keywords=self.k_keywords,
                background=self.background,
                use_topics=self.use_topics,
            )
        return type_mention(
            self.model,
            self.ontology,
            mention,
            threshold=self.threshold,
            k_keywords=self.k_keywords,
            background=self.background,
            use_topics=self.use_topics,
        )

    def predict(self, mentions: Sequence[Mention]) -> list[TypePrediction]:
        return [self.predict_mention(m) for m in mentions]
