"""Premise/hypothesis training examples derived from generated sentences.

Each generated sentence becomes one entailment example for its own type,
plus neutral examples against ancestor types and contradiction examples
against types from other branches, with topic terms attached per label.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._validation import check_nonempty_str
from .generation import GeneratedSample, derive_seed
from .ontology import Enrichment, TypeOntology

ENTAILMENT = "entailment"
NEUTRAL = "neutral"
CONTRADICTION = "contradiction"
LABELS = (ENTAILMENT, NEUTRAL, CONTRADICTION)

_VOWELS = "aeiou"


def render_hypothesis(instance: str, type_name: str) -> str:
    """``"<instance> is a <type name>"`` with a/an picked by first letter."""
    check_nonempty_str(instance, "instance")
    check_nonempty_str(type_name, "type_name")
    article = "an" if type_name.strip()[0].lower() in _VOWELS else "a"
    return f"{instance} is {article} {type_name}"


@dataclass(frozen=True)
class NLIExample:
    premise: str
    hypothesis: str
    topics: tuple[str, ...]
    label: str
    source_type: str
    hypothesis_type: str
    instance: str

    def to_record(self) -> dict:
        return {
            "premise": self.premise,
            "hypothesis": self.hypothesis,
            "topics": list(self.topics),
            "label": self.label,
            "source_type": self.source_type,
            "hypothesis_type": self.hypothesis_type,
            "instance": self.instance,
        }

    @classmethod
    def from_record(cls, record: dict) -> "NLIExample":
        return cls(
            premise=record["premise"],
            hypothesis=record["hypothesis"],
            topics=tuple(record.get("topics", ())),
            label=record["label"],
            source_type=record["source_type"],
            hypothesis_type=record["hypothesis_type"],
            instance=record["instance"],
        )


def _choose(rng: np.random.Generator, candidates: Sequence[str], n: int) -> list[str]:
    if n <= 0 or not candidates:
        return []
    n = min(n, len(candidates))
    picked = rng.choice(len(candidates), size=n, replace=False)
    return [candidates[i] for i in sorted(picked)]


def build_examples(
    samples: Sequence[GeneratedSample],
    ontology: TypeOntology,
    enrichment: Enrichment,
    n_neutral: int = 1,
    n_contradiction: int = 1,
    include_siblings: bool = False,
    rng_seed: int = 0,
    attach_topics: bool = True,
    contradiction_topics: str = "hypothesis",
) -> list[NLIExample]:
    """Emit labeled examples for every sample, deterministically per seed.

    Per sample: exactly one entailment example, then up to ``n_neutral``
    neutral and ``n_contradiction`` contradiction examples with hypothesis
    types drawn uniformly without replacement from the sample type's
    contrast sets. Entailment and neutral examples carry the source type's
    topics; contradiction examples carry the hypothesis type's topics so
    the gate sees topic/type mismatch signals. Set ``contradiction_topics``
    to "source" to attach the source type's topics to contradictions
    instead, which mirrors prediction-time inputs where every candidate
    hypothesis is paired with keywords from the mention context. With
    ``attach_topics`` off, all topic lists are empty.
    """
    if contradiction_topics not in ("source", "hypothesis"):
        raise ValueError("contradiction_topics must be 'source' or 'hypothesis'")
    examples: list[NLIExample] = []
    for idx, sample in enumerate(samples):
        sets = ontology.contrast_sets(sample.type_path, include_siblings=include_siblings)
        rng = np.random.default_rng(derive_seed(rng_seed, "nli", idx, sample.type_path))

        def topics_for(path: str) -> tuple[str, ...]:
            if not attach_topics:
                return ()
            return enrichment.topics_for(path)

        def emit(hyp_path: str, label: str) -> None:
            if label == CONTRADICTION and contradiction_topics == "hypothesis":
                topic_key = hyp_path
            else:
                topic_key = sample.type_path
            examples.append(
                NLIExample(
                    premise=sample.text,
                    hypothesis=render_hypothesis(sample.instance, ontology.name(hyp_path)),
                    topics=topics_for(topic_key),
                    label=label,
                    source_type=sample.type_path,
                    hypothesis_type=hyp_path,
                    instance=sample.instance,
                )
            )

        emit(sample.type_path, ENTAILMENT)
        for hyp in _choose(rng, sets.neutral, n_neutral):
            emit(hyp, NEUTRAL)
        for hyp in _choose(rng, sets.contradiction, n_contradiction):
            emit(hyp, CONTRADICTION)
    return examples


def to_xy(examples: Sequence[NLIExample]) -> tuple[list[tuple[str, str, tuple[str, ...]]], list[str]]:
    """Split examples into classifier inputs and label strings."""
    X = [(ex.premise, ex.hypothesis, ex.topics) for ex in examples]
    y = [ex.label for ex in examples]
    return X, y
