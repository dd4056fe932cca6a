"""Word tokenization and tf-idf style term ranking.

Used both when mining topic terms for ontology nodes and when
approximating topics with context keywords at prediction time.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from typing import Iterable, Mapping

_WORD_RE = re.compile(r"[a-z0-9][a-z0-9'_-]*")

# Compact function-word list; enough to keep templated sentences and
# generic glue out of keyword rankings.
STOPWORDS = frozenset(
    """
    a an and are as at be been but by for from had has have he her his i if in
    into is it its of on or s she so that the their them they this to was we
    were what when where which who will with you your not no onto under over
    after before during than then there these those such very can could would
    should may might must do does did also both each
    """.split()
)


def tokenize(text: str) -> list[str]:
    """Lowercase word tokens of ``text`` (alphanumeric runs, keeps ' _ -)."""
    return _WORD_RE.findall(text.lower())


def candidate_terms(tokens: list[str]) -> list[str]:
    """Unigram and bigram terms in first-occurrence order, stopwords excluded.

    A bigram is excluded when either component is a stopword.
    """
    seen = set()
    terms = []
    for i, tok in enumerate(tokens):
        if tok not in STOPWORDS and tok not in seen:
            seen.add(tok)
            terms.append(tok)
        if i + 1 < len(tokens):
            nxt = tokens[i + 1]
            if tok in STOPWORDS or nxt in STOPWORDS:
                continue
            bigram = f"{tok} {nxt}"
            if bigram not in seen:
                seen.add(bigram)
                terms.append(bigram)
    return terms


def term_counts(tokens: list[str]) -> Counter:
    """Counts of unigram and bigram terms (stopword rules as above)."""
    counts: Counter = Counter()
    for i, tok in enumerate(tokens):
        if tok not in STOPWORDS:
            counts[tok] += 1
        if i + 1 < len(tokens):
            nxt = tokens[i + 1]
            if tok in STOPWORDS or nxt in STOPWORDS:
                continue
            counts[f"{tok} {nxt}"] += 1
    return counts


def idf(term: str, background: Mapping[str, float]) -> float:
    """Inverse background frequency: ln((1 + N) / (1 + count(term))).

    ``background`` maps terms to corpus frequencies; N is their total mass.
    Terms absent from the table get the maximal score.
    """
    total = sum(background.values()) if background else 0.0
    return math.log((1.0 + total) / (1.0 + background.get(term, 0.0)))


def rank_terms(
    text: str,
    k: int,
    background: Mapping[str, float] | None = None,
    exclude: Iterable[str] = (),
) -> list[str]:
    """Top-``k`` unigram/bigram terms of ``text`` by tf-idf.

    Scores are term frequency in ``text`` times idf against ``background``.
    Ties break deterministically by first occurrence in the text. Terms in
    ``exclude`` (compared lowercase) are skipped.
    """
    background = background or {}
    tokens = tokenize(text)
    counts = term_counts(tokens)
    order = candidate_terms(tokens)
    excluded = {term.lower() for term in exclude}
    scored = [
        (-counts[term] * idf(term, background), pos, term)
        for pos, term in enumerate(order)
        if term not in excluded
    ]
    scored.sort()
    return [term for _, _, term in scored[:k]]


def load_background(path) -> dict[str, float]:
    """Load a background term-frequency table from a JSON object file."""
    with open(path, encoding="utf-8") as fh:
        table = json.load(fh)
    if not isinstance(table, dict):
        raise ValueError(f"background table {path} must be a JSON object")
    return {str(term): float(freq) for term, freq in table.items()}
