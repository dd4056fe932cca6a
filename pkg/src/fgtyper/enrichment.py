"""Automatic per-type enrichment with instance strings and topic terms.

Instance seeds come from QA-style extraction over retrieved sentences and
are grown by an instance expander; topic terms come from a topic miner over
retrieved documents. All four backends are pluggable protocols so that real
retrieval / QA / expansion / topic-mining services can be swapped in; the
baselines here are deterministic and run fully offline.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Protocol, Sequence

import numpy as np

from ._validation import check_count, check_nonempty_str
from .ontology import Enrichment, TypeOntology
from .text import STOPWORDS, rank_terms, tokenize

QA_TEMPLATE = "[CLS]What is the instance of {type} in this sentence?[SEP]{sentence}[SEP]"
MAX_ANSWER_TOKENS = 10


class BackendError(RuntimeError):
    """An enrichment backend failed; carries the originating type context."""


class CorpusRetriever(Protocol):
    def retrieve(self, query: str, k: int) -> list[str]: ...


class QAExtractor(Protocol):
    def answer(self, question: str, context: str) -> str | None: ...


class InstanceExpander(Protocol):
    def expand(self, seeds: Sequence[str], corpus: "CorpusRetriever", target_count: int) -> list[str]: ...


class TopicMiner(Protocol):
    def mine(self, query: str, documents: Sequence[str], k: int) -> list[str]: ...


def build_qa_query(type_name: str, sentence: str) -> str:
    """The extraction prompt for one retrieved sentence."""
    check_nonempty_str(type_name, "type_name")
    check_nonempty_str(sentence, "sentence")
    return QA_TEMPLATE.format(type=type_name, sentence=sentence)


def collect_seeds(
    type_path: str,
    ontology: TypeOntology,
    retriever: CorpusRetriever,
    qa: QAExtractor,
    n: int,
    docs: int = 20,
) -> list[str]:
    """Up to ``n`` distinct instance seeds for a type, in retrieval order.

    Every retrieved sentence is queried once; empty answers, answers longer
    than ``MAX_ANSWER_TOKENS`` tokens, and case-insensitive duplicates are
    skipped. Backend errors are re-raised with the type attached.
    """
    check_count(n, "n")
    name = ontology.name(type_path)
    try:
        sentences = retriever.retrieve(name, docs)
    except Exception as exc:
        raise BackendError(f"retrieval failed for type {type_path}") from exc

    seeds: list[str] = []
    seen: set[str] = set()
    for sentence in sentences:
        if len(seeds) >= n:
            break
        question = build_qa_query(name, sentence)
        try:
            answer = qa.answer(question, sentence)
        except Exception as exc:
            raise BackendError(f"QA extraction failed for type {type_path}") from exc
        if not answer or not answer.strip():
            continue
        answer = answer.strip()
        if len(answer.split()) > MAX_ANSWER_TOKENS:
            continue
        key = answer.lower()
        if key in seen:
            continue
        seen.add(key)
        seeds.append(answer)
    return seeds


@dataclass
class EnrichmentFailure:
    path: str
    stage: str
    message: str


@dataclass
class EnrichmentReport:
    failures: list[EnrichmentFailure] = field(default_factory=list)


def enrich_ontology(
    ontology: TypeOntology,
    retriever: CorpusRetriever,
    qa: QAExtractor,
    expander: InstanceExpander,
    miner: TopicMiner,
    instances_per_type: int = 30,
    topics_per_type: int = 5,
    docs_per_type: int = 20,
    seeds_per_type: int = 5,
) -> tuple[Enrichment, EnrichmentReport]:
    """Instance and topic enrichment for every ontology node.

    A backend failure on one node is recorded in the report and enrichment
    continues with the remaining nodes. Types may end up with fewer than
    ``instances_per_type`` instances when the corpus offers no more.
    """
    check_count(instances_per_type, "instances_per_type")
    check_count(topics_per_type, "topics_per_type")
    check_count(docs_per_type, "docs_per_type")
    check_count(seeds_per_type, "seeds_per_type")
    seeds_per_type = min(seeds_per_type, instances_per_type)

    instances: dict[str, tuple[str, ...]] = {}
    topics: dict[str, tuple[str, ...]] = {}
    report = EnrichmentReport()
    for path in ontology.paths():
        name = ontology.name(path)
        try:
            docs = retriever.retrieve(name, docs_per_type)
            topics[path] = tuple(_dedup(miner.mine(name, docs, topics_per_type)))
        except Exception as exc:
            report.failures.append(EnrichmentFailure(path, "topics", str(exc)))
            topics[path] = ()
        try:
            seeds = collect_seeds(path, ontology, retriever, qa, seeds_per_type, docs=docs_per_type)
            expanded = expander.expand(seeds, retriever, instances_per_type) if seeds else []
            instances[path] = tuple(_dedup_casefold(expanded)[:instances_per_type])
        except Exception as exc:
            report.failures.append(EnrichmentFailure(path, "instances", str(exc)))
            instances[path] = ()
    return Enrichment(instances=instances, topics=topics), report


def _dedup(items: Sequence[str]) -> list[str]:
    seen = set()
    out = []
    for item in items:
        if item not in seen:
            seen.add(item)
            out.append(item)
    return out


def _dedup_casefold(items: Sequence[str]) -> list[str]:
    seen = set()
    out = []
    for item in items:
        key = item.lower()
        if item.strip() and key not in seen:
            seen.add(key)
            out.append(item)
    return out


# -- retrieval backends --------------------------------------------------------


class HttpSearchRetriever:
    """Adapter for an external full-text search service.

    POSTs ``{"index": ..., "query": ..., "size": k}`` as JSON to the
    configured endpoint and expects ``{"hits": [{"text": ...}, ...]}``
    back. Configure via the ``enrichment.retriever`` config section
    (endpoint URL plus index name).
    """

    def __init__(self, endpoint: str, index: str, timeout: float = 10.0):
        check_nonempty_str(endpoint, "endpoint")
        check_nonempty_str(index, "index")
        self.endpoint = endpoint
        self.index = index
        self.timeout = timeout

    def retrieve(self, query: str, k: int) -> list[str]:
        import json
        import urllib.request

        payload = json.dumps({"index": self.index, "query": query, "size": k}).encode("utf-8")
        request = urllib.request.Request(
            self.endpoint, data=payload, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                body = json.loads(response.read().decode("utf-8"))
        except Exception as exc:
            raise BackendError(f"search service at {self.endpoint} failed") from exc
        hits = body.get("hits", [])
        return [str(hit["text"]) for hit in hits[:k] if "text" in hit]


class InMemoryCorpusRetriever:
    """Rank an in-memory document list by query-token occurrence counts."""

    def __init__(self, documents: Sequence[str]):
        self._documents = list(documents)

    @classmethod
    def from_directory(cls, directory) -> "InMemoryCorpusRetriever":
        """One document per ``*.txt`` file, in sorted filename order."""
        directory = Path(directory)
        docs = [
            path.read_text(encoding="utf-8").strip()
            for path in sorted(directory.glob("*.txt"))
        ]
        return cls([d for d in docs if d])

    def retrieve(self, query: str, k: int) -> list[str]:
        terms = [t for t in tokenize(query) if t not in STOPWORDS] or tokenize(query)
        scored = []
        for pos, doc in enumerate(self._documents):
            toks = tokenize(doc)
            score = sum(toks.count(term) for term in terms)
            if score > 0:
                scored.append((-score, pos, doc))
        scored.sort()
        return [doc for _, _, doc in scored[:k]]


class PatternQAExtractor:
    """Copula-pattern answer extraction for instance-of questions.

    Finds a capitalized span followed by ``is/was/are/were a|an|the ...``
    and the queried type word later in the sentence. A deterministic
    stand-in for an extractive QA model; returns None when the pattern
    does not apply.
    """

    _SPAN = r"(?P<span>[A-Z][\w'.-]*(?:\s+(?:[A-Z][\w'.-]*|of|the|de|da|van|von))*)"

    def answer(self, question: str, context: str) -> str | None:
        type_name = self._type_from_question(question)
        if not type_name:
            return None
        head = type_name.split()[-1]
        pattern = re.compile(
            self._SPAN + r"\s+(?:is|was|are|were)\s+(?:a|an|the)\b[^.]*?\b"
            + re.escape(head) + r"\b",
            re.IGNORECASE,
        )
        for match in pattern.finditer(context):
            span = match.group("span").strip()
            if span and span[0].isupper():
                if context.find(span) >= 0:
                    return span
        return None

    @staticmethod
    def _type_from_question(question: str) -> str | None:
        m = re.search(r"instance of (.+?) in this sentence", question)
        return m.group(1).strip() if m else None


class IdentityExpander:
    """No-op expansion: the seeds themselves, capped at the target count."""

    def expand(self, seeds, corpus, target_count):
        return list(seeds)[:target_count]


class EmbeddingInstanceExpander:
    """Nearest neighbors of the seed centroid in a static embedding table.

    Candidates are ranked by cosine similarity to the centroid of the seed
    vectors; ties break lexicographically. Seeds without embeddings still
    appear in the output but do not influence the centroid.
    """

    def __init__(self, table: Mapping[str, Sequence[float]]):
        self._table = {term: np.asarray(vec, dtype=float) for term, vec in table.items()}

    def expand(self, seeds, corpus, target_count):
        out = list(seeds)[:target_count]
        have = {s.lower() for s in out}
        vectors = [self._table[s.lower()] for s in out if s.lower() in self._table]
        if not vectors or len(out) >= target_count:
            return out
        centroid = np.mean(vectors, axis=0)
        norm_c = np.linalg.norm(centroid)
        if norm_c == 0:
            return out
        scored = []
        for term, vec in self._table.items():
            if term.lower() in have:
                continue
            norm_v = np.linalg.norm(vec)
            if norm_v == 0:
                continue
            cosine = float(centroid @ vec / (norm_c * norm_v))
            scored.append((-cosine, term))
        scored.sort()
        for _, term in scored:
            if len(out) >= target_count:
                break
            out.append(term)
        return out


class TfidfTopicMiner:
    """Top-k unigrams/bigrams of the retrieved documents by tf-idf.

    Stopwords and the query term itself are excluded; the background
    frequency table supplies document frequencies.
    """

    def __init__(self, background: Mapping[str, float] | None = None):
        self._background = dict(background or {})

    def mine(self, query, documents, k):
        if not documents:
            return []
        text = "\n".join(documents)
        return rank_terms(text, k, self._background, exclude=[query])
