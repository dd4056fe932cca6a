"""Type ontology: a forest of slash-path type nodes plus per-node enrichment.

Paths look like ``/person/artist``. A node's parent is the path prefix one
segment shorter, so the structure is validated purely from the path set.
Both :class:`TypeOntology` and :class:`Enrichment` are immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .jsonl import read_jsonl, write_jsonl

_SEGMENT_RE = re.compile(r"^[^/\s]+$")


class OntologyError(ValueError):
    """Raised for malformed ontology or enrichment documents."""


def normalize_path(path: str) -> str:
    """Lowercase a type path and enforce ``/seg/seg`` shape."""
    if not isinstance(path, str) or not path.strip():
        raise OntologyError(f"type path must be a non-empty string, got {path!r}")
    segments = [seg for seg in path.strip().lower().split("/") if seg]
    if not segments:
        raise OntologyError(f"type path {path!r} has no segments")
    for seg in segments:
        if not _SEGMENT_RE.match(seg):
            raise OntologyError(f"invalid path segment {seg!r} in {path!r}")
    return "/" + "/".join(segments)


def path_depth(path: str) -> int:
    return path.count("/")


def path_parent(path: str) -> str | None:
    """Parent path, or None for depth-1 paths."""
    head, _, _ = path.rpartition("/")
    return head or None


def path_closure(path: str) -> set[str]:
    """The path together with all its proper ancestors."""
    closure = set()
    while path:
        closure.add(path)
        path = path_parent(path)
    return closure


def name_from_segment(segment: str) -> str:
    return segment.replace("_", " ").strip().lower()


@dataclass(frozen=True)
class TypeNode:
    """One entity type in the ontology."""

    path: str
    name: str
    parent: str | None
    children: tuple[str, ...] = ()


class TypeOntology:
    """Validated forest of :class:`TypeNode`, keyed by path in document order."""

    def __init__(self, nodes: Mapping[str, TypeNode], roots: Sequence[str]):
        self._nodes = dict(nodes)
        self._roots = tuple(roots)

    @classmethod
    def from_records(cls, records: Iterable[Mapping]) -> "TypeOntology":
        """Build from ``{"path": ..., "display_name"?: ...}`` records.

        Record order is preserved; it fixes root order and sibling order.
        """
        paths: list[str] = []
        names: dict[str, str] = {}
        for i, record in enumerate(records):
            if not isinstance(record, Mapping) or "path" not in record:
                raise OntologyError(f"record {i}: expected an object with a 'path' field")
            path = normalize_path(record["path"])
            if path in names:
                raise OntologyError(f"duplicate type path {path!r}")
            display = record.get("display_name")
            if display is not None:
                if not isinstance(display, str) or not display.strip():
                    raise OntologyError(f"{path}: display_name must be a non-empty string")
                name = display.strip().lower()
            else:
                name = name_from_segment(path.rsplit("/", 1)[1])
            paths.append(path)
            names[path] = name

        known = set(paths)
        children: dict[str, list[str]] = {path: [] for path in paths}
        roots: list[str] = []
        for path in paths:
            parent = path_parent(path)
            if parent is None:
                roots.append(path)
            elif parent not in known:
                raise OntologyError(f"{path}: dangling parent reference {parent!r}")
            else:
                children[parent].append(path)

        nodes = {
            path: TypeNode(
                path=path,
                name=names[path],
                parent=path_parent(path),
                children=tuple(children[path]),
            )
            for path in paths
        }
        return cls(nodes, roots)

    # -- structural queries -------------------------------------------------

    @property
    def roots(self) -> tuple[str, ...]:
        return self._roots

    def paths(self) -> tuple[str, ...]:
        return tuple(self._nodes)

    def __contains__(self, path: str) -> bool:
        return path in self._nodes

    def __len__(self) -> int:
        return len(self._nodes)

    def node(self, path: str) -> TypeNode:
        try:
            return self._nodes[path]
        except KeyError:
            raise OntologyError(f"unknown type path {path!r}") from None

    def name(self, path: str) -> str:
        return self.node(path).name

    def children(self, path: str) -> tuple[str, ...]:
        return self.node(path).children

    def depth(self, path: str) -> int:
        self.node(path)
        return path_depth(path)

    def ancestors(self, path: str) -> list[str]:
        """Proper ancestors ordered from depth 1 down to the node's parent."""
        self.node(path)
        chain = []
        parent = path_parent(path)
        while parent is not None:
            chain.append(parent)
            parent = path_parent(parent)
        chain.reverse()
        return chain

    def contrast_sets(self, path: str, include_siblings: bool = False) -> "ContrastSets":
        """Hypothesis-type candidates for each inference label.

        Entailment is the node itself, neutral its proper ancestors, and
        contradiction every node of depth >= 2 that lives under a different
        root. With ``include_siblings`` the node's same-parent siblings are
        appended to the contradiction list.
        """
        node = self.node(path)
        root = path.split("/", 2)[1]
        contradiction = [
            other
            for other in self._nodes
            if path_depth(other) >= 2 and other.split("/", 2)[1] != root
        ]
        if include_siblings and node.parent is not None:
            contradiction.extend(
                sib for sib in self.node(node.parent).children if sib != path
            )
        elif include_siblings:
            contradiction.extend(r for r in self._roots if r != path)
        return ContrastSets(
            entailment=[path],
            neutral=self.ancestors(path),
            contradiction=contradiction,
        )

    # -- serialization ------------------------------------------------------

    def to_records(self) -> list[dict]:
        records = []
        for path, node in self._nodes.items():
            record = {"path": path}
            derived = name_from_segment(path.rsplit("/", 1)[1])
            if node.name != derived:
                record["display_name"] = node.name
            records.append(record)
        return records

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, TypeOntology)
            and self._nodes == other._nodes
            and self._roots == other._roots
        )


@dataclass(frozen=True)
class ContrastSets:
    entailment: list[str]
    neutral: list[str]
    contradiction: list[str]


def load_ontology(source) -> TypeOntology:
    """Load an ontology from a JSON-lines file path."""
    return TypeOntology.from_records(read_jsonl(source))


def save_ontology(ontology: TypeOntology, path) -> None:
    write_jsonl(path, ontology.to_records())


@dataclass(frozen=True)
class Enrichment:
    """Per-type instance strings and topic terms, keyed by type path."""

    instances: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    topics: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    def instances_for(self, path: str) -> tuple[str, ...]:
        return self.instances.get(path, ())

    def topics_for(self, path: str) -> tuple[str, ...]:
        return self.topics.get(path, ())

    @classmethod
    def from_records(cls, records: Iterable[Mapping], ontology: TypeOntology) -> "Enrichment":
        instances: dict[str, tuple[str, ...]] = {}
        topics: dict[str, tuple[str, ...]] = {}
        for record in records:
            path = normalize_path(record["path"])
            if path not in ontology:
                raise OntologyError(f"enrichment refers to unknown type path {path!r}")
            if path in instances:
                raise OntologyError(f"duplicate enrichment record for {path!r}")
            inst = [str(s) for s in record.get("instances", [])]
            if any(not s.strip() for s in inst):
                raise OntologyError(f"{path}: empty instance string")
            lowered = [s.lower() for s in inst]
            if len(set(lowered)) != len(lowered):
                raise OntologyError(f"{path}: duplicate instances (case-insensitive)")
            tops = [str(t) for t in record.get("topics", [])]
            if len(set(tops)) != len(tops):
                raise OntologyError(f"{path}: duplicate topics")
            instances[path] = tuple(inst)
            topics[path] = tuple(tops)
        return cls(instances=instances, topics=topics)

    def to_records(self) -> list[dict]:
        paths = sorted(set(self.instances) | set(self.topics))
        return [
            {
                "path": path,
                "instances": list(self.instances.get(path, ())),
                "topics": list(self.topics.get(path, ())),
            }
            for path in paths
        ]


def load_enrichment(source, ontology: TypeOntology) -> Enrichment:
    return Enrichment.from_records(read_jsonl(source), ontology)


def save_enrichment(enrichment: Enrichment, path) -> None:
    write_jsonl(path, enrichment.to_records())
