import numpy as np
import pytest

from fgtyper import TypeOntology, Enrichment


@pytest.fixture
def small_ontology():
    """3-leaf tree used throughout: /person/{artist,athlete}, /organization/company."""
    return TypeOntology.from_records(
        [
            {"path": "/person"},
            {"path": "/person/artist"},
            {"path": "/person/athlete"},
            {"path": "/organization"},
            {"path": "/organization/company"},
        ]
    )


@pytest.fixture
def deep_ontology():
    return TypeOntology.from_records(
        [
            {"path": "/location"},
            {"path": "/location/structure"},
            {"path": "/location/structure/hospital"},
            {"path": "/person"},
            {"path": "/person/artist"},
        ]
    )


@pytest.fixture
def small_enrichment(small_ontology):
    return Enrichment(
        instances={
            "/person/artist": ("renoir", "vermeer"),
            "/person/athlete": ("serena",),
            "/organization/company": ("acme",),
        },
        topics={
            "/person": ("person",),
            "/person/artist": ("painting", "gallery"),
            "/person/athlete": ("medal", "stadium"),
            "/organization/company": ("profit", "merger"),
        },
    )


def random_ontology(rng: np.random.Generator, n_roots=4, max_children=4, depth=3):
    """Random >= 30 node forest for fuzz tests."""
    records = []
    counter = 0

    def grow(parent, level):
        nonlocal counter
        n = int(rng.integers(1, max_children + 1))
        for _ in range(n):
            path = f"{parent}/t{counter}"
            counter += 1
            records.append({"path": path})
            if level < depth - 1 and rng.random() < 0.8:
                grow(path, level + 1)

    while counter < 30:
        for r in range(n_roots):
            root = f"/root{r}_{counter}"
            records.append({"path": root})
            counter += 1
            grow(root, 1)
    return TypeOntology.from_records(records)
