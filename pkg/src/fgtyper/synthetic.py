"""Bundled synthetic benchmark world.

A deterministic 2-level ontology (3 roots x 3 children) with disjoint
per-leaf keyword vocabularies. Sentences about a type mention its own name
word, its parent's name word, and a few type-specific keywords, so types
are separable from context alone. The module materializes everything the
pipeline needs for an offline end-to-end run: ontology and enrichment
files, a seed corpus for the bigram language model, a retrieval corpus for
the enrichment demo, a keyword background table, held-out labeled mentions,
and a ready-to-run pipeline configuration.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import yaml

from .jsonl import write_json, write_jsonl
from .ontology import Enrichment, TypeOntology, path_closure, save_enrichment, save_ontology

SPECIFIC_KEYWORDS = {
    "/person/artist": ["painting", "gallery", "canvas", "portrait", "exhibition", "studio"],
    "/person/athlete": ["sprint", "medal", "stadium", "marathon", "tournament", "relay"],
    "/person/politician": ["election", "parliament", "campaign", "senate", "ballot", "minister"],
    "/organization/company": ["profit", "merger", "shares", "factory", "revenue", "brand"],
    "/organization/team": ["league", "roster", "playoffs", "season", "championship", "lineup"],
    "/organization/university": ["campus", "lecture", "professor", "tuition", "thesis", "semester"],
    "/location/city": ["boulevard", "skyline", "district", "subway", "plaza", "harbor"],
    "/location/mountain": ["summit", "ridge", "glacier", "altitude", "climber", "slope"],
    "/location/museum": ["artifact", "curator", "exhibit", "archive", "relic", "admission"],
}
ROOT_PATHS = ("/person", "/organization", "/location")
LEAF_PATHS = tuple(SPECIFIC_KEYWORDS)

ROOT_INSTANCES = 30
LEAF_INSTANCES = 8
NOVEL_SURFACES = 10
MENTIONS_PER_LEAF = 20
CONSTRUCTION_SEED = 1234
MENTION_SEED = 777

_SYLLABLES = [
    "ba", "ce", "di", "fo", "gu", "ha", "je", "ki", "lo", "mu",
    "na", "pe", "qi", "ro", "su", "ta", "ve", "wi", "xo", "zu",
]


def _leaf_word(path: str) -> str:
    return path.rsplit("/", 1)[1]


def _root_word(path: str) -> str:
    return path.split("/")[1]


def _make_names(n: int, rng: np.random.Generator, used: set[str]) -> list[str]:
    names = []
    while len(names) < n:
        k = int(rng.integers(2, 4))
        name = "".join(_SYLLABLES[rng.integers(0, len(_SYLLABLES))] for _ in range(k))
        if name not in used:
            used.add(name)
            names.append(name)
    return names


class SyntheticWorld:
    """All deterministic data for the bundled benchmark."""

    def __init__(self):
        rng = np.random.default_rng(CONSTRUCTION_SEED)
        used: set[str] = set()
        for kws in SPECIFIC_KEYWORDS.values():
            used.update(kws)
        used.update(_root_word(r) for r in ROOT_PATHS)
        used.update(_leaf_word(p) for p in LEAF_PATHS)
        self.leaf_instances = {p: _make_names(LEAF_INSTANCES, rng, used) for p in LEAF_PATHS}
        self.root_instances = {r: _make_names(ROOT_INSTANCES, rng, used) for r in ROOT_PATHS}
        self.novel_surfaces = {p: _make_names(NOVEL_SURFACES, rng, used) for p in LEAF_PATHS}

    # -- core artifacts ------------------------------------------------------

    def ontology(self) -> TypeOntology:
        records = [{"path": r} for r in ROOT_PATHS]
        records += [{"path": p} for p in LEAF_PATHS]
        return TypeOntology.from_records(records)

    def enrichment(self, ontology: TypeOntology | None = None) -> Enrichment:
        ontology = ontology or self.ontology()
        topics = {}
        for p, kws in SPECIFIC_KEYWORDS.items():
            topics[p] = tuple([_leaf_word(p)] + kws[:4])
        for r in ROOT_PATHS:
            kids = ontology.children(r)
            topics[r] = tuple(
                [_root_word(r)]
                + [SPECIFIC_KEYWORDS[k][0] for k in kids]
                + [SPECIFIC_KEYWORDS[kids[0]][1]]
            )
        instances = {p: tuple(v) for p, v in self.leaf_instances.items()}
        instances.update({r: tuple(v) for r, v in self.root_instances.items()})
        return Enrichment(instances=instances, topics=topics)

    def seed_sentences(self) -> list[list[str]]:
        """Word-token sentences the bigram language model is estimated from."""

        def sentence(inst: str, path: str, offset: int) -> list[str]:
            kws = SPECIFIC_KEYWORDS[path]
            window = [kws[(offset + j) % len(kws)] for j in range(3)]
            return inst.split() + [_leaf_word(path), _root_word(path)] + window + ["."]

        sents = []
        for p, insts in self.leaf_instances.items():
            for i, inst in enumerate(insts):
                sents.append(sentence(inst, p, i % 6))
                sents.append(sentence(inst, p, (i + 3) % 6))
        ontology = self.ontology()
        for r, insts in self.root_instances.items():
            kids = ontology.children(r)
            for i, inst in enumerate(insts):
                p = kids[i % len(kids)]
                sents.append(sentence(inst, p, i % 6))
                sents.append(sentence(inst, p, (i + 3) % 6))
        return sents

    def test_records(self, per_leaf: int = MENTIONS_PER_LEAF, seed: int = MENTION_SEED) -> list[dict]:
        """Held-out labeled mentions with fresh contexts (and some fresh surfaces)."""
        rng = np.random.default_rng(seed)
        records = []
        n = 0
        for p in LEAF_PATHS:
            pool = self.novel_surfaces[p][:5] + self.leaf_instances[p][:5]
            for j in range(per_leaf):
                surface = pool[j % len(pool)].capitalize()
                kws = [_leaf_word(p), _root_word(p)] + list(
                    rng.choice(SPECIFIC_KEYWORDS[p], size=3, replace=False)
                )
                order = rng.permutation(len(kws))
                kws = [kws[i] for i in order]
                pos = int(rng.integers(0, len(kws) + 1))
                words = kws[:pos] + surface.split() + kws[pos:] + ["."]
                context = " ".join(words)
                start = context.index(surface)
                records.append(
                    {
                        "id": f"m{n:04d}",
                        "context": context,
                        "surface": surface,
                        "span": [start, start + len(surface)],
                        "gold_types": sorted(path_closure(p)),
                    }
                )
                n += 1
        return records

    def background(self) -> dict[str, float]:
        """Generic background frequencies for keyword extraction."""
        common = {
            "said": 900, "new": 800, "one": 700, "two": 600, "first": 500,
            "year": 500, "years": 400, "time": 400, "people": 300, "made": 300,
            "famous": 250, "known": 250, "called": 200, "early": 150, "later": 150,
        }
        return {term: float(freq) for term, freq in common.items()}

    def retrieval_corpus(self) -> dict[str, str]:
        """Small per-type documents for the offline enrichment demo."""
        docs = {}
        rng = np.random.default_rng(CONSTRUCTION_SEED + 1)
        used: set[str] = set()
        for p in LEAF_PATHS:
            leaf, root = _leaf_word(p), _root_word(p)
            kws = SPECIFIC_KEYWORDS[p]
            for d in range(2):
                name = " ".join(w.capitalize() for w in _make_names(2, rng, used))
                slug = _leaf_word(p)
                text = (
                    f"{name} is a famous {leaf} . "
                    f"this {root} is known for the {kws[d]} and the {kws[d + 1]} . "
                    f"the {kws[d + 2]} made the {leaf} more famous ."
                )
                docs[f"{slug}_{d}.txt"] = text
        return docs

    def pipeline_config(self) -> dict:
        return {
            "seed": 0,
            "paths": {
                "ontology": "ontology.jsonl",
                "enrichment": "enrichment.jsonl",
                "corpus_dir": "corpus",
                "lm_corpus": "lm_corpus.txt",
                "background": "background.json",
                "dataset": "test.jsonl",
                "generated": "out/generated.jsonl",
                "nli": "out/nli.jsonl",
                "model": "out/model.json",
                "loss_trace": "out/loss_trace.tsv",
                "predictions": "out/predictions.jsonl",
                "evaluation": "out/evaluation.json",
                "report": "out/error_report.json",
            },
            "enrichment": {
                "instances_per_type": 30,
                "topics_per_type": 5,
                "docs_per_type": 20,
                "seeds_per_type": 5,
            },
            "generation": {
                "tau": 1.0,
                "alpha": 8.0,
                "beta": 0.5,
                "max_tokens": 12,
                "samples_per_instance": 2,
                "stop_tokens": ["."],
                "lm": {"backend": "bigram", "kappa": 0.0001},
            },
            "nli": {
                "n_neutral": 1,
                "n_contradiction": 1,
                "contradiction_topics": "hypothesis",
            },
            "train": {
                "dim": 32,
                "q": 0.7,
                "loss": "gce",
                "epochs": 10,
                "learning_rate": 0.5,
                "batch_size": 16,
            },
            "inference": {"threshold": 0.5, "k_keywords": 5},
            "flags": {
                "no_topics": False,
                "flat_inference": False,
                "ce_loss": False,
                "include_siblings": True,
            },
        }


def write_fixture(directory, per_leaf: int = MENTIONS_PER_LEAF) -> dict:
    """Materialize the synthetic world under ``directory``; returns a summary."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    world = SyntheticWorld()
    ontology = world.ontology()
    save_ontology(ontology, directory / "ontology.jsonl")
    save_enrichment(world.enrichment(ontology), directory / "enrichment.jsonl")

    sentences = world.seed_sentences()
    with open(directory / "lm_corpus.txt", "w", encoding="utf-8") as fh:
        for sent in sentences:
            fh.write(" ".join(sent))
            fh.write("\n")

    write_json(directory / "background.json", world.background())
    records = world.test_records(per_leaf=per_leaf)
    write_jsonl(directory / "test.jsonl", records)

    corpus_dir = directory / "corpus"
    corpus_dir.mkdir(exist_ok=True)
    for fname, text in world.retrieval_corpus().items():
        (corpus_dir / fname).write_text(text + "\n", encoding="utf-8")

    config = world.pipeline_config()
    with open(directory / "config.yaml", "w", encoding="utf-8") as fh:
        yaml.safe_dump(config, fh, sort_keys=True)

    return {
        "types": len(ontology),
        "lm_sentences": len(sentences),
        "test_mentions": len(records),
        "config": str(directory / "config.yaml"),
    }
