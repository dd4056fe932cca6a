"""Pipeline configuration: defaults, YAML loading, overrides, run manifests.

A config is a nested mapping with the sections ``paths``, ``enrichment``,
``generation``, ``nli``, ``train``, ``inference`` and ``flags`` plus a
global ``seed``. Every key can be overridden from the command line with
``--set section.key=value``. Each stage writes a manifest next to its
primary output recording the resolved-config hash, the seed, and content
digests of its input and output files, so identical manifests imply
identical reruns.
"""

from __future__ import annotations

import copy
import hashlib
from pathlib import Path

import yaml

from .jsonl import dumps_canonical, write_json

DEFAULT_CONFIG: dict = {
    "seed": 0,
    "paths": {
        "ontology": "ontology.jsonl",
        "enrichment": "enrichment.jsonl",
        "corpus_dir": "corpus",
        "lm_corpus": "lm_corpus.txt",
        "background": None,
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
        "embeddings": None,
        "retriever": {"backend": "local", "endpoint": None, "index": None},
    },
    "generation": {
        "tau": 1.0,
        "alpha": 2.0,
        "beta": 0.5,
        "max_tokens": 64,
        "samples_per_instance": 1,
        "stop_tokens": ["."],
        "lm": {"backend": "bigram", "kappa": 0.0001, "vocab": None},
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
        "learning_rate": 1e-5,
        "batch_size": 16,
    },
    "inference": {"threshold": 0.5, "k_keywords": 5},
    "flags": {
        "no_topics": False,
        "flat_inference": False,
        "ce_loss": False,
        "include_siblings": False,
    },
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, extra: dict, crumb: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        where = f"{crumb}.{key}" if crumb else str(key)
        if key not in out:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(out[key], dict) and isinstance(value, dict):
            out[key] = _merge(out[key], value, where)
        else:
            out[key] = value
    return out


def load_config(path=None, overrides=(), seed=None) -> dict:
    """Merged configuration with ``--set`` overrides and base-dir tracking."""
    config = copy.deepcopy(DEFAULT_CONFIG)
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            loaded = yaml.safe_load(fh) or {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {path} must hold a mapping")
        config = _merge(config, loaded)
        base = path.resolve().parent
    for item in overrides:
        config = _apply_override(config, item)
    if seed is not None:
        config["seed"] = int(seed)
    config["_base"] = str(base)
    return config


def _apply_override(config: dict, item: str) -> dict:
    if "=" not in item:
        raise ConfigError(f"--set expects dotted.key=value, got {item!r}")
    dotted, raw = item.split("=", 1)
    value = yaml.safe_load(raw)
    node: dict = {}
    cursor = node
    keys = dotted.strip().split(".")
    for key in keys[:-1]:
        cursor[key] = {}
        cursor = cursor[key]
    cursor[keys[-1]] = value
    return _merge(config, node)


def cfg_path(config: dict, key: str, must_exist: bool = False) -> Path | None:
    """Resolve ``paths.<key>`` against the config file's directory."""
    raw = config["paths"].get(key)
    if raw is None:
        return None
    path = Path(raw)
    if not path.is_absolute():
        path = Path(config.get("_base", ".")) / path
    if must_exist and not path.exists():
        raise ConfigError(f"required input paths.{key} not found: {path}")
    return path


def public_config(config: dict) -> dict:
    return {k: v for k, v in config.items() if not k.startswith("_")}


def config_hash(config: dict) -> str:
    return hashlib.sha256(dumps_canonical(public_config(config)).encode("utf-8")).hexdigest()


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(stage: str, config: dict, inputs, outputs) -> Path:
    """Record config hash, seed, and file digests next to the stage output.

    ``outputs`` must be non-empty; the manifest lands at
    ``<first output>.manifest.json``.
    """
    inputs = [Path(p) for p in inputs if p is not None]
    outputs = [Path(p) for p in outputs]
    manifest = {
        "stage": stage,
        "seed": config.get("seed", 0),
        "config_sha256": config_hash(config),
        "inputs": {p.name: file_digest(p) for p in sorted(inputs)},
        "outputs": {p.name: file_digest(p) for p in sorted(outputs)},
    }
    target = outputs[0].with_name(outputs[0].name + ".manifest.json")
    write_json(target, manifest)
    return target
