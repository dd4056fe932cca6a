"""Pipeline stage implementations behind the command-line interface.

Each stage reads its inputs per the config's ``paths`` section, writes its
artifact plus a manifest, and returns a small deterministic summary dict.
"""

from __future__ import annotations

from pathlib import Path

from . import nli_data
from .config import ConfigError, cfg_path, write_manifest
from .datasets import load_dataset, unmapped_gold_types
from .enrichment import (
    EmbeddingInstanceExpander,
    HttpSearchRetriever,
    IdentityExpander,
    InMemoryCorpusRetriever,
    PatternQAExtractor,
    TfidfTopicMiner,
    enrich_ontology,
)
from .generation import (
    BigramLM,
    GeneratedSample,
    GenerationConfig,
    GenerationReport,
    UniformLM,
    generate_training_corpus,
)
from .inference import OntologyTyper, TypePrediction
from .jsonl import read_json, read_jsonl, write_json, write_jsonl
from .metrics import EvalPair, evaluate
from .model import EntailmentClassifier, load_model, save_model
from .ontology import load_enrichment, load_ontology, save_enrichment
from .reporting import error_report, render_error_report
from .text import load_background


def _load_lm(config):
    gen = config["generation"]["lm"]
    backend = gen.get("backend", "bigram")
    if backend == "bigram":
        corpus = cfg_path(config, "lm_corpus", must_exist=True)
        sentences = []
        with open(corpus, encoding="utf-8") as fh:
            for line in fh:
                tokens = line.split()
                if tokens:
                    sentences.append(tokens)
        return BigramLM.from_sentences(sentences, kappa=float(gen.get("kappa", 1e-4)))
    if backend == "uniform":
        vocab = gen.get("vocab")
        if not vocab:
            raise ConfigError("generation.lm.vocab required for the uniform backend")
        return UniformLM(vocab)
    raise ConfigError(f"unknown generation.lm.backend {backend!r}")


def _background(config):
    path = cfg_path(config, "background")
    if path is None or not Path(path).exists():
        return None
    return load_background(path)


def _load_retriever(config):
    opts = config["enrichment"].get("retriever") or {}
    backend = opts.get("backend", "local")
    if backend == "local":
        return InMemoryCorpusRetriever.from_directory(cfg_path(config, "corpus_dir", must_exist=True))
    if backend == "http":
        return HttpSearchRetriever(endpoint=opts["endpoint"], index=opts["index"])
    raise ConfigError(f"unknown enrichment.retriever.backend {backend!r}")


def stage_enrich(config) -> dict:
    ontology = load_ontology(cfg_path(config, "ontology", must_exist=True))
    retriever = _load_retriever(config)
    qa = PatternQAExtractor()
    embeddings = config["enrichment"].get("embeddings")
    if embeddings:
        table = read_json(Path(config["_base"]) / embeddings)
        expander = EmbeddingInstanceExpander(table)
    else:
        expander = IdentityExpander()
    miner = TfidfTopicMiner(_background(config))
    opts = config["enrichment"]
    enrichment, report = enrich_ontology(
        ontology,
        retriever,
        qa,
        expander,
        miner,
        instances_per_type=opts["instances_per_type"],
        topics_per_type=opts["topics_per_type"],
        docs_per_type=opts["docs_per_type"],
        seeds_per_type=opts["seeds_per_type"],
    )
    out = cfg_path(config, "enrichment")
    save_enrichment(enrichment, out)
    write_manifest("enrich", config, [cfg_path(config, "ontology")], [out])
    return {
        "types": len(ontology),
        "types_with_instances": sum(1 for p in ontology.paths() if enrichment.instances_for(p)),
        "instances": sum(len(enrichment.instances_for(p)) for p in ontology.paths()),
        "topics": sum(len(enrichment.topics_for(p)) for p in ontology.paths()),
        "failures": [f"{f.path}:{f.stage}" for f in report.failures],
        "output": str(out),
    }


def stage_generate(config) -> dict:
    ontology = load_ontology(cfg_path(config, "ontology", must_exist=True))
    enrichment = load_enrichment(cfg_path(config, "enrichment", must_exist=True), ontology)
    lm = _load_lm(config)
    gen = config["generation"]
    gen_config = GenerationConfig(
        tau=float(gen["tau"]),
        alpha=float(gen["alpha"]),
        beta=float(gen["beta"]),
        max_tokens=int(gen["max_tokens"]),
        samples_per_instance=int(gen["samples_per_instance"]),
        seed=int(config["seed"]),
    )
    report = GenerationReport()
    samples = generate_training_corpus(
        ontology, enrichment, lm, gen_config,
        stop_tokens=gen.get("stop_tokens", ()),
        report=report,
    )
    out = cfg_path(config, "generated")
    write_jsonl(out, [s.to_record() for s in samples])
    write_manifest(
        "generate", config,
        [cfg_path(config, "ontology"), cfg_path(config, "enrichment"), cfg_path(config, "lm_corpus")],
        [out],
    )
    mean_lp = (
        sum(s.mean_log_prob for s in samples) / len(samples) if samples else 0.0
    )
    return {
        "samples": len(samples),
        "mean_log_prob": round(mean_lp, 6),
        "failures": len(report.failures),
        "output": str(out),
    }


def stage_build_nli(config) -> dict:
    ontology = load_ontology(cfg_path(config, "ontology", must_exist=True))
    enrichment = load_enrichment(cfg_path(config, "enrichment", must_exist=True), ontology)
    samples = [GeneratedSample.from_record(r) for r in read_jsonl(cfg_path(config, "generated", must_exist=True))]
    opts = config["nli"]
    examples = nli_data.build_examples(
        samples,
        ontology,
        enrichment,
        n_neutral=int(opts["n_neutral"]),
        n_contradiction=int(opts["n_contradiction"]),
        include_siblings=bool(config["flags"]["include_siblings"]),
        rng_seed=int(config["seed"]),
        attach_topics=not config["flags"]["no_topics"],
        contradiction_topics=opts["contradiction_topics"],
    )
    out = cfg_path(config, "nli")
    write_jsonl(out, [ex.to_record() for ex in examples])
    write_manifest(
        "build-nli", config,
        [cfg_path(config, "ontology"), cfg_path(config, "enrichment"), cfg_path(config, "generated")],
        [out],
    )
    by_label = {label: 0 for label in nli_data.LABELS}
    for ex in examples:
        by_label[ex.label] += 1
    return {"examples": len(examples), **by_label, "output": str(out)}


def stage_train(config) -> dict:
    examples = [nli_data.NLIExample.from_record(r) for r in read_jsonl(cfg_path(config, "nli", must_exist=True))]
    X, y = nli_data.to_xy(examples)
    opts = config["train"]
    clf = EntailmentClassifier(
        dim=int(opts["dim"]),
        q=float(opts["q"]),
        loss="ce" if config["flags"]["ce_loss"] else opts["loss"],
        epochs=int(opts["epochs"]),
        learning_rate=float(opts["learning_rate"]),
        batch_size=int(opts["batch_size"]),
        seed=int(config["seed"]),
    )
    clf.fit(X, y)
    out = cfg_path(config, "model")
    save_model(clf, out)
    trace_path = cfg_path(config, "loss_trace")
    outputs = [out]
    if trace_path is not None:
        with open(trace_path, "w", encoding="utf-8") as fh:
            fh.write("epoch\tmean_loss\n")
            for epoch, value in enumerate(clf.loss_trace_, start=1):
                fh.write(f"{epoch}\t{value!r}\n")
        outputs.append(trace_path)
    write_manifest("train", config, [cfg_path(config, "nli")], outputs)
    return {
        "examples": len(examples),
        "epochs": clf.n_iter_,
        "final_loss": round(clf.loss_trace_[-1], 6) if clf.loss_trace_ else None,
        "output": str(out),
    }


def stage_infer(config) -> dict:
    ontology = load_ontology(cfg_path(config, "ontology", must_exist=True))
    clf = load_model(cfg_path(config, "model", must_exist=True))
    records = load_dataset(cfg_path(config, "dataset", must_exist=True))
    opts = config["inference"]
    typer = OntologyTyper(
        model=clf,
        ontology=ontology,
        threshold=float(opts["threshold"]),
        k_keywords=int(opts["k_keywords"]),
        background=_background(config),
        flat=bool(config["flags"]["flat_inference"]),
        use_topics=not config["flags"]["no_topics"],
    )
    predictions = typer.predict([rec.mention() for rec in records])
    out = cfg_path(config, "predictions")
    write_jsonl(
        out,
        [{"id": rec.id, **pred.to_record()} for rec, pred in zip(records, predictions)],
    )
    write_manifest(
        "infer", config,
        [cfg_path(config, "ontology"), cfg_path(config, "model"), cfg_path(config, "dataset")],
        [out],
    )
    depth_hist: dict[str, int] = {}
    for pred in predictions:
        key = str(pred.path.count("/"))
        depth_hist[key] = depth_hist.get(key, 0) + 1
    return {
        "mentions": len(records),
        "mode": predictions[0].mode if predictions else None,
        "depth_histogram": dict(sorted(depth_hist.items())),
        "output": str(out),
    }


def _aligned_eval_inputs(config):
    ontology = load_ontology(cfg_path(config, "ontology", must_exist=True))
    records = load_dataset(cfg_path(config, "dataset", must_exist=True))
    by_id = {r["id"]: r for r in read_jsonl(cfg_path(config, "predictions", must_exist=True))}
    missing = [rec.id for rec in records if rec.id not in by_id]
    if missing:
        raise ConfigError(f"predictions missing for mention ids {missing[:5]}")
    predictions = [
        TypePrediction(
            path=by_id[rec.id]["path"],
            level_scores=tuple((p, float(s)) for p, s in by_id[rec.id]["level_scores"]),
            mode=by_id[rec.id]["mode"],
        )
        for rec in records
    ]
    pairs = [
        EvalPair.from_paths(rec.gold_types, pred.type_set())
        for rec, pred in zip(records, predictions)
    ]
    return ontology, records, predictions, pairs


def stage_evaluate(config) -> dict:
    ontology, records, predictions, pairs = _aligned_eval_inputs(config)
    unmapped = unmapped_gold_types(records, ontology)
    report = evaluate(pairs)
    strict_eligible = [
        pair
        for rec, pair in zip(records, pairs)
        if all(path in ontology for path in rec.gold_types)
    ]
    strict = evaluate(strict_eligible).strict_accuracy if strict_eligible else None
    payload = {
        "metrics": report.to_dict(),
        "strict_accuracy_mapped_only": strict,
        "unmapped_gold_types": unmapped,
        "mentions": len(records),
    }
    out = cfg_path(config, "evaluation")
    write_json(out, payload)
    text = out.with_suffix(".txt")
    text.write_text(_render_evaluation(payload), encoding="utf-8")
    write_manifest(
        "evaluate", config,
        [cfg_path(config, "ontology"), cfg_path(config, "dataset"), cfg_path(config, "predictions")],
        [out, text],
    )
    return payload


def _render_evaluation(payload) -> str:
    m = payload["metrics"]
    lines = [
        f"mentions          : {payload['mentions']}",
        f"strict accuracy   : {m['strict_accuracy']:.4f}",
        f"macro P/R/F1      : {m['macro_precision']:.4f} / {m['macro_recall']:.4f} / {m['macro_f1']:.4f}",
        f"micro P/R/F1      : {m['micro_precision']:.4f} / {m['micro_recall']:.4f} / {m['micro_f1']:.4f}",
    ]
    if payload["unmapped_gold_types"]:
        lines.append(
            f"unmapped gold types ({len(payload['unmapped_gold_types'])}): "
            + ", ".join(payload["unmapped_gold_types"])
        )
        lines.append(f"strict accuracy over mapped-only mentions: {payload['strict_accuracy_mapped_only']}")
    return "\n".join(lines) + "\n"


def stage_report(config) -> dict:
    ontology, records, predictions, pairs = _aligned_eval_inputs(config)
    report = error_report(
        pairs,
        predictions,
        mentions=[rec.mention() for rec in records],
        ids=[rec.id for rec in records],
    )
    out = cfg_path(config, "report")
    write_json(out, report.to_dict())
    text_path = out.with_suffix(".txt")
    text_path.write_text(render_error_report(report) + "\n", encoding="utf-8")
    write_manifest(
        "report", config,
        [cfg_path(config, "ontology"), cfg_path(config, "dataset"), cfg_path(config, "predictions")],
        [out, text_path],
    )
    return report.to_dict()


STAGES = {
    "enrich": stage_enrich,
    "generate": stage_generate,
    "build-nli": stage_build_nli,
    "train": stage_train,
    "infer": stage_infer,
    "evaluate": stage_evaluate,
    "report": stage_report,
}

DEFAULT_PIPELINE = ("generate", "build-nli", "train", "infer", "evaluate", "report")


def run_stage(stage: str, config) -> dict:
    try:
        fn = STAGES[stage]
    except KeyError:
        raise ConfigError(f"unknown stage {stage!r}; expected one of {sorted(STAGES)}") from None
    return fn(config)
