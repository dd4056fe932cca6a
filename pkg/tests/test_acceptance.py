"""Acceptance suite: one test per release criterion, each printing PASS/FAIL.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines. Tolerances are fixed here and not calibrated anywhere else.
"""

import math
import time

import numpy as np
import pytest

from fgtyper import (
    EntailmentClassifier,
    EvalPair,
    GeneratedSample,
    GenerationConfig,
    build_examples,
    evaluate,
    filter_samples,
    gce_loss,
    rescaled_distribution,
)
from fgtyper.config import load_config
from fgtyper.generation import contains_token_sequence
from fgtyper.jsonl import read_json
from fgtyper.nli_data import ENTAILMENT
from fgtyper.ontology import Enrichment
from fgtyper.stages import run_stage
from fgtyper.synthetic import write_fixture

from conftest import random_ontology
from test_metrics import _random_pairs, brute_force
from test_model import TRAIN_X, TRAIN_Y


def report(criterion, ok, detail):
    print(f"[acceptance] criterion {criterion}: {'PASS' if ok else 'FAIL'} ({detail})")
    return ok


# -- 1: metrics against a brute-force oracle ---------------------------------


def test_criterion_1_metrics_oracle():
    start = time.perf_counter()
    rng = np.random.default_rng(1001)
    worst = 0.0
    for _ in range(1000):
        pairs = _random_pairs(rng)
        got = evaluate(pairs)
        want = brute_force(pairs)
        values = (
            got.strict_accuracy, got.macro_precision, got.macro_recall, got.macro_f1,
            got.micro_precision, got.micro_recall, got.micro_f1,
        )
        worst = max(worst, max(abs(a - b) for a, b in zip(values, want)))
    hand = evaluate([EvalPair.from_paths({"/person", "/person/artist"}, {"/person"})])
    exact = (
        hand.macro_precision == 1.0
        and hand.macro_recall == 0.5
        and hand.macro_f1 == 2.0 / 3.0
    )
    elapsed = time.perf_counter() - start
    ok = worst < 1e-12 and exact and elapsed < 5.0
    assert report(1, ok, f"max oracle diff {worst:.2e}, hand example exact={exact}, {elapsed:.2f}s")


# -- 2: decoding distribution -------------------------------------------------


def _direct_eq12(log_probs, entity, prefix, tau, alpha, beta):
    weights = []
    for i, lp in enumerate(log_probs):
        if i in entity and i not in prefix:
            omega = tau * alpha
        elif i in prefix:
            omega = tau * beta
        else:
            omega = tau
        weights.append(math.exp(lp / omega))
    total = sum(weights)
    return np.array([w / total for w in weights])


def test_criterion_2_decoding_distribution():
    start = time.perf_counter()
    rng = np.random.default_rng(2002)
    cfg = GenerationConfig(tau=0.9, alpha=2.5, beta=0.4)
    worst = 0.0
    for _ in range(100):
        log_probs = np.log(rng.dirichlet(np.ones(10)))
        entity = set(rng.choice(10, size=2, replace=False).tolist())
        prefix = set(rng.choice(10, size=3, replace=False).tolist())
        got = rescaled_distribution(log_probs, entity, prefix, cfg)
        want = _direct_eq12(log_probs, entity, prefix, 0.9, 2.5, 0.4)
        worst = max(worst, float(np.max(np.abs(got - want))))

    fixed = rescaled_distribution(
        np.log(np.random.default_rng(7).dirichlet(np.ones(10))), {0, 1}, {2}, cfg
    )
    draws = np.random.default_rng(8).choice(10, size=100_000, p=fixed)
    freq = np.bincount(draws, minlength=10) / 100_000
    tv = 0.5 * float(np.abs(freq - fixed).sum())
    elapsed = time.perf_counter() - start
    ok = worst < 1e-12 and tv < 0.01 and elapsed < 30.0
    assert report(2, ok, f"max dist diff {worst:.2e}, TV {tv:.4f}, {elapsed:.2f}s")


# -- 3: reward/penalty monotonicity -------------------------------------------


def test_criterion_3_monotonicity():
    rng = np.random.default_rng(3003)
    violations = 0
    for _ in range(1000):
        log_probs = np.log(rng.dirichlet(np.ones(10)))
        token = int(rng.integers(0, 10))
        up = [
            rescaled_distribution(
                log_probs, {token}, set(), GenerationConfig(alpha=a, beta=0.5)
            )[token]
            for a in (1.0, 2.0, 5.0)
        ]
        if not (up[0] < up[1] < up[2]):
            violations += 1
        down = [
            rescaled_distribution(
                log_probs, set(), {token}, GenerationConfig(alpha=2.0, beta=b)
            )[token]
            for b in (1.0, 0.5, 0.1)
        ]
        if not (down[0] > down[1] > down[2]):
            violations += 1
    ok = violations == 0
    assert report(3, ok, f"{violations} violations over 1000 cases")


# -- 4: GCE correctness --------------------------------------------------------


def test_criterion_4a_point_value():
    value = gce_loss([0.5], 0.7)
    ok = abs(value - 0.54918) <= 1e-4
    assert report("4a", ok, f"gce(0.5, 0.7) = {value:.6f}")


@pytest.mark.xfail(
    strict=True,
    reason=(
        "analytically unattainable as stated: |gce(p, 1e-4) - CE(p)| = "
        "q*ln(p)^2/2 + O(q^2) which is 1.0604e-3 > 1e-3 at the grid point "
        "p = 0.01; see the companion test for the achievable bound"
    ),
)
def test_criterion_4b_ce_limit_as_stated():
    grid = np.linspace(0.01, 1.0, 100)
    worst = max(abs(gce_loss([p], 1e-4) - (-math.log(p))) for p in grid)
    assert report("4b", worst < 1e-3, f"max |gce - ce| = {worst:.6e} on [0.01, 1]")


def test_criterion_4b_ce_limit_achievable_bound():
    # the true limit behavior: difference is q*ln(p)^2/2 to leading order,
    # below 1e-3 for p >= 0.0115 and bounded by 1.07e-3 on the full grid
    grid = np.linspace(0.01, 1.0, 100)
    diffs = [abs(gce_loss([p], 1e-4) - (-math.log(p))) for p in grid]
    bound = 1e-4 * math.log(0.01) ** 2 / 2 * 1.01
    worst = max(diffs)
    inner = max(d for p, d in zip(grid, diffs) if p >= 0.0115)
    ok = worst <= bound and inner < 1e-3
    assert report("4b'", ok, f"max diff {worst:.3e} <= analytic bound {bound:.3e}; max diff {inner:.3e} for p >= 0.0115")


def test_criterion_4c_q_one_exact():
    values = [0.1, 0.25, 0.5, 0.75, 1.0]
    ok = all(gce_loss([p], 1.0) == 1.0 - p for p in values)
    assert report("4c", ok, "gce(p, 1) == 1 - p exactly on the probe set")


# -- 5: gradient check ----------------------------------------------------------


def test_criterion_5_gradient_check():
    start = time.perf_counter()
    worst = 0.0
    for loss in ("gce", "ce"):
        clf = EntailmentClassifier(dim=4, loss=loss, epochs=0, seed=55, use_projection=True)
        clf.fit(TRAIN_X, TRAIN_Y)
        rng = np.random.default_rng(5005)
        size = clf.parameter_vector().size
        for _ in range(10):
            theta = rng.normal(0.0, 0.3, size)
            clf.set_parameter_vector(theta)
            analytic = clf.gradient_on(TRAIN_X, TRAIN_Y)
            h = 1e-5
            numeric = np.zeros(size)
            for i in range(size):
                plus = theta.copy()
                plus[i] += h
                clf.set_parameter_vector(plus)
                up = clf.score_on(TRAIN_X, TRAIN_Y)
                minus = theta.copy()
                minus[i] -= h
                clf.set_parameter_vector(minus)
                numeric[i] = (up - clf.score_on(TRAIN_X, TRAIN_Y)) / (2 * h)
            # relative error with a 1e-6 absolute floor so that noise on
            # components whose true gradient is ~0 is not amplified
            rel = np.abs(analytic - numeric) / np.maximum(np.abs(analytic) + np.abs(numeric), 1e-6)
            worst = max(worst, float(rel.max()))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-4 and elapsed < 10.0
    assert report(5, ok, f"max rel err {worst:.2e} over 20 draws (gce+ce), {elapsed:.2f}s")


# -- 6: NLI construction soundness ----------------------------------------------


def test_criterion_6_nli_soundness():
    rng = np.random.default_rng(6006)
    onto = random_ontology(rng)
    assert len(onto) >= 30
    paths = list(onto.paths())
    samples = [
        GeneratedSample(
            text=f"i{k} in context",
            tokens=(f"i{k}", "in", "context"),
            instance=f"i{k}",
            type_path=paths[int(rng.integers(0, len(paths)))],
            mean_log_prob=-1.0,
        )
        for k in range(10_000)
    ]
    examples = build_examples(
        samples, onto, Enrichment(), n_neutral=2, n_contradiction=2,
        include_siblings=True, rng_seed=66,
    )
    violations = 0
    entailments = 0
    for ex in examples:
        sets = onto.contrast_sets(ex.source_type, include_siblings=True)
        if ex.label == ENTAILMENT:
            entailments += 1
            if ex.hypothesis_type != ex.source_type:
                violations += 1
        elif ex.label == "neutral":
            if ex.hypothesis_type not in sets.neutral:
                violations += 1
        elif ex.hypothesis_type not in sets.contradiction:
            violations += 1
    ok = violations == 0 and entailments == len(samples)
    assert report(6, ok, f"{violations} violations, {entailments} entailments / {len(samples)} samples")


# -- 7 & 9: end-to-end synthetic benchmark and determinism -----------------------


def _run_pipeline(base, overrides=()):
    from fgtyper.config import cfg_path

    config = load_config(base / "config.yaml", overrides=list(overrides))
    for stage in ("generate", "build-nli", "train", "infer", "evaluate"):
        run_stage(stage, config)
    return read_json(cfg_path(config, "evaluation"))


def test_criterion_7_end_to_end_synthetic(tmp_path):
    start = time.perf_counter()
    base = tmp_path / "fixture"
    write_fixture(base)

    default = _run_pipeline(base)
    flat = _run_pipeline(base, [
        "flags.flat_inference=true",
        "paths.predictions=out/pred_flat.jsonl",
        "paths.evaluation=out/eval_flat.json",
    ])
    no_topics = _run_pipeline(base, [
        "flags.no_topics=true",
        "paths.nli=out/nli_nt.jsonl",
        "paths.model=out/model_nt.json",
        "paths.loss_trace=out/loss_nt.tsv",
        "paths.predictions=out/pred_nt.jsonl",
        "paths.evaluation=out/eval_nt.json",
    ])
    elapsed = time.perf_counter() - start

    strict = default["metrics"]["strict_accuracy"]
    ma_f1 = default["metrics"]["macro_f1"]
    ok = (
        default["mentions"] == 180
        and strict >= 0.80
        and ma_f1 >= 0.90
        and elapsed < 300.0
    )
    # directional observations from the ablations: reported, not asserted
    print(
        "[acceptance] criterion 7 comparative report: "
        f"coarse-to-fine strict={strict:.3f} maF1={ma_f1:.3f} | "
        f"flat strict={flat['metrics']['strict_accuracy']:.3f} "
        f"maF1={flat['metrics']['macro_f1']:.3f} "
        f"(coarse-to-fine >= flat: {strict >= flat['metrics']['strict_accuracy']}) | "
        f"no-topics strict={no_topics['metrics']['strict_accuracy']:.3f} "
        f"maF1={no_topics['metrics']['macro_f1']:.3f} "
        f"(topics >= no-topics: {strict >= no_topics['metrics']['strict_accuracy']})"
    )
    assert report(7, ok, f"strict {strict:.3f} (>=0.80), macro-F1 {ma_f1:.3f} (>=0.90), {elapsed:.1f}s (<300s)")


def test_criterion_9_determinism(tmp_path):
    digests = []
    for run in ("a", "b"):
        base = tmp_path / run
        write_fixture(base)
        config = load_config(base / "config.yaml")
        for stage in ("generate", "build-nli", "train", "infer", "evaluate", "report"):
            run_stage(stage, config)
        out = base / "out"
        digests.append(
            {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.is_file()}
        )
    same_names = sorted(digests[0]) == sorted(digests[1])
    identical = same_names and all(digests[0][k] == digests[1][k] for k in digests[0])
    assert report(9, identical, f"{len(digests[0])} artifact files byte-identical={identical}")


# -- 8: filter contract -----------------------------------------------------------


def test_criterion_8_filter_contract():
    rng = np.random.default_rng(8008)
    vocab = ["a", "b", "c", "renoir", "x", "y"]
    violations = 0
    for _ in range(1000):
        batch = []
        for _ in range(int(rng.integers(1, 8))):
            n = int(rng.integers(1, 7))
            tokens = [vocab[int(rng.integers(0, len(vocab)))] for _ in range(n)]
            if rng.random() < 0.7:
                pos = int(rng.integers(0, len(tokens) + 1))
                tokens = tokens[:pos] + ["renoir"] + tokens[pos:]
            batch.append(
                GeneratedSample(
                    text=" ".join(tokens),
                    tokens=tuple(tokens),
                    instance="renoir",
                    type_path="/t",
                    mean_log_prob=float(-rng.random() * 4 - 0.01),
                )
            )
        kept = filter_samples(batch)
        mean = sum(s.mean_log_prob for s in batch) / len(batch)
        for s in kept:
            if not contains_token_sequence(s.tokens, s.instance.split()):
                violations += 1
            if len(batch) >= 2 and not s.mean_log_prob > mean:
                violations += 1
        if not set(map(id, kept)) <= set(map(id, batch)):
            violations += 1
    ok = violations == 0
    assert report(8, ok, f"{violations} violations over 1000 batches")
