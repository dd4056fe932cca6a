"""Command-line interface: one subcommand per pipeline stage.

Every stage takes ``--config`` (YAML) plus ``--set section.key=value``
overrides and a global ``--seed``. ``pipeline`` chains stages;
``synth-fixture`` materializes the bundled synthetic benchmark.
"""

from __future__ import annotations

import sys

import click

from .config import ConfigError, load_config
from .jsonl import dumps_canonical
from .stages import DEFAULT_PIPELINE, STAGES, run_stage
from .synthetic import write_fixture


def _common_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(exists=True), default=None,
                      help="YAML pipeline configuration.")(fn)
    fn = click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
                      help="Override any config key, e.g. --set train.epochs=5.")(fn)
    fn = click.option("--seed", type=int, default=None, help="Global random seed.")(fn)
    return fn


def _run(stage: str, config_path, overrides, seed, extra=()):
    try:
        config = load_config(config_path, overrides=list(overrides) + list(extra), seed=seed)
        summary = run_stage(stage, config)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"[{stage}] {dumps_canonical(summary)}")
    return summary


@click.group()
def main():
    """Zero-shot fine-grained entity typing pipeline."""


@main.command("synth-fixture")
@click.option("--out", "out_dir", type=click.Path(), required=True,
              help="Directory to materialize the synthetic benchmark in.")
@click.option("--mentions-per-type", type=int, default=20, show_default=True)
def synth_fixture(out_dir, mentions_per_type):
    """Write the bundled synthetic benchmark fixture."""
    summary = write_fixture(out_dir, per_leaf=mentions_per_type)
    click.echo(f"[synth-fixture] {dumps_canonical(summary)}")


def _stage_command(stage: str, helptext: str):
    @main.command(stage, help=helptext)
    @_common_options
    def cmd(config_path, overrides, seed):
        _run(stage, config_path, overrides, seed)

    cmd.__name__ = stage.replace("-", "_")
    return cmd


_stage_command("enrich", "Attach instances and topics to every ontology node.")
_stage_command("build-nli", "Turn generated sentences into labeled premise/hypothesis examples.")
_stage_command("evaluate", "Score predictions against gold type sets.")
_stage_command("report", "Categorize prediction errors.")


@main.command("generate")
@_common_options
@click.option("--tau", type=float, default=None, help="Base sampling temperature.")
@click.option("--alpha", type=float, default=None, help="Reward scale for instance tokens (>= 1).")
@click.option("--beta", type=float, default=None, help="Penalty scale for repeated tokens (in (0, 1]).")
@click.option("--max-tokens", type=int, default=None, help="Sample length cap.")
@click.option("--samples-per-instance", type=int, default=None, help="Candidates drawn per instance.")
def generate(config_path, overrides, seed, tau, alpha, beta, max_tokens, samples_per_instance):
    """Sample pseudo-training sentences for enriched instances."""
    extra = []
    for key, value in (
        ("generation.tau", tau),
        ("generation.alpha", alpha),
        ("generation.beta", beta),
        ("generation.max_tokens", max_tokens),
        ("generation.samples_per_instance", samples_per_instance),
    ):
        if value is not None:
            extra.append(f"{key}={value}")
    _run("generate", config_path, overrides, seed, extra)


@main.command("train")
@_common_options
@click.option("--ce-loss", is_flag=True, default=False, help="Train with plain cross-entropy.")
def train(config_path, overrides, seed, ce_loss):
    """Train the entailment classifier on the NLI dataset."""
    extra = ["flags.ce_loss=true"] if ce_loss else []
    _run("train", config_path, overrides, seed, extra)


@main.command("infer")
@_common_options
@click.option("--threshold", type=float, default=None, help="Descent threshold on entailment probability.")
@click.option("--flat", is_flag=True, default=False, help="Score all nodes at one level instead of descending.")
@click.option("--no-topics", is_flag=True, default=False, help="Disable context keywords (topic ablation).")
@click.option("--keywords", type=int, default=None, help="Number of context keywords to extract.")
def infer(config_path, overrides, seed, threshold, flat, no_topics, keywords):
    """Assign a type path to every dataset mention."""
    extra = []
    if threshold is not None:
        extra.append(f"inference.threshold={threshold}")
    if keywords is not None:
        extra.append(f"inference.k_keywords={keywords}")
    if flat:
        extra.append("flags.flat_inference=true")
    if no_topics:
        extra.append("flags.no_topics=true")
    _run("infer", config_path, overrides, seed, extra)


@main.command("pipeline")
@_common_options
@click.option("--stages", "stage_csv", default=",".join(DEFAULT_PIPELINE), show_default=True,
              help="Comma-separated stages to run in order.")
def pipeline(config_path, overrides, seed, stage_csv):
    """Run several stages back to back."""
    stages = [s.strip() for s in stage_csv.split(",") if s.strip()]
    unknown = [s for s in stages if s not in STAGES]
    if unknown:
        raise click.ClickException(f"unknown stages {unknown}; expected from {sorted(STAGES)}")
    for stage in stages:
        _run(stage, config_path, overrides, seed)


if __name__ == "__main__":
    sys.exit(main())
