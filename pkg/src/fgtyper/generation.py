"""Pseudo-training sentence synthesis with reward/penalty rescaled sampling.

Any autoregressive token model can back the sampler through the
:class:`TokenLM` protocol. At each step the model's raw scores are first
normalized to log-probabilities, then each token's log-probability is
divided by a per-token temperature before the softmax:

* ``tau * alpha`` for tokens of the target instance that have not yet been
  emitted as part of a completed occurrence (``alpha > 1`` raises them),
* ``tau * beta`` for tokens already present in the emitted prefix
  (``beta < 1`` lowers them; this case wins when both apply),
* ``tau`` otherwise.

Because the inputs are log-probabilities (all <= 0), dividing by a larger
temperature always moves a token toward probability mass 1/|V| from below,
so the reward and penalty act in the intended directions regardless of the
backend's raw logit scale.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

import numpy as np

logger = logging.getLogger(__name__)

from ._validation import check_log_probs, check_positive
from .ontology import Enrichment, TypeOntology


class GenerationError(RuntimeError):
    """Raised when a language-model backend fails or an instance is unusable."""


class TokenLM(Protocol):
    """Autoregressive token-probability model over a fixed vocabulary."""

    def vocabulary(self) -> Sequence[str]:
        """Ordered token list; index positions match ``next_logits`` entries."""
        ...

    def next_logits(self, prefix: Sequence[str]) -> np.ndarray:
        """Raw next-token scores given the emitted prefix."""
        ...


@dataclass(frozen=True)
class GenerationConfig:
    """Sampler hyperparameters.

    ``tau`` is the base temperature; ``alpha > 1`` rewards instance tokens
    and ``beta < 1`` penalizes repetition. The boundary values alpha = 1 and
    beta = 1 are admitted and reduce to plain temperature-``tau`` sampling.
    """

    tau: float = 1.0
    alpha: float = 2.0
    beta: float = 0.5
    max_tokens: int = 64
    samples_per_instance: int = 1
    seed: int = 0

    def __post_init__(self):
        check_positive(self.tau, "tau")
        if not self.alpha >= 1.0:
            raise ValueError(f"alpha must be >= 1, got {self.alpha}")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")
        if self.max_tokens < 1:
            raise ValueError(f"max_tokens must be >= 1, got {self.max_tokens}")
        if self.samples_per_instance < 1:
            raise ValueError("samples_per_instance must be >= 1")


@dataclass(frozen=True)
class GeneratedSample:
    """One sampled sentence for a (type, instance) pair."""

    text: str
    tokens: tuple[str, ...]
    instance: str
    type_path: str
    mean_log_prob: float
    seed: int = 0

    def to_record(self) -> dict:
        return {
            "text": self.text,
            "instance": self.instance,
            "type_path": self.type_path,
            "mean_log_prob": self.mean_log_prob,
            "seed": self.seed,
        }

    @classmethod
    def from_record(cls, record: dict) -> "GeneratedSample":
        return cls(
            text=record["text"],
            tokens=tuple(record["text"].split(" ")),
            instance=record["instance"],
            type_path=record["type_path"],
            mean_log_prob=float(record["mean_log_prob"]),
            seed=int(record.get("seed", 0)),
        )


def log_normalize(logits) -> np.ndarray:
    """Convert raw scores to log-probabilities (stable log-softmax)."""
    arr = np.asarray(logits, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("logits must be a non-empty 1-d vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError("logits contain non-finite entries")
    shifted = arr - arr.max()
    return shifted - np.log(np.exp(shifted).sum())


def rescaled_distribution(
    logits,
    entity_tokens: set[int] | frozenset[int],
    prefix_tokens: set[int] | frozenset[int],
    config: GenerationConfig,
) -> np.ndarray:
    """Next-token distribution with per-token temperatures applied.

    ``logits`` must already be log-probabilities (every entry <= 0);
    ``entity_tokens`` and ``prefix_tokens`` are vocabulary indices. Returns
    a probability vector summing to 1 within 1e-12.
    """
    log_probs = check_log_probs(logits)
    omega = np.full(log_probs.shape, config.tau)
    for i in entity_tokens:
        if i not in prefix_tokens:
            omega[i] = config.tau * config.alpha
    for i in prefix_tokens:
        omega[i] = config.tau * config.beta
    scaled = log_probs / omega
    scaled -= scaled.max()
    weights = np.exp(scaled)
    return weights / weights.sum()


def _instance_tokens(lm_vocab: Sequence[str], instance: str) -> list[str]:
    """Whitespace tokens of ``instance``, validated against the vocabulary.

    Token models used here are word-level; matching is case-insensitive
    against the vocabulary's own casing.
    """
    words = instance.split()
    if not words:
        raise GenerationError(f"instance {instance!r} has no tokens")
    lookup = {tok.lower(): tok for tok in lm_vocab}
    resolved = []
    for word in words:
        tok = lookup.get(word.lower())
        if tok is None:
            raise GenerationError(
                f"instance token {word!r} is not in the model vocabulary"
            )
        resolved.append(tok)
    return resolved


def contains_token_sequence(haystack: Sequence[str], needle: Sequence[str]) -> bool:
    """Case-insensitive contiguous subsequence test."""
    hay = [tok.lower() for tok in haystack]
    ndl = [tok.lower() for tok in needle]
    if not ndl or len(ndl) > len(hay):
        return False
    return any(hay[i : i + len(ndl)] == ndl for i in range(len(hay) - len(ndl) + 1))


def sample_sentence(
    lm: TokenLM,
    instance: str,
    config: GenerationConfig,
    stop_tokens: Iterable[str] = (),
    rng_seed: int = 0,
    type_path: str = "",
) -> GeneratedSample:
    """Sample one sentence that is encouraged to contain ``instance``.

    Instance tokens are rewarded until one complete occurrence of the whole
    instance token sequence has been emitted; every already-emitted token is
    penalized. Stops at a stop token (which is kept) or at ``max_tokens``.
    ``mean_log_prob`` is the mean log of the rescaled probabilities of the
    chosen tokens.
    """
    vocab = list(lm.vocabulary())
    index = {tok: i for i, tok in enumerate(vocab)}
    instance_toks = _instance_tokens(vocab, instance)
    entity_ids = frozenset(index[tok] for tok in instance_toks)
    stop = {tok.lower() for tok in stop_tokens}

    rng = np.random.default_rng(rng_seed)
    emitted: list[str] = []
    prefix_ids: set[int] = set()
    chosen_log_probs: list[float] = []
    instance_done = False

    for _ in range(config.max_tokens):
        try:
            raw = lm.next_logits(tuple(emitted))
        except Exception as exc:
            raise GenerationError(f"language model failed after {emitted!r}") from exc
        log_probs = log_normalize(raw)
        active_entities = frozenset() if instance_done else entity_ids
        probs = rescaled_distribution(log_probs, active_entities, prefix_ids, config)
        choice = int(rng.choice(len(vocab), p=probs))
        chosen_log_probs.append(float(np.log(probs[choice])))
        emitted.append(vocab[choice])
        prefix_ids.add(choice)
        if not instance_done and contains_token_sequence(emitted, instance_toks):
            instance_done = True
        if vocab[choice].lower() in stop:
            break

    return GeneratedSample(
        text=" ".join(emitted),
        tokens=tuple(emitted),
        instance=instance,
        type_path=type_path,
        mean_log_prob=float(np.mean(chosen_log_probs)),
        seed=rng_seed,
    )


def filter_samples(samples: Sequence[GeneratedSample]) -> list[GeneratedSample]:
    """Keep above-average, instance-containing samples (order preserved).

    The average is the arithmetic mean of ``mean_log_prob`` over the batch
    and the comparison is strict. Single-sample batches skip the mean test
    (a strict test against a one-element mean would discard everything).
    Samples whose token sequence does not contain their instance tokens
    (case-insensitive) are dropped in either case.
    """
    if not samples:
        raise ValueError("samples must be non-empty")
    if len(samples) == 1:
        kept = list(samples)
    else:
        batch_mean = sum(s.mean_log_prob for s in samples) / len(samples)
        kept = [s for s in samples if s.mean_log_prob > batch_mean]
    return [
        s for s in kept if contains_token_sequence(s.tokens, s.instance.split())
    ]


def derive_seed(global_seed: int, *parts) -> int:
    """Stable per-task RNG seed from the global seed and task identity."""
    digest = hashlib.sha256(
        "\x1f".join([str(global_seed), *map(str, parts)]).encode("utf-8")
    ).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass
class GenerationReport:
    """Per-pair failures recorded while generating a corpus."""

    failures: list[tuple[str, str, str]] = field(default_factory=list)


def generate_training_corpus(
    ontology: TypeOntology,
    enrichment: Enrichment,
    lm: TokenLM,
    config: GenerationConfig,
    stop_tokens: Iterable[str] = (),
    report: GenerationReport | None = None,
) -> list[GeneratedSample]:
    """Sample and filter sentences for every enriched (type, instance) pair.

    ``samples_per_instance`` candidates are drawn per pair with seeds derived
    from ``config.seed``; the above-average filter runs over each type's
    batch. Backend failures are recorded per pair and the remaining pairs
    continue.
    """
    covered = [p for p in ontology.paths() if enrichment.instances_for(p)]
    if not covered:
        raise ValueError("enrichment provides no instances for any ontology node")

    out: list[GeneratedSample] = []
    for path in covered:
        batch: list[GeneratedSample] = []
        for instance in enrichment.instances_for(path):
            for k in range(config.samples_per_instance):
                seed = derive_seed(config.seed, path, instance, k)
                try:
                    batch.append(
                        sample_sentence(
                            lm,
                            instance,
                            config,
                            stop_tokens=stop_tokens,
                            rng_seed=seed,
                            type_path=path,
                        )
                    )
                except GenerationError as exc:
                    logger.warning("generation failed for (%s, %r): %s", path, instance, exc)
                    if report is not None:
                        report.failures.append((path, instance, str(exc)))
        if batch:
            out.extend(filter_samples(batch))
    return out


class UniformLM:
    """Constant-logit model over a fixed vocabulary (testing and demos)."""

    def __init__(self, vocab: Sequence[str]):
        self._vocab = tuple(vocab)

    def vocabulary(self) -> tuple[str, ...]:
        return self._vocab

    def next_logits(self, prefix) -> np.ndarray:
        return np.zeros(len(self._vocab))


class BigramLM:
    """Interpolated bigram model estimated from seed sentences.

    Deterministic: scores are ``count(prev -> tok) + kappa * (unigram + 1)``
    in log space, conditioned on the last emitted token (or the sentence
    start state for an empty prefix).
    """

    START = "<s>"

    def __init__(self, vocab, bigram_counts, unigram_counts, kappa=0.1):
        self._vocab = tuple(vocab)
        self._index = {tok: i for i, tok in enumerate(self._vocab)}
        self._bigrams = {k: dict(v) for k, v in bigram_counts.items()}
        self._unigrams = dict(unigram_counts)
        self._kappa = float(kappa)

    @classmethod
    def from_sentences(cls, sentences: Iterable[Sequence[str]], kappa: float = 0.1) -> "BigramLM":
        vocab: list[str] = []
        seen = set()
        bigrams: dict[str, dict[str, float]] = {}
        unigrams: dict[str, float] = {}
        for sent in sentences:
            prev = cls.START
            for tok in sent:
                if tok not in seen:
                    seen.add(tok)
                    vocab.append(tok)
                unigrams[tok] = unigrams.get(tok, 0.0) + 1.0
                bigrams.setdefault(prev, {})
                bigrams[prev][tok] = bigrams[prev].get(tok, 0.0) + 1.0
                prev = tok
        if not vocab:
            raise ValueError("no tokens in seed sentences")
        return cls(vocab, bigrams, unigrams, kappa=kappa)

    def vocabulary(self) -> tuple[str, ...]:
        return self._vocab

    def next_logits(self, prefix) -> np.ndarray:
        state = prefix[-1] if prefix else self.START
        row = self._bigrams.get(state, {})
        scores = np.array(
            [
                row.get(tok, 0.0) + self._kappa * (self._unigrams.get(tok, 0.0) + 1.0)
                for tok in self._vocab
            ]
        )
        return np.log(scores)
