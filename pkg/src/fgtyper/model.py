"""Three-way entailment classifier with gated topic fusion.

The classifier scores (premise, hypothesis, topics) triples as entailment /
neutral / contradiction. A text encoder produces a context vector for the
joint premise--hypothesis sequence and a topic vector for the concatenated
topic terms; an elementwise gate

    lambda = sigmoid(W h_t + U h_c)
    h      = h_c + lambda * (P h_t)        (P optional, identity if absent)

fuses them, and a linear head plus softmax yields class probabilities.
Training minimizes the mean generalized cross-entropy ``(1 - p^q) / q``
(or plain cross-entropy) by stochastic gradient descent with analytic
gradients; everything is plain numpy and deterministic per seed.

The bundled trainable encoder embeds word tokens and pools them with a
fixed position-weighted mean, so token order influences the vector while
gradients stay simple. Any frozen external encoder can be plugged in
through the :class:`TextEncoder` protocol instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from ._validation import check_nonempty_str, check_open_unit
from .jsonl import read_json, write_json
from .nli_data import LABELS
from .text import STOPWORDS, tokenize

SEP_MARKER = "[sep]"
UNK_TOKEN = "<unk>"
MATCH_TOKEN = "<match>"
TOPIC_DELIMITER = ", "
POSITION_SLOPE = 0.5
EMBED_INIT_STD = 1.0
_PROB_FLOOR = 1e-12
_GATE_CLIP = 30.0


class TextEncoder(Protocol):
    """Deterministic text-to-vector encoder of fixed dimension."""

    def encode(self, text: str) -> np.ndarray: ...

    def dimension(self) -> int: ...


def joined_context(premise: str, hypothesis: str) -> str:
    """Premise and hypothesis as one separator-marked sequence."""
    check_nonempty_str(premise, "premise")
    check_nonempty_str(hypothesis, "hypothesis")
    return f"{premise} {SEP_MARKER} {hypothesis}"


def joined_topics(topics: Sequence[str]) -> str:
    return TOPIC_DELIMITER.join(topics)


def encode_context(encoder: TextEncoder, premise: str, hypothesis: str) -> np.ndarray:
    """Pooled vector for the joint premise--hypothesis sequence."""
    return encoder.encode(joined_context(premise, hypothesis))


def encode_topics(encoder: TextEncoder, topics: Sequence[str]) -> np.ndarray:
    """Pooled vector for the delimiter-joined topics; zero if none given."""
    if not topics:
        return np.zeros(encoder.dimension())
    return encoder.encode(joined_topics(topics))


def position_weights(length: int, slope: float = POSITION_SLOPE) -> np.ndarray:
    """Linear ramp around 1 that sums to ``length`` (so pooling divides by it)."""
    if length <= 1:
        return np.ones(length)
    ramp = np.arange(length) / (length - 1) - 0.5
    return 1.0 + slope * ramp


class TokenEmbeddingEncoder:
    """Trainable word-embedding encoder with position-weighted mean pooling.

    Token order shifts the pooled vector through a fixed linear position
    ramp. For separator-marked sequences (premise ``[sep]`` hypothesis) the
    encoder also measures lexical overlap: the fraction of the hypothesis
    segment's content tokens that occur in the premise segment. The overlap
    scales a dedicated trainable embedding row added to the pooled vector,
    which is the cheapest stand-in for the premise/hypothesis token
    interactions a full attention encoder would compute; without it, no
    linear function of a token bag can express whether the hypothesis
    matches the premise.
    """

    def __init__(self, vocab: Sequence[str], embeddings: np.ndarray):
        self.vocab = tuple(vocab)
        self.index = {tok: i for i, tok in enumerate(self.vocab)}
        self.embeddings = np.asarray(embeddings, dtype=float)
        if self.embeddings.shape[0] != len(self.vocab):
            raise ValueError("embedding rows must match vocabulary size")

    @classmethod
    def build(cls, texts: Sequence[str], dim: int, rng: np.random.Generator) -> "TokenEmbeddingEncoder":
        seen = set()
        for text in texts:
            seen.update(cls.text_tokens(text))
        special = [UNK_TOKEN, SEP_MARKER, MATCH_TOKEN]
        vocab = special + sorted(seen - set(special))
        embeddings = rng.normal(0.0, EMBED_INIT_STD, size=(len(vocab), dim))
        return cls(vocab, embeddings)

    @staticmethod
    def text_tokens(text: str) -> list[str]:
        """Word tokens; the separator marker survives as its own token."""
        out: list[str] = []
        for chunk in text.split():
            if chunk == SEP_MARKER:
                out.append(SEP_MARKER)
            else:
                out.extend(tokenize(chunk))
        return out

    @staticmethod
    def overlap_fraction(tokens: Sequence[str]) -> float:
        """Hypothesis/premise content-token overlap for [sep]-joined input."""
        if SEP_MARKER not in tokens:
            return 0.0
        cut = tokens.index(SEP_MARKER)
        left = {t for t in tokens[:cut] if t not in STOPWORDS}
        right = {t for t in tokens[cut + 1 :] if t not in STOPWORDS}
        if not right:
            return 0.0
        return len(left & right) / len(right)

    def token_ids(self, text: str) -> list[int]:
        unk = self.index[UNK_TOKEN]
        return [self.index.get(tok, unk) for tok in self.text_tokens(text)]

    def dimension(self) -> int:
        return self.embeddings.shape[1]

    def pool(self, ids: Sequence[int], overlap: float = 0.0) -> np.ndarray:
        if not ids:
            base = np.zeros(self.dimension())
        else:
            weights = position_weights(len(ids))
            base = weights @ self.embeddings[list(ids)] / len(ids)
        if overlap:
            base = base + overlap * self.embeddings[self.index[MATCH_TOKEN]]
        return base

    def encode(self, text: str) -> np.ndarray:
        tokens = self.text_tokens(text)
        return self.pool(self.token_ids(text), self.overlap_fraction(tokens))


@dataclass
class GatedFusionParams:
    """Learnable gate matrices; ``projection`` may be None (identity)."""

    w_gate: np.ndarray
    u_gate: np.ndarray
    projection: np.ndarray | None = None

    def __post_init__(self):
        d = self.w_gate.shape[0]
        for name, mat in (("w_gate", self.w_gate), ("u_gate", self.u_gate)):
            if mat.shape != (d, d):
                raise ValueError(f"{name} must be square d x d, got {mat.shape}")
        if self.projection is not None and self.projection.shape != (d, d):
            raise ValueError("projection must be d x d")


def _sigmoid(a: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(a, -_GATE_CLIP, _GATE_CLIP)))


def gated_fuse(h_c: np.ndarray, h_t: np.ndarray, params: GatedFusionParams) -> np.ndarray:
    """Fused representation ``h_c + lambda * (P h_t)``."""
    h_c = np.asarray(h_c, dtype=float)
    h_t = np.asarray(h_t, dtype=float)
    if h_c.shape != h_t.shape or h_c.shape != (params.w_gate.shape[0],):
        raise ValueError(
            f"shape mismatch: h_c {h_c.shape}, h_t {h_t.shape}, "
            f"gate {params.w_gate.shape}"
        )
    lam = _sigmoid(params.w_gate @ h_t + params.u_gate @ h_c)
    h_tilde = params.projection @ h_t if params.projection is not None else h_t
    return h_c + lam * h_tilde


def gce_loss(probabilities, q: float) -> float:
    """Sum of ``(1 - p^q) / q`` over predicted true-label probabilities."""
    check_open_unit(q, "q", include_one=True)
    probs = np.asarray(probabilities, dtype=float)
    if probs.size == 0:
        raise ValueError("probabilities must be non-empty")
    if np.any(probs <= 0.0) or np.any(probs > 1.0):
        raise ValueError("each probability must lie in (0, 1]")
    return float(np.sum((1.0 - probs**q) / q))


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max()
    w = np.exp(shifted)
    return w / w.sum()


class EntailmentClassifier(ClassifierMixin, BaseEstimator):
    """Gated-topic entailment classifier trained with a noise-robust loss.

    Parameters
    ----------
    dim : embedding dimension of the bundled trainable encoder.
    q : order of the generalized cross-entropy loss, in (0, 1].
    loss : "gce" or "ce".
    epochs, learning_rate, batch_size, seed : SGD settings.
    use_projection : learn a projection matrix for the topic vector.
    encoder : optional frozen :class:`TextEncoder`; when given, only the
        gate, projection and head are trained and ``dim`` is taken from it.
    train_encoder : update the bundled encoder's embeddings during fit
        (ignored for a frozen external encoder).
    """

    def __init__(
        self,
        dim: int = 32,
        q: float = 0.7,
        loss: str = "gce",
        epochs: int = 10,
        learning_rate: float = 1e-5,
        batch_size: int = 16,
        seed: int = 0,
        use_projection: bool = False,
        encoder: TextEncoder | None = None,
        train_encoder: bool = True,
    ):
        self.dim = dim
        self.q = q
        self.loss = loss
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.seed = seed
        self.use_projection = use_projection
        self.encoder = encoder
        self.train_encoder = train_encoder

    # -- construction ------------------------------------------------------

    def _validate_hyperparams(self):
        check_open_unit(self.q, "q", include_one=True)
        if self.loss not in ("gce", "ce"):
            raise ValueError(f"loss must be 'gce' or 'ce', got {self.loss!r}")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")

    def _init_state(self, X):
        rng = np.random.default_rng(self.seed)
        if self.encoder is not None:
            self.encoder_ = self.encoder
            d = self.encoder.dimension()
            self._toy_encoder = False
        else:
            texts = [joined_context(p, h) for p, h, _ in X]
            texts += [joined_topics(t) for _, _, t in X if t]
            self.encoder_ = TokenEmbeddingEncoder.build(texts, self.dim, rng)
            d = self.dim
            self._toy_encoder = True
        self.dim_ = d
        gate_std = 1.0 / np.sqrt(d)
        self.gate_ = GatedFusionParams(
            w_gate=rng.normal(0.0, gate_std, size=(d, d)),
            u_gate=rng.normal(0.0, gate_std, size=(d, d)),
            projection=np.eye(d) if self.use_projection else None,
        )
        self.head_w_ = np.zeros((len(LABELS), d))
        self.head_b_ = np.zeros(len(LABELS))
        self.classes_ = np.array(LABELS)

    @staticmethod
    def _check_X(X):
        checked = []
        for i, row in enumerate(X):
            try:
                premise, hypothesis, topics = row
            except (TypeError, ValueError):
                raise ValueError(
                    f"X[{i}] must be a (premise, hypothesis, topics) triple"
                ) from None
            check_nonempty_str(premise, f"X[{i}] premise")
            check_nonempty_str(hypothesis, f"X[{i}] hypothesis")
            checked.append((premise, hypothesis, tuple(topics)))
        return checked

    def _check_y(self, y):
        labels = list(y)
        bad = sorted({lab for lab in labels if lab not in LABELS})
        if bad:
            raise ValueError(f"unknown labels {bad}; expected one of {LABELS}")
        return np.array([LABELS.index(lab) for lab in labels])

    # -- forward / backward -------------------------------------------------

    def _example_state(self, premise, hypothesis, topics):
        """Precompute per-example encoder state used by forward and backward."""
        if self._toy_encoder:
            enc = self.encoder_
            ctx = joined_context(premise, hypothesis)
            ctx_tokens = enc.text_tokens(ctx)
            ids_c = [enc.index.get(t, enc.index[UNK_TOKEN]) for t in ctx_tokens]
            ids_t = enc.token_ids(joined_topics(topics)) if topics else []
            return {
                "ids_c": ids_c,
                "ids_t": ids_t,
                "overlap": enc.overlap_fraction(ctx_tokens),
            }
        h_c = encode_context(self.encoder_, premise, hypothesis)
        h_t = encode_topics(self.encoder_, topics)
        return {"h_c": np.asarray(h_c, dtype=float), "h_t": np.asarray(h_t, dtype=float)}

    def _vectors(self, state):
        if self._toy_encoder:
            enc = self.encoder_
            return enc.pool(state["ids_c"], state["overlap"]), enc.pool(state["ids_t"])
        return state["h_c"], state["h_t"]

    def _forward(self, state):
        h_c, h_t = self._vectors(state)
        a = self.gate_.w_gate @ h_t + self.gate_.u_gate @ h_c
        lam = _sigmoid(a)
        h_tilde = (
            self.gate_.projection @ h_t if self.gate_.projection is not None else h_t
        )
        h = h_c + lam * h_tilde
        z = self.head_w_ @ h + self.head_b_
        p = _softmax(z)
        return {"h_c": h_c, "h_t": h_t, "lam": lam, "h_tilde": h_tilde, "h": h, "p": p}

    def _example_loss(self, p_true: float) -> float:
        p_true = max(p_true, _PROB_FLOOR)
        if self.loss == "ce":
            return -np.log(p_true)
        return (1.0 - p_true**self.q) / self.q

    def _backward(self, state, fwd, y_idx: int, grads):
        p = fwd["p"]
        p_true = max(p[y_idx], _PROB_FLOOR)
        scale = 1.0 if self.loss == "ce" else p_true**self.q
        dz = scale * p.copy()
        dz[y_idx] -= scale

        grads["head_w"] += np.outer(dz, fwd["h"])
        grads["head_b"] += dz
        dh = self.head_w_.T @ dz

        dh_tilde = fwd["lam"] * dh
        dlam = fwd["h_tilde"] * dh
        da = fwd["lam"] * (1.0 - fwd["lam"]) * dlam
        grads["w_gate"] += np.outer(da, fwd["h_t"])
        grads["u_gate"] += np.outer(da, fwd["h_c"])

        dh_c = dh + self.gate_.u_gate.T @ da
        if self.gate_.projection is not None:
            grads["projection"] += np.outer(dh_tilde, fwd["h_t"])
            dh_t = self.gate_.projection.T @ dh_tilde + self.gate_.w_gate.T @ da
        else:
            dh_t = dh_tilde + self.gate_.w_gate.T @ da

        if self._toy_encoder and self.train_encoder:
            emb = grads["embeddings"]
            ids_c, ids_t = state["ids_c"], state["ids_t"]
            if ids_c:
                w = position_weights(len(ids_c)) / len(ids_c)
                for i, tid in enumerate(ids_c):
                    emb[tid] += w[i] * dh_c
            if state["overlap"]:
                emb[self.encoder_.index[MATCH_TOKEN]] += state["overlap"] * dh_c
            if ids_t:
                w = position_weights(len(ids_t)) / len(ids_t)
                for i, tid in enumerate(ids_t):
                    emb[tid] += w[i] * dh_t

    def _zero_grads(self):
        grads = {
            "w_gate": np.zeros_like(self.gate_.w_gate),
            "u_gate": np.zeros_like(self.gate_.u_gate),
            "head_w": np.zeros_like(self.head_w_),
            "head_b": np.zeros_like(self.head_b_),
        }
        if self.gate_.projection is not None:
            grads["projection"] = np.zeros_like(self.gate_.projection)
        if self._toy_encoder and self.train_encoder:
            grads["embeddings"] = np.zeros_like(self.encoder_.embeddings)
        return grads

    def _apply_grads(self, grads, scale: float):
        self.gate_.w_gate -= scale * grads["w_gate"]
        self.gate_.u_gate -= scale * grads["u_gate"]
        if self.gate_.projection is not None:
            self.gate_.projection -= scale * grads["projection"]
        self.head_w_ -= scale * grads["head_w"]
        self.head_b_ -= scale * grads["head_b"]
        if "embeddings" in grads:
            self.encoder_.embeddings -= scale * grads["embeddings"]

    # -- estimator API -------------------------------------------------------

    def fit(self, X, y):
        """Train on (premise, hypothesis, topics) triples and label strings."""
        self._validate_hyperparams()
        X = self._check_X(X)
        y_idx = self._check_y(y)
        if len(X) != len(y_idx):
            raise ValueError("X and y length mismatch")
        if not X:
            raise ValueError("training set must be non-empty")
        self._init_state(X)

        states = [self._example_state(*row) for row in X]
        rng = np.random.default_rng(np.random.SeedSequence(entropy=self.seed, spawn_key=(7,)))
        self.loss_trace_ = []
        for _ in range(self.epochs):
            order = rng.permutation(len(states))
            for start in range(0, len(order), self.batch_size):
                batch = order[start : start + self.batch_size]
                grads = self._zero_grads()
                for idx in batch:
                    fwd = self._forward(states[idx])
                    self._backward(states[idx], fwd, y_idx[idx], grads)
                self._apply_grads(grads, self.learning_rate / len(batch))
            self.loss_trace_.append(self._mean_loss(states, y_idx))
        self.n_iter_ = self.epochs
        return self

    def _mean_loss(self, states, y_idx) -> float:
        total = 0.0
        for state, y in zip(states, y_idx):
            fwd = self._forward(state)
            total += self._example_loss(fwd["p"][y])
        if not np.isfinite(total):
            raise FloatingPointError("non-finite training loss")
        return float(total) / len(states)

    def _require_fitted(self):
        if not hasattr(self, "head_w_"):
            raise NotFittedError(
                "This EntailmentClassifier instance is not fitted yet."
            )

    def predict_proba(self, X) -> np.ndarray:
        """(n, 3) probabilities in ``classes_`` order (entailment first)."""
        self._require_fitted()
        X = self._check_X(X)
        out = np.empty((len(X), len(LABELS)))
        for i, row in enumerate(X):
            fwd = self._forward(self._example_state(*row))
            out[i] = fwd["p"]
        return out

    def predict(self, X) -> np.ndarray:
        proba = self.predict_proba(X)
        return self.classes_[np.argmax(proba, axis=1)]

    def predict_one(self, premise: str, hypothesis: str, topics: Sequence[str] = ()) -> np.ndarray:
        """Probability triple (entailment, neutral, contradiction)."""
        return self.predict_proba([(premise, hypothesis, tuple(topics))])[0]

    def score_on(self, X, y) -> float:
        """Mean loss of the current parameters on a labeled set."""
        self._require_fitted()
        X = self._check_X(X)
        y_idx = self._check_y(y)
        states = [self._example_state(*row) for row in X]
        return self._mean_loss(states, y_idx)

    # -- flat parameter access (used by the gradient checks) -----------------

    def _param_items(self):
        items = []
        if self._toy_encoder and self.train_encoder:
            items.append(("embeddings", self.encoder_.embeddings))
        items.append(("w_gate", self.gate_.w_gate))
        items.append(("u_gate", self.gate_.u_gate))
        if self.gate_.projection is not None:
            items.append(("projection", self.gate_.projection))
        items.append(("head_w", self.head_w_))
        items.append(("head_b", self.head_b_))
        return items

    def parameter_vector(self) -> np.ndarray:
        self._require_fitted()
        return np.concatenate([arr.ravel() for _, arr in self._param_items()])

    def set_parameter_vector(self, vec: np.ndarray) -> None:
        self._require_fitted()
        vec = np.asarray(vec, dtype=float)
        offset = 0
        for _, arr in self._param_items():
            arr.flat[:] = vec[offset : offset + arr.size]
            offset += arr.size
        if offset != vec.size:
            raise ValueError(f"expected {offset} parameters, got {vec.size}")

    def gradient_on(self, X, y) -> np.ndarray:
        """Flat analytic gradient of the mean loss over (X, y)."""
        self._require_fitted()
        X = self._check_X(X)
        y_idx = self._check_y(y)
        states = [self._example_state(*row) for row in X]
        grads = self._zero_grads()
        for state, yi in zip(states, y_idx):
            fwd = self._forward(state)
            self._backward(state, fwd, yi, grads)
        flat = []
        for name, arr in self._param_items():
            flat.append((grads[name] / len(states)).ravel())
        return np.concatenate(flat)

    # -- persistence ---------------------------------------------------------

    def to_checkpoint(self) -> dict:
        self._require_fitted()
        if not self._toy_encoder:
            raise ValueError(
                "only models with the bundled token encoder can be checkpointed; "
                "external encoders must be re-attached by the caller"
            )
        return {
            "format": "fgtyper-model",
            "version": 1,
            "dim": self.dim_,
            "q": self.q,
            "loss": self.loss,
            "encoder": {
                "type": "token_embedding",
                "vocab": list(self.encoder_.vocab),
                "position_slope": POSITION_SLOPE,
            },
            "arrays": {
                "embeddings": self.encoder_.embeddings.tolist(),
                "w_gate": self.gate_.w_gate.tolist(),
                "u_gate": self.gate_.u_gate.tolist(),
                "projection": (
                    None
                    if self.gate_.projection is None
                    else self.gate_.projection.tolist()
                ),
                "head_w": self.head_w_.tolist(),
                "head_b": self.head_b_.tolist(),
            },
            "classes": list(LABELS),
            "train": {
                "epochs": self.epochs,
                "learning_rate": self.learning_rate,
                "batch_size": self.batch_size,
                "seed": self.seed,
            },
            "loss_trace": [float(v) for v in getattr(self, "loss_trace_", [])],
        }

    @classmethod
    def from_checkpoint(cls, payload: dict) -> "EntailmentClassifier":
        if payload.get("format") != "fgtyper-model":
            raise ValueError("not an entailment-model checkpoint")
        arrays = payload["arrays"]
        train = payload.get("train", {})
        clf = cls(
            dim=int(payload["dim"]),
            q=float(payload["q"]),
            loss=payload["loss"],
            epochs=int(train.get("epochs", 10)),
            learning_rate=float(train.get("learning_rate", 1e-5)),
            batch_size=int(train.get("batch_size", 16)),
            seed=int(train.get("seed", 0)),
            use_projection=arrays["projection"] is not None,
        )
        clf.encoder_ = TokenEmbeddingEncoder(
            payload["encoder"]["vocab"], np.array(arrays["embeddings"], dtype=float)
        )
        clf._toy_encoder = True
        clf.dim_ = int(payload["dim"])
        clf.gate_ = GatedFusionParams(
            w_gate=np.array(arrays["w_gate"], dtype=float),
            u_gate=np.array(arrays["u_gate"], dtype=float),
            projection=(
                None
                if arrays["projection"] is None
                else np.array(arrays["projection"], dtype=float)
            ),
        )
        clf.head_w_ = np.array(arrays["head_w"], dtype=float)
        clf.head_b_ = np.array(arrays["head_b"], dtype=float)
        clf.classes_ = np.array(payload["classes"])
        clf.loss_trace_ = [float(v) for v in payload.get("loss_trace", [])]
        clf.n_iter_ = len(clf.loss_trace_)
        return clf


def save_model(clf: EntailmentClassifier, path) -> None:
    write_json(path, clf.to_checkpoint())


def load_model(path) -> EntailmentClassifier:
    return EntailmentClassifier.from_checkpoint(read_json(path))
