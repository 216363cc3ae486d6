"""Shared domain types and the deterministic numeric primitives.

Class-id convention used everywhere: labeled classes occupy ids
[0, L), novel (unlabeled) latent classes occupy [L, L+U). A labeled
example's `label` is its class id; an unlabeled example's `label` is the
hidden ground-truth id, read only by evaluation and data generation.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

EPS = 1e-12  # clamp inside every log so losses stay finite on saturated predictions


class InputError(ValueError):
    """An operation rejected its input (shape, range or source violation)."""


class NumericError(RuntimeError):
    """A numeric failure: non-finite loss or gradient during training."""


class ConfigError(ValueError):
    """A run configuration is malformed (unknown key, bad value, hash mismatch)."""


@dataclass(frozen=True)
class DatasetSpec:
    """Counts that fix every shape in the system."""

    L: int
    U: int
    K: int = 1
    feature_dim: int = 16
    seq_len: int = 1

    def __post_init__(self):
        if self.L < 1 or self.U < 1 or self.K < 1:
            raise InputError(f"L, U, K must all be >= 1, got L={self.L} U={self.U} K={self.K}")
        if self.feature_dim < 1 or self.seq_len < 1:
            raise InputError("feature_dim and seq_len must be >= 1")

    @property
    def n_classes(self):
        return self.L + self.U

    @property
    def input_dim(self):
        return self.seq_len * self.feature_dim

    def labeled_ids(self):
        return range(0, self.L)

    def unlabeled_ids(self):
        return range(self.L, self.L + self.U)


@dataclass
class Example:
    """One data instance.

    `label` is None on label-stripped views handed to training code; see
    sampler.strip_hidden_labels.
    """

    features: np.ndarray  # shape (seq_len, feature_dim) or flat (input_dim,)
    status: str  # "labeled" | "unlabeled"
    label: Optional[int]
    view: int = 0

    def __post_init__(self):
        if self.status not in ("labeled", "unlabeled"):
            raise InputError(f"status must be 'labeled' or 'unlabeled', got {self.status!r}")

    @property
    def is_labeled(self):
        return self.status == "labeled"

    def flat_features(self):
        return np.asarray(self.features, dtype=np.float64).reshape(-1)


@dataclass
class ForwardOutput:
    """Per-instance network outputs: embedding, logits and both prediction forms."""

    z: np.ndarray        # embedding vector
    logits: np.ndarray   # length L+U
    y_hat: np.ndarray    # softmax over L+U
    y_tilde: np.ndarray  # sharpened distribution over the U novel heads


@dataclass
class Hyperparams:
    """Fixed training hyper-parameters (temperatures, batch sizing, seed)."""

    tau: float = 0.05
    sr: float = 0.1
    lambda_H: float = 1.0
    batch_size_unlabeled: int = 0  # 0 = use 10 * U
    n_negatives: int = 8
    augment_strength: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.tau <= 0:
            raise InputError(f"tau must be > 0, got {self.tau}")
        if self.sr <= 0:
            raise InputError(f"sr must be > 0, got {self.sr}")
        if self.n_negatives < 1:
            raise InputError("n_negatives must be >= 1")

    def unlabeled_batch(self, spec: DatasetSpec) -> int:
        n = self.batch_size_unlabeled if self.batch_size_unlabeled > 0 else 10 * spec.U
        if n < spec.U:
            raise InputError(f"unlabeled batch size {n} smaller than U={spec.U}")
        return n


def softmax(v, temperature=1.0):
    """Stable softmax of v / temperature (max-subtraction form)."""
    v = np.asarray(v, dtype=np.float64)
    if temperature <= 0:
        raise InputError(f"temperature must be > 0, got {temperature}")
    if not np.all(np.isfinite(v)):
        raise InputError(f"softmax input contains non-finite entries: {v}")
    z = v / temperature
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def sharpen(p, sr, mode="log"):
    """Sharpen a probability vector toward one-hot with temperature sr.

    mode="log" (default) re-softmaxes log-probabilities: softmax(log p / sr),
    the standard temperature semantics; it preserves the argmax and, applied
    to a slice of a softmax output, equals softmax of the corresponding
    logits / sr. mode="prob" softmaxes the raw probabilities / sr.
    """
    p = np.asarray(p, dtype=np.float64)
    if sr <= 0:
        raise InputError(f"sr must be > 0, got {sr}")
    if np.any(p < 0) or np.any(p > 1 + 1e-9):
        raise InputError(f"sharpen input must be a (sub-)probability vector, got {p}")
    if mode == "log":
        return softmax(np.log(np.maximum(p, EPS)), sr)
    if mode == "prob":
        return softmax(p, sr)
    raise InputError(f"unknown sharpen mode {mode!r}")


def cosine_similarity(a, b):
    """Cosine of the angle between a and b; rejects near-zero-norm vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na <= EPS or nb <= EPS:
        raise InputError(f"cosine_similarity needs norms > {EPS}, got {na:.3e} and {nb:.3e}")
    return float(np.dot(a, b) / (na * nb))


def one_hot(idx, n):
    v = np.zeros(n, dtype=np.float64)
    v[idx] = 1.0
    return v
