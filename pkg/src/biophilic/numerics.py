"""Scalar and vector math shared by the model, metrics, and explanation code.

Covers dense matrix products, cosine similarity, the temperature-scaled
contrastive loss, the logistic sigmoid, and binary cross-entropy. All
functions are pure and safe to call concurrently.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError, ShapeError, ValidationError
from .rng import RngStream, derive_seed, seeded_stream  # noqa: F401  (re-exported)

# Probabilities are clamped to [BCE_EPS, 1 - BCE_EPS] before logs, matching
# common framework behavior and keeping the loss finite at P in {0, 1}.
BCE_EPS = 1e-7

# Temperature used by the published encoder's contrastive objective.
DEFAULT_TEMPERATURE = 0.07


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with explicit shape validation."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.ndim}-D and {b.ndim}-D")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"inner dimensions differ: {a.shape} x {b.shape}")
    out = a @ b
    if not np.isfinite(out).all():
        raise DomainError("matmul produced non-finite entries")
    return out


def cosine_sim(v: np.ndarray, w: np.ndarray) -> float:
    """Cosine similarity dot(v, w) / (|v| |w|), clamped into [-1, 1]."""
    v = np.asarray(v, dtype=np.float64).ravel()
    w = np.asarray(w, dtype=np.float64).ravel()
    if v.shape != w.shape:
        raise ShapeError(f"vectors differ in length: {v.shape[0]} vs {w.shape[0]}")
    nv = float(np.linalg.norm(v))
    nw = float(np.linalg.norm(w))
    if nv == 0.0 or nw == 0.0:
        raise DomainError("cosine similarity is undefined for zero-norm vectors")
    return float(np.clip(float(v @ w) / (nv * nw), -1.0, 1.0))


def contrastive_loss(
    anchor: np.ndarray,
    candidates,
    positive_index: int,
    tau: float = DEFAULT_TEMPERATURE,
) -> float:
    """Softmax contrastive loss of the anchor against a candidate set.

    L = -log( exp(sim(a, c_pos)/tau) / sum_j exp(sim(a, c_j)/tau) ),
    computed with log-sum-exp stabilization. The denominator ranges over
    exactly the provided candidates.
    """
    if tau <= 0.0:
        raise DomainError("temperature must be positive")
    candidates = [np.asarray(c, dtype=np.float64) for c in candidates]
    if not candidates:
        raise ValidationError("candidate set is empty")
    if not 0 <= positive_index < len(candidates):
        raise ValidationError(f"positive_index {positive_index} out of range")
    scaled = np.array([cosine_sim(anchor, c) for c in candidates]) / tau
    peak = float(scaled.max())
    lse = peak + math.log(float(np.exp(scaled - peak).sum()))
    return lse - float(scaled[positive_index])


def sigmoid(x):
    """Numerically stable logistic function; accepts scalars or arrays."""
    arr = np.asarray(x, dtype=np.float64)
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    ex = np.exp(arr[~pos])
    out[~pos] = ex / (1.0 + ex)
    if np.isscalar(x) or arr.ndim == 0:
        return float(out)
    return out


def bce_loss(actual, predicted, eps: float = BCE_EPS) -> float:
    """Mean binary cross-entropy over one target/probability vector pair."""
    y = np.asarray(actual, dtype=np.float64).ravel()
    p = np.asarray(predicted, dtype=np.float64).ravel()
    if y.shape != p.shape:
        raise ShapeError(f"vectors differ in length: {y.shape[0]} vs {p.shape[0]}")
    if y.size == 0:
        raise ShapeError("empty vectors")
    p = np.clip(p, eps, 1.0 - eps)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))
