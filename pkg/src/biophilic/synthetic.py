"""Synthetic dataset generation for experiments and the acceptance suite.

Embeddings are 512-d Gaussians whose variance concentrates in a random
low-dimensional subspace (mimicking the spectral decay of real encoder
output), plus small ambient noise. Each label fires when a fixed random
linear functional of the embedding is positive, and samples are nudged
along the rule directions until every score clears a margin, so the rule
is recoverable to high F1 from a few thousand samples.
"""

from __future__ import annotations

import numpy as np

from .data import Embedding, LabelRecord


def make_linear_dataset(
    n_samples: int,
    dim: int = 512,
    n_labels: int = 15,
    seed: int = 0,
    margin: float = 0.3,
    signal_rank: int = 24,
    noise_scale: float = 0.15,
    max_push_iters: int = 100,
):
    """Returns (X float32 N x dim, Y int8 N x L, rule weights dim x L).

    Y = (X @ rule > 0) and |X @ rule| >= margin holds element-wise.
    """
    rng = np.random.default_rng(seed)
    basis, _ = np.linalg.qr(rng.standard_normal((dim, signal_rank)))
    rule = basis @ (rng.standard_normal((signal_rank, n_labels)) / np.sqrt(signal_rank))
    x = (
        rng.standard_normal((n_samples, signal_rank)) @ basis.T
        + noise_scale * rng.standard_normal((n_samples, dim))
    )
    # Push violating samples along the rule directions (Gauss-Seidel style;
    # the slight overshoot absorbs cross-talk between correlated columns).
    norms2 = (rule**2).sum(axis=0)
    for _ in range(max_push_iters):
        scores = x @ rule
        violating = np.abs(scores) < margin
        if not violating.any():
            break
        target = np.where(scores >= 0, 1.05 * margin, -1.05 * margin)
        x += np.where(violating, target - scores, 0.0) @ (rule / norms2).T
    scores = x @ rule
    if (np.abs(scores) < margin).any():
        raise RuntimeError("margin enforcement did not converge; lower the margin")
    y = (scores > 0).astype(np.int8)
    return x.astype(np.float32), y, rule


def as_records(x: np.ndarray, y: np.ndarray, prefix: str = "img"):
    """Wrap matrices as Embedding / LabelRecord lists with synthetic ids."""
    width = len(str(x.shape[0] - 1))
    ids = [f"{prefix}{i:0{width}d}" for i in range(x.shape[0])]
    embeddings = [Embedding(id=i, vector=v) for i, v in zip(ids, x)]
    records = [LabelRecord(id=i, labels=row) for i, row in zip(ids, y)]
    return embeddings, records
