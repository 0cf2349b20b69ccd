"""Local explanation of a prediction by a kernel-weighted linear surrogate
over superpixels.

Pipeline: segment the image, sample on/off masks over the segments (the
first sample is the unperturbed instance), rebuild an image per mask with
switched-off segments filled by their mean color, query the black-box
predictor, weight samples by exp(-d^2 / sigma^2) with d the cosine distance
between the mask and the all-ones mask, fit a ridge surrogate with an
unpenalized intercept, and report the top positively-weighted segments.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np
from PIL import Image

from .errors import ContractError, NumericsError, ValidationError
from .rng import RngStream, seeded_stream
from .segmentation import SegmentMap, slic


class PredictFn(Protocol):
    """Batch of RGB images (N x H x W x 3 uint8) -> probabilities (N x L).

    Implementations that cannot serve concurrent batch calls should set a
    ``parallel_safe = False`` attribute; batch drivers must then stay serial.
    """

    def __call__(self, images: np.ndarray) -> np.ndarray: ...


class PredictionFailed(RuntimeError):
    """The black-box predictor raised; the original error is the __cause__."""


@dataclass(frozen=True)
class ExplainConfig:
    n_samples: int = 1000
    target_segments: int = 50
    compactness: float = 10.0
    kernel_width: float = 0.25
    top_k: int = 5
    ridge_lambda: float = 1.0
    seed: int = 0
    batch_size: int = 64

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "target_segments": self.target_segments,
            "compactness": self.compactness,
            "kernel_width": self.kernel_width,
            "top_k": self.top_k,
            "ridge_lambda": self.ridge_lambda,
            "seed": self.seed,
        }


@dataclass
class Explanation:
    """Surrogate fit for one (image, label) pair."""

    label_index: int
    segment_weights: np.ndarray
    intercept: float
    selected_segments: list[int]
    r2: float
    n_samples: int
    config: ExplainConfig = field(default=ExplainConfig())

    def to_dict(self) -> dict:
        return {
            "label_index": self.label_index,
            "segment_weights": [float(w) for w in self.segment_weights],
            "intercept": self.intercept,
            "selected_segments": list(self.selected_segments),
            "r2": self.r2,
            "n_samples": self.n_samples,
            "config": self.config.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def sample_masks(n_segments: int, n_samples: int, rng: RngStream) -> np.ndarray:
    """Binary mask matrix; row 0 is all ones, the rest i.i.d. Bernoulli(0.5)."""
    if n_samples < n_segments + 2:
        raise ContractError(
            f"need at least {n_segments + 2} samples for {n_segments} segments"
        )
    masks = np.empty((n_samples, n_segments))
    masks[0] = 1.0
    masks[1:] = rng.bernoulli(0.5, (n_samples - 1, n_segments))
    return masks


def segment_mean_colors(image: np.ndarray, segmap: SegmentMap) -> np.ndarray:
    """Mean RGB per segment, rounded to uint8."""
    img = np.asarray(image, dtype=np.float64)
    flat = segmap.labels.ravel()
    counts = np.bincount(flat, minlength=segmap.n_segments).astype(np.float64)
    means = np.empty((segmap.n_segments, 3))
    for ch in range(3):
        sums = np.bincount(flat, weights=img[..., ch].ravel(), minlength=segmap.n_segments)
        means[:, ch] = sums / counts
    return np.clip(np.round(means), 0, 255).astype(np.uint8)


def composite(
    image: np.ndarray,
    segmap: SegmentMap,
    mask: np.ndarray,
    baseline: np.ndarray | None = None,
) -> np.ndarray:
    """Keep segments where mask is 1; fill the rest with the baseline color
    (per-segment mean by default)."""
    img = np.asarray(image)
    mask = np.asarray(mask).ravel()
    if mask.shape[0] != segmap.n_segments:
        raise ValidationError(
            f"mask has {mask.shape[0]} entries for {segmap.n_segments} segments"
        )
    if baseline is None:
        baseline = segment_mean_colors(img, segmap)
    out = baseline[segmap.labels]  # H x W x 3 of fill colors
    keep = mask[segmap.labels] > 0
    out[keep] = img[keep]
    return out


def mask_distances(masks: np.ndarray) -> np.ndarray:
    """Cosine distance of each binary mask from the all-ones mask."""
    m = np.asarray(masks, dtype=np.float64)
    on = m.sum(axis=1)
    s = m.shape[1]
    d = np.ones(m.shape[0])
    nz = on > 0
    d[nz] = 1.0 - np.sqrt(on[nz] / s)
    return d


def kernel_weights(distances: np.ndarray, width: float) -> np.ndarray:
    return np.exp(-(np.asarray(distances) ** 2) / width**2)


def fit_surrogate(
    masks: np.ndarray,
    preds: np.ndarray,
    weights: np.ndarray,
    ridge_lambda: float,
):
    """Weighted ridge regression (X'WX + lambda*I) beta = X'Wy with an
    unpenalized intercept; returns (segment weights, intercept, weighted R^2)."""
    x = np.asarray(masks, dtype=np.float64)
    y = np.asarray(preds, dtype=np.float64).ravel()
    w = np.asarray(weights, dtype=np.float64).ravel()
    n, s = x.shape
    if y.shape[0] != n or w.shape[0] != n:
        raise ValidationError("masks, preds, and weights must agree in length")
    if n < s + 2:
        raise ContractError(f"need at least {s + 2} samples for {s} segments")
    if ridge_lambda < 0:
        raise ValidationError("ridge_lambda must be non-negative")

    z = np.hstack([np.ones((n, 1)), x])
    a = z.T @ (w[:, None] * z)
    a[1:, 1:] += ridge_lambda * np.eye(s)
    b = z.T @ (w * y)
    try:
        beta = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise NumericsError(
            "surrogate system is singular; use ridge_lambda > 0"
        ) from exc
    if not np.isfinite(beta).all():
        raise NumericsError("surrogate solve produced non-finite coefficients")

    fitted = z @ beta
    total_w = w.sum()
    y_bar = (w * y).sum() / total_w
    ss_res = (w * (y - fitted) ** 2).sum()
    ss_tot = (w * (y - y_bar) ** 2).sum()
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res <= 1e-12 * max(total_w, 1.0) else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return beta[1:], float(beta[0]), float(r2)


def explain(
    image: np.ndarray,
    predict: Callable[[np.ndarray], np.ndarray],
    label_index: int,
    config: ExplainConfig = ExplainConfig(),
    segmap: SegmentMap | None = None,
) -> Explanation:
    """Explain ``predict``'s probability for one label on one image."""
    img = np.asarray(image)
    if segmap is None:
        segmap = slic(img, config.target_segments, config.compactness)
    s = segmap.n_segments
    if config.n_samples < s + 2:
        raise ContractError(
            f"n_samples={config.n_samples} is too small for {s} segments "
            f"(need at least {s + 2})"
        )
    rng = seeded_stream(config.seed)
    masks = sample_masks(s, config.n_samples, rng)
    baseline = segment_mean_colors(img, segmap)

    preds = np.empty(config.n_samples)
    for start in range(0, config.n_samples, config.batch_size):
        stop = min(start + config.batch_size, config.n_samples)
        batch = np.stack(
            [composite(img, segmap, masks[i], baseline) for i in range(start, stop)]
        )
        try:
            out = np.asarray(predict(batch), dtype=np.float64)
        except Exception as exc:
            raise PredictionFailed(
                f"predict failed on samples {start}..{stop - 1}: {exc}"
            ) from exc
        if out.ndim != 2 or out.shape[0] != stop - start:
            raise ValidationError(
                f"predict returned shape {out.shape} for a batch of {stop - start}"
            )
        if label_index >= out.shape[1]:
            raise ValidationError(
                f"label index {label_index} out of range for {out.shape[1]} outputs"
            )
        preds[start:stop] = out[:, label_index]

    kw = kernel_weights(mask_distances(masks), config.kernel_width)
    seg_weights, intercept, r2 = fit_surrogate(masks, preds, kw, config.ridge_lambda)
    positive = [int(i) for i in np.argsort(-seg_weights) if seg_weights[i] > 0]
    return Explanation(
        label_index=label_index,
        segment_weights=seg_weights,
        intercept=intercept,
        selected_segments=positive[: config.top_k],
        r2=r2,
        n_samples=config.n_samples,
        config=config,
    )


def render_overlay(
    image: np.ndarray,
    segmap: SegmentMap,
    explanation: Explanation,
    tint=(0, 255, 0),
    alpha: float = 0.5,
    dim: float = 0.5,
) -> np.ndarray:
    """Tint the selected segments green and dim everything else."""
    img = np.asarray(image, dtype=np.float64)
    out = img * dim
    if explanation.selected_segments:
        sel = np.isin(segmap.labels, explanation.selected_segments)
        out[sel] = (1.0 - alpha) * img[sel] + alpha * np.asarray(tint, dtype=np.float64)
    return np.clip(np.round(out), 0, 255).astype(np.uint8)


def load_image(path) -> np.ndarray:
    """Read any PIL-supported raster as H x W x 3 uint8 RGB."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def save_image(path, image: np.ndarray) -> None:
    Image.fromarray(np.asarray(image, dtype=np.uint8), mode="RGB").save(path)
