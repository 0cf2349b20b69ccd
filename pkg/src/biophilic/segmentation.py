"""Superpixel segmentation: SLIC clustering in CIELAB + pixel coordinates.

Cluster centers start on a regular grid, pixels are assigned within a
2-step window by the combined color/space distance, and a final pass
enforces connectivity so every output segment is a single 4-connected
region with ids contiguous from 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ValidationError

# sRGB -> XYZ (D65) primaries.
_RGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
_WHITE_D65 = np.array([0.95047, 1.0, 1.08883])


def rgb_to_lab(image: np.ndarray) -> np.ndarray:
    """Convert an H x W x 3 sRGB image (uint8 or [0,1] floats) to CIELAB."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValidationError(f"expected an H x W x 3 image, got shape {arr.shape}")
    if arr.max() > 1.0:
        arr = arr / 255.0
    linear = np.where(arr <= 0.04045, arr / 12.92, ((arr + 0.055) / 1.055) ** 2.4)
    xyz = linear @ _RGB_TO_XYZ.T
    t = xyz / _WHITE_D65
    delta = 6.0 / 29.0
    f = np.where(t > delta**3, np.cbrt(t), t / (3.0 * delta**2) + 4.0 / 29.0)
    lab = np.empty_like(xyz)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


@dataclass
class SegmentMap:
    """Per-pixel segment ids, contiguous 0..n_segments-1."""

    labels: np.ndarray  # H x W int32
    n_segments: int

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def segment_sizes(self) -> np.ndarray:
        return np.bincount(self.labels.ravel(), minlength=self.n_segments)


def _grid_centers(h: int, w: int, target: int):
    step = np.sqrt(h * w / target)
    nx = max(1, round(w / step))
    ny = max(1, round(h / step))
    if nx * ny < 2:
        if w >= h:
            nx = 2
        else:
            ny = 2
    ys = (np.arange(ny) + 0.5) * h / ny
    xs = (np.arange(nx) + 0.5) * w / nx
    cy, cx = np.meshgrid(ys, xs, indexing="ij")
    return cy.ravel(), cx.ravel(), step


def slic(
    image: np.ndarray,
    target_segments: int,
    compactness: float = 10.0,
    iterations: int = 10,
) -> SegmentMap:
    """Segment an RGB image into roughly ``target_segments`` superpixels."""
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValidationError(f"expected an H x W x 3 image, got shape {img.shape}")
    h, w = img.shape[:2]
    if h < 2 or w < 2:
        raise ValidationError("image is too small to segment")
    if target_segments < 2:
        raise ValidationError("target_segments must be at least 2")
    if compactness <= 0:
        raise ValidationError("compactness must be positive")

    lab = rgb_to_lab(img)
    cy, cx, step = _grid_centers(h, w, target_segments)
    k = cy.shape[0]
    clab = lab[np.clip(cy.astype(int), 0, h - 1), np.clip(cx.astype(int), 0, w - 1)]
    spatial_scale = (compactness / step) ** 2
    rows = np.arange(h, dtype=np.float64)
    cols = np.arange(w, dtype=np.float64)

    labels = np.zeros((h, w), dtype=np.int32)
    for _ in range(iterations):
        dist = np.full((h, w), np.inf)
        labels.fill(-1)
        for ki in range(k):
            y0 = max(0, int(cy[ki] - 2 * step))
            y1 = min(h, int(cy[ki] + 2 * step) + 1)
            x0 = max(0, int(cx[ki] - 2 * step))
            x1 = min(w, int(cx[ki] + 2 * step) + 1)
            sub = lab[y0:y1, x0:x1]
            dc = ((sub - clab[ki]) ** 2).sum(axis=2)
            dy = (rows[y0:y1, None] - cy[ki]) ** 2
            dx = (cols[None, x0:x1] - cx[ki]) ** 2
            d = dc + spatial_scale * (dy + dx)
            win = dist[y0:y1, x0:x1]
            better = d < win
            win[better] = d[better]
            labels[y0:y1, x0:x1][better] = ki
        unassigned = labels < 0
        if unassigned.any():
            # Pixels outside every window: take the spatially nearest center.
            uy, ux = np.nonzero(unassigned)
            d2 = (uy[:, None] - cy[None, :]) ** 2 + (ux[:, None] - cx[None, :]) ** 2
            labels[uy, ux] = np.argmin(d2, axis=1)
        flat = labels.ravel()
        counts = np.bincount(flat, minlength=k).astype(np.float64)
        occupied = counts > 0
        yy = np.repeat(rows, w)
        xx = np.tile(cols, h)
        cy_new = np.bincount(flat, weights=yy, minlength=k)
        cx_new = np.bincount(flat, weights=xx, minlength=k)
        cy[occupied] = cy_new[occupied] / counts[occupied]
        cx[occupied] = cx_new[occupied] / counts[occupied]
        for ch in range(3):
            s = np.bincount(flat, weights=lab[..., ch].ravel(), minlength=k)
            clab[occupied, ch] = s[occupied] / counts[occupied]

    labels = _enforce_connectivity(labels, k)
    return SegmentMap(labels=labels, n_segments=int(labels.max()) + 1)


def _enforce_connectivity(labels: np.ndarray, k: int) -> np.ndarray:
    """Keep each cluster's largest 4-connected component; absorb the rest
    into adjacent kept regions, then renumber ids by first appearance."""
    kept = np.full(labels.shape, -1, dtype=np.int32)
    for ki in range(k):
        mask = labels == ki
        if not mask.any():
            continue
        comp, ncomp = ndimage.label(mask)
        if ncomp == 1:
            kept[mask] = ki
            continue
        sizes = np.bincount(comp.ravel())[1:]  # component ids start at 1
        main = int(np.argmax(sizes)) + 1
        kept[comp == main] = ki

    # Orphan pixels adopt an assigned 4-neighbor, sweeping until covered.
    while (kept < 0).any():
        un = kept < 0
        progressed = False
        for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            neigh = np.roll(kept, (dy, dx), axis=(0, 1))
            # roll wraps around; mask out the wrapped edge
            valid = np.ones_like(un)
            if dy == -1:
                valid[-1, :] = False
            elif dy == 1:
                valid[0, :] = False
            if dx == -1:
                valid[:, -1] = False
            elif dx == 1:
                valid[:, 0] = False
            adopt = un & valid & (neigh >= 0)
            if adopt.any():
                kept[adopt] = neigh[adopt]
                un = kept < 0
                progressed = True
        if not progressed:  # cannot happen on a connected grid; guard anyway
            kept[un] = 0
    # Renumber by first appearance in row-major order.
    flat = kept.ravel()
    uniq, first_idx = np.unique(flat, return_index=True)
    appearance = np.argsort(first_idx)
    remap = np.empty(int(uniq.max()) + 1, dtype=np.int32)
    remap[uniq[appearance]] = np.arange(len(uniq), dtype=np.int32)
    return remap[kept]
