#!/usr/bin/env python3
"""Explanation pipeline demo on a synthetic textured image with a planted
black box: the predictor's probability is an affine function of which
superpixels survive, so the surrogate should recover it exactly and the
overlay should highlight the planted dominant segment."""

import argparse
from pathlib import Path

import numpy as np

from biophilic.explain import ExplainConfig, explain, render_overlay, save_image
from biophilic.segmentation import slic


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--segments", type=int, default=25)
    ap.add_argument("--out-dir", default="runs/explain-demo")
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    image = rng.integers(0, 256, size=(120, 120, 3), dtype=np.uint8)
    segmap = slic(image, target_segments=args.segments)
    s = segmap.n_segments

    weights = rng.uniform(0, 0.3 / s, size=s)
    dominant = int(rng.integers(0, s))
    weights[dominant] = 2.0 / s
    orig_flat = image.reshape(-1, 3)
    seg_idx = [np.nonzero((segmap.labels == k).ravel())[0] for k in range(s)]

    def predict(batch):
        flat = batch.reshape(batch.shape[0], -1, 3)
        changed = (flat != orig_flat).any(axis=2)
        on = np.empty((batch.shape[0], s), dtype=bool)
        for k, idx in enumerate(seg_idx):
            on[:, k] = ~changed[:, idx].any(axis=1)
        probs = np.full((batch.shape[0], 15), 0.25)
        probs[:, 0] = 0.05 + on @ weights
        return probs

    config = ExplainConfig(n_samples=max(400, s + 2), ridge_lambda=0.0,
                           seed=args.seed)
    result = explain(image, predict, 0, config, segmap=segmap)
    save_image(out / "input.png", image)
    save_image(out / "overlay.png", render_overlay(image, segmap, result))
    (out / "explanation.json").write_text(result.to_json() + "\n")
    ok = "recovered" if result.selected_segments[0] == dominant else "MISSED"
    print(f"{s} segments; planted dominant {dominant} {ok} "
          f"(top: {result.selected_segments}, R^2 {result.r2:.4f})")
    print(f"outputs in {out}")


if __name__ == "__main__":
    main()
