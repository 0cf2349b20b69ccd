#!/usr/bin/env python3
"""Generate a synthetic embedding corpus (BEMB + label CSV + taxonomy copy)
whose labels follow a recoverable linear rule. Useful for exercising the
full pipeline without real artwork embeddings."""

import argparse
import shutil
from pathlib import Path

from biophilic.data import default_manifest_path, default_taxonomy, write_embeddings, write_labels
from biophilic.synthetic import as_records, make_linear_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=2000, help="number of samples")
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--margin", type=float, default=0.3)
    ap.add_argument("--out-dir", default="runs/synthetic-data")
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    x, y, _ = make_linear_dataset(args.n, seed=args.seed, margin=args.margin)
    embeddings, records = as_records(x, y)
    taxonomy = default_taxonomy()
    write_embeddings(out / "images.bemb", embeddings)
    write_labels(out / "labels.csv", records, taxonomy)
    shutil.copy(default_manifest_path("biophilic15"), out / "taxonomy.json")
    print(f"wrote {args.n} embeddings + labels to {out}")


if __name__ == "__main__":
    main()
