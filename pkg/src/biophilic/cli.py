"""Command-line interface: split, train, hpo, eval, predict, tag, gallery,
and explain over the package's file formats.

All randomness is controlled by --seed (default: the BIOPHILIC_SEED
environment variable, else 0). Exit codes: 0 success, 1 IO/validation
failure (with a machine-parseable ``error:`` line on stderr), 2 usage.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import data as dio
from . import explain as xp
from . import training
from .decoder import load_checkpoint
from .errors import BiophilicError, ValidationError
from .metrics import classification_report
from .provider import EmbeddingProvider, make_predict_fn
from .tagging import CURATION_THRESHOLD, binarize, build_gallery, make_tags
from .training import HpoSpace, TrainConfig, hpo_search, predict_probs, train


def _default_seed() -> int:
    env = os.environ.get("BIOPHILIC_SEED")
    return int(env) if env else 0


def _emit(obj, fmt: str, stream=None) -> None:
    stream = stream or sys.stdout
    if fmt == "json":
        stream.write(json.dumps(obj, indent=2) + "\n")
    else:
        _emit_text(obj, stream, indent=0)


def _emit_text(obj, stream, indent: int) -> None:
    pad = "  " * indent
    if isinstance(obj, dict):
        for k, v in obj.items():
            if isinstance(v, (dict, list)):
                stream.write(f"{pad}{k}:\n")
                _emit_text(v, stream, indent + 1)
            else:
                stream.write(f"{pad}{k}: {v}\n")
    elif isinstance(obj, list):
        for v in obj:
            if isinstance(v, (dict, list)):
                _emit_text(v, stream, indent)
                stream.write("\n" if indent == 0 else "")
            else:
                stream.write(f"{pad}- {v}\n")
    else:
        stream.write(f"{pad}{obj}\n")


def _write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_model(path):
    params, _ = load_checkpoint(path)
    return params


def _dataset_for(args, taxonomy, ids=None):
    embeddings = dio.read_embeddings(args.embeddings)
    records = dio.read_labels(args.labels, taxonomy)
    return dio.build_dataset(embeddings, records, ids=ids)


def _parse_triplet(text, cast):
    parts = [p for p in text.split(",") if p]
    if len(parts) != 3:
        raise ValidationError(f"expected three comma-separated values, got {text!r}")
    return tuple(cast(p) for p in parts)


def _train_config(args) -> TrainConfig:
    base = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            base = json.load(fh)
    cfg = TrainConfig.from_dict(base) if base else TrainConfig()
    overrides = {}
    if args.optimizer is not None:
        overrides["optimizer"] = args.optimizer
    if args.lr is not None:
        overrides["learning_rate"] = args.lr
    if args.batch_size is not None:
        overrides["batch_size"] = args.batch_size
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "threshold", None) is not None:
        overrides["eval_threshold"] = args.threshold
    if getattr(args, "dropout", None) is not None:
        overrides["dropout"] = args.dropout
    if "seed" not in base and "seed" not in overrides:
        overrides["seed"] = _default_seed()
    return replace(cfg, **overrides)


def cmd_split(args) -> int:
    embeddings = dio.read_embeddings(args.embeddings)
    ids = [e.id for e in embeddings]
    seed = args.seed if args.seed is not None else _default_seed()
    counts = _parse_triplet(args.counts, int) if args.counts else None
    ratios = _parse_triplet(args.ratios, float)
    spec = dio.split_dataset(ids, ratios=ratios, seed=seed, counts=counts)
    dio.save_split(spec, args.out)
    _emit(
        {
            "out": str(args.out),
            "train": len(spec.train_ids),
            "val": len(spec.val_ids),
            "test": len(spec.test_ids),
        },
        args.format,
    )
    return 0


def cmd_train(args) -> int:
    taxonomy = dio.load_taxonomy(args.taxonomy)
    split = dio.load_split(args.split)
    embeddings = dio.read_embeddings(args.embeddings)
    records = dio.read_labels(args.labels, taxonomy)
    train_ds = dio.build_dataset(embeddings, records, ids=split.train_ids)
    val_ds = dio.build_dataset(embeddings, records, ids=split.val_ids)
    cfg = _train_config(args)
    report = train(
        cfg, train_ds, val_ds, taxonomy,
        checkpoint_path=args.checkpoint, history_path=args.history,
    )
    out = {"config": cfg.to_dict(), **report.to_dict()}
    _emit(out, args.format)
    return 0


def cmd_hpo(args) -> int:
    taxonomy = dio.load_taxonomy(args.taxonomy)
    split = dio.load_split(args.split)
    embeddings = dio.read_embeddings(args.embeddings)
    records = dio.read_labels(args.labels, taxonomy)
    train_ds = dio.build_dataset(embeddings, records, ids=split.train_ids)
    val_ds = dio.build_dataset(embeddings, records, ids=split.val_ids)
    seed = args.seed if args.seed is not None else _default_seed()
    trials: list[dict] = []
    best = hpo_search(
        HpoSpace(),
        trials=args.trials,
        epochs_per_trial=args.epochs,
        train_ds=train_ds,
        val_ds=val_ds,
        taxonomy=taxonomy,
        seed=seed,
        jobs=args.jobs,
        on_trial=lambda r: trials.append({
            "optimizer": r.optimizer,
            "learning_rate": r.learning_rate,
            "val_weighted_f1": r.score,
            "error": r.error,
        }),
    )
    _emit({"best": best.to_dict(), "trials": trials}, args.format)
    return 0


def cmd_eval(args) -> int:
    taxonomy = dio.load_taxonomy(args.taxonomy)
    params = _load_model(args.checkpoint)
    ids = None
    if args.split:
        spec = dio.load_split(args.split)
        ids = getattr(spec, f"{args.subset}_ids")
    ds = _dataset_for(args, taxonomy, ids=ids)
    probs = predict_probs(params, ds.x)
    report = classification_report(binarize(probs, args.threshold), ds.y, taxonomy)
    _emit(report.to_dict(), args.format)
    if args.out:
        _write_json(args.out, report.to_dict())
    return 0


def cmd_predict(args) -> int:
    taxonomy = dio.load_taxonomy(args.taxonomy)
    params = _load_model(args.checkpoint)
    if params.n_labels != len(taxonomy):
        raise ValidationError(
            f"checkpoint has {params.n_labels} outputs, taxonomy has {len(taxonomy)}"
        )
    embeddings = dio.read_embeddings(args.embeddings)
    x = np.stack([e.vector for e in embeddings]).astype(np.float32)
    probs = predict_probs(params, x)
    out = [
        {"id": e.id, "probabilities": [float(p) for p in row]}
        for e, row in zip(embeddings, probs)
    ]
    _emit(out, args.format)
    if args.out:
        _write_json(args.out, out)
    return 0


def _tag_results(args, taxonomy):
    params = _load_model(args.checkpoint)
    if params.n_labels != len(taxonomy):
        raise ValidationError(
            f"checkpoint has {params.n_labels} outputs, taxonomy has {len(taxonomy)}"
        )
    embeddings = dio.read_embeddings(args.embeddings)
    x = np.stack([e.vector for e in embeddings]).astype(np.float32)
    probs = predict_probs(params, x)
    return [
        make_tags(row, taxonomy, threshold=args.threshold, image_id=e.id)
        for e, row in zip(embeddings, probs)
    ]


def cmd_tag(args) -> int:
    taxonomy = dio.load_taxonomy(args.taxonomy)
    results = [r.to_dict() for r in _tag_results(args, taxonomy)]
    _emit(results, args.format)
    if args.out:
        _write_json(args.out, results)
    return 0


def cmd_gallery(args) -> int:
    taxonomy = dio.load_taxonomy(args.taxonomy)
    results = _tag_results(args, taxonomy)
    manifest = build_gallery(results, metadata={
        "checkpoint_sha256": _sha256(args.checkpoint),
        "taxonomy_sha256": taxonomy.content_hash(),
        "threshold": args.threshold,
    })
    _emit(manifest.to_dict(), args.format)
    if args.out:
        _write_json(args.out, manifest.to_dict())
    return 0


def _explain_one(job) -> dict:
    (image_path, checkpoint, taxonomy_path, provider_cmd,
     label, cfg_dict, out_dir) = job
    taxonomy = dio.load_taxonomy(taxonomy_path)
    params = _load_model(checkpoint)
    image = xp.load_image(image_path)
    config = xp.ExplainConfig(**cfg_dict)
    with EmbeddingProvider(provider_cmd) as provider:
        predict = make_predict_fn(provider, params)
        if label is None:
            probs = predict(image[None])[0]
            label_index = int(np.argmax(probs))
        elif label.isdigit():
            label_index = int(label)
        else:
            if label not in taxonomy.labels:
                raise ValidationError(f"unknown label {label!r}")
            label_index = taxonomy.index(label)
        segmap = xp.slic(image, config.target_segments, config.compactness)
        result = xp.explain(image, predict, label_index, config, segmap=segmap)
    stem = Path(image_path).stem
    out_json = Path(out_dir) / f"{stem}.explanation.json"
    out_png = Path(out_dir) / f"{stem}.overlay.png"
    with open(out_json, "w", encoding="utf-8") as fh:
        fh.write(result.to_json() + "\n")
    xp.save_image(out_png, xp.render_overlay(image, segmap, result))
    return {
        "image": str(image_path),
        "label": taxonomy.labels[label_index],
        "selected_segments": result.selected_segments,
        "r2": result.r2,
        "explanation": str(out_json),
        "overlay": str(out_png),
    }


def cmd_explain(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    cfg = {
        "n_samples": args.samples,
        "target_segments": args.segments,
        "kernel_width": args.kernel_width,
        "top_k": args.top_k,
        "ridge_lambda": args.ridge_lambda,
        "seed": seed,
    }
    os.makedirs(args.out_dir, exist_ok=True)
    jobs = [
        (img, args.checkpoint, args.taxonomy, args.provider_cmd, args.label,
         cfg, args.out_dir)
        for img in args.image
    ]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_explain_one, jobs))
    else:
        results = [_explain_one(j) for j in jobs]
    _emit(results, args.format)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="biophilic",
        description="Biophilic artwork classification, tagging, and explanation.",
    )
    parser.add_argument("--format", choices=("json", "text"), default="json",
                        help="stdout rendering (default: json)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", help="deterministic train/val/test split")
    p.add_argument("--embeddings", required=True, help="BEMB file supplying the ids")
    p.add_argument("--out", required=True, help="where to write the split JSON")
    p.add_argument("--ratios", default="0.7,0.2,0.1", help="train,val,test ratios")
    p.add_argument("--counts", default=None, help="explicit train,val,test sizes")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train the decoder head")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--checkpoint", required=True, help="output BDEC path")
    p.add_argument("--history", default=None, help="per-epoch JSON-lines file")
    p.add_argument("--config", default=None, help="JSON TrainConfig file")
    p.add_argument("--optimizer", choices=("adam", "sgd"), default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--threshold", type=float, default=None, help="eval threshold")
    p.add_argument("--dropout", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("hpo", help="optimizer/learning-rate search")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_hpo)

    p = sub.add_parser("eval", help="classification report on labeled data")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--split", default=None, help="restrict to one side of a split")
    p.add_argument("--subset", choices=("train", "val", "test"), default="test")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="per-image probability vectors")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("tag", help="tags, dominant label, and biophilic flag")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--threshold", type=float, default=CURATION_THRESHOLD)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_tag)

    p = sub.add_parser("gallery", help="curated gallery manifest")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--threshold", type=float, default=CURATION_THRESHOLD)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gallery)

    p = sub.add_parser("explain", help="superpixel surrogate explanation")
    p.add_argument("--image", action="append", required=True,
                   help="image to explain (repeatable)")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--provider-cmd", required=True,
                   help="command for the line-protocol embedding provider")
    p.add_argument("--label", default=None,
                   help="label name or index (default: predicted dominant)")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--segments", type=int, default=50)
    p.add_argument("--kernel-width", type=float, default=0.25)
    p.add_argument("--top-k", type=int, default=5)
    p.add_argument("--ridge-lambda", type=float, default=1.0)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_explain)

    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (BiophilicError, OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
