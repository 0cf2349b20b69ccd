"""Command-line interface: extract, augment, and serve."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .augment import AugmentSpec, augment
from .encoders import make_encoder
from .extract import extract
from .serve import serve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="biophilic-extract",
        description="Embedding extraction, augmentation, and serving.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="write a BEMB file from an image folder")
    p.add_argument("--images", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--encoder", choices=("clip", "stub"), default="clip")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("augment", help="expand an image folder with the study recipe")
    p.add_argument("--images", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--copies", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-flip", action="store_true")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("serve", help="line-protocol embedding provider on stdio")
    p.add_argument("--encoder", choices=("clip", "stub"), default="clip")
    p.set_defaults(func=cmd_serve)

    return parser


def cmd_extract(args) -> int:
    count = extract(args.images, args.out, make_encoder(args.encoder), batch=args.batch)
    print(json.dumps({"out": args.out, "records": count, "encoder": args.encoder}))
    return 0


def cmd_augment(args) -> int:
    spec = AugmentSpec(horizontal_flip=not args.no_flip, copies=args.copies)
    manifest = augment(args.images, spec, seed=args.seed, out_dir=args.out_dir)
    print(json.dumps({"out_dir": args.out_dir, "images": len(manifest["images"])}))
    return 0


def cmd_serve(args) -> int:
    serve(make_encoder(args.encoder))
    return 0


def run(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, RuntimeError, ValueError) as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
