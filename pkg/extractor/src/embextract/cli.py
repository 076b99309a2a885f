"""Command line: embed image folders or generate synthetic domains."""

from __future__ import annotations

import argparse
import logging
import sys

from .backbones import BACKBONES, STANDIN_DIM, get_backbone
from .extract import extract
from .synth import synth


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="embextract")
    sub = parser.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("extract", help="embed an image folder into an EMB1 file")
    ex.add_argument("--backbone", required=True, choices=sorted(BACKBONES))
    ex.add_argument("--images", required=True, help="image root; class subfolders give labels")
    ex.add_argument("--out", required=True, help="output EMB1 path")
    ex.add_argument("--batch-size", type=int, default=16)
    ex.add_argument("--device", default="cpu")
    ex.add_argument("--dim", type=int, default=STANDIN_DIM, help="pixel_projection output width")
    ex.add_argument("--domain-name", default=None)

    sy = sub.add_parser("synth", help="generate a synthetic source/target pair")
    sy.add_argument("--classes", type=int, required=True)
    sy.add_argument("--per-class", type=int, required=True)
    sy.add_argument("--dim", type=int, required=True)
    sy.add_argument("--shift", type=float, required=True)
    sy.add_argument("--rotate", type=float, default=0.0, help="degrees in a seeded random plane")
    sy.add_argument("--seed", type=int, default=0)
    sy.add_argument("--out-src", required=True)
    sy.add_argument("--out-tgt", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "extract":
            backbone = get_backbone(args.backbone, device=args.device, dim=args.dim)
            n = extract(
                args.images,
                args.out,
                backbone,
                domain_name=args.domain_name,
                batch_size=args.batch_size,
            )
            print(f"wrote {args.out} ({n} rows)")
        elif args.command == "synth":
            synth(
                args.classes,
                args.per_class,
                args.dim,
                args.shift,
                args.seed,
                args.out_src,
                args.out_tgt,
                rotate_degrees=args.rotate,
            )
            print(f"wrote {args.out_src} and {args.out_tgt}")
    except Exception as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
