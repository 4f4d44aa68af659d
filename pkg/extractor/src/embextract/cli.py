"""One-shot extraction entry point.

    embextract --images data/train --out train.emb1 [--backbone ID]
               [--batch-size N] [--manifest PATH] [--split-tag TAG]
"""

from __future__ import annotations

import argparse
import logging
import sys

from .backbone import DEFAULT_BACKBONE, load_backbone
from .extract import ExtractionJob, extract


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embextract",
        description="Embed a class-per-folder image tree into an EMB1 file "
                    "with a frozen ViT backbone",
    )
    parser.add_argument("--images", required=True, help="root folder, one subfolder per class")
    parser.add_argument("--out", required=True, help="EMB1 output path")
    parser.add_argument("--backbone", default=DEFAULT_BACKBONE)
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--manifest", help="manifest path (default: <out>.manifest.json)")
    parser.add_argument("--dataset-name")
    parser.add_argument("--split-tag", default="train", choices=("train", "test", "unsplit"))
    parser.add_argument("--device", default="cpu")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        backbone = load_backbone(args.backbone, device=args.device)
    except RuntimeError as exc:
        print(f"fatal: {exc}", file=sys.stderr)
        return 1
    job = ExtractionJob(
        image_root=args.images,
        out_path=args.out,
        manifest_path=args.manifest,
        batch_size=args.batch_size,
        dataset_name=args.dataset_name,
        split_tag=args.split_tag,
    )
    result = extract(job, backbone)
    print(f"wrote {job.out_path}: n={result.n_rows} d={backbone.dim} "
          f"K={len(result.classes)} skipped={result.n_skipped}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
