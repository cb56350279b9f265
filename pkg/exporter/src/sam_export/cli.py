"""Command-line entry point: one image in, two interchange files out."""

from __future__ import annotations

import argparse
import logging
import sys

from .export import export_image
from .params import BACKBONES, EMBEDDING_LAYERS, ExportParams

log = logging.getLogger("sam_export")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sam-export",
        description="Run automatic mask generation and the image encoder "
        "over an image and write mask-set and embedding-grid files",
    )
    parser.add_argument("image", help="input image (any PIL-readable raster)")
    parser.add_argument("--weights", required=True, help="model checkpoint path")
    parser.add_argument("--backbone", choices=BACKBONES, default="vit_b",
                        help="encoder scale (default vit_b)")
    parser.add_argument("--device", default="cpu", help="torch device (default cpu)")
    parser.add_argument("--points-per-side", type=int, default=64,
                        help="prompt grid density (default 64)")
    parser.add_argument("--nms-threshold", type=float, default=0.7,
                        help="box NMS threshold (default 0.7)")
    parser.add_argument("--pred-iou-threshold", type=float, default=0.5,
                        help="predicted IoU cutoff (default 0.5)")
    parser.add_argument("--stability-threshold", type=float, default=0.8,
                        help="stability score cutoff (default 0.8)")
    parser.add_argument("--long-side", type=int, default=1600,
                        help="downscale so the longest side is this (default 1600)")
    parser.add_argument("--embedding-layer", choices=EMBEDDING_LAYERS, default="neck",
                        help="encoder feature tap (default neck)")
    parser.add_argument("--out-masks", required=True, help="output mask-set JSON path")
    parser.add_argument("--out-embedding", required=True, help="output embedding-grid path")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    params = ExportParams(
        points_per_side=args.points_per_side,
        nms_threshold=args.nms_threshold,
        pred_iou_threshold=args.pred_iou_threshold,
        stability_score_threshold=args.stability_threshold,
        resize_long_side=args.long_side,
        backbone=args.backbone,
        embedding_layer=args.embedding_layer,
    )
    try:
        params.validate()
        from .backend import SamBackend

        backend = SamBackend(args.weights, params, device=args.device)
        result = export_image(args.image, args.out_masks, args.out_embedding, params, backend)
    except (ValueError, ImportError) as exc:
        log.error("%s", exc)
        return 1
    except OSError as exc:
        log.error("%s", exc)
        return 2
    log.info(
        "exported %d masks and a %dx%dx%d grid for %dx%d working image",
        result.mask_count,
        *result.grid_shape,
        result.width,
        result.height,
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
