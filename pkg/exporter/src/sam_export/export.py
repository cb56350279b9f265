"""Export orchestration: load the image, bring it to working resolution,
run the backend, convert every proposal to the interchange RLE, and write
the mask-set and embedding files."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .backend import SegmentationBackend
from .params import ExportParams
from .rle import column_major_to_row_major, decode_row_major, encode_row_major
from .writers import MaskEntry, tight_bbox, write_embedding_file, write_mask_set_file


class ExportError(RuntimeError):
    """A generated mask failed validation before serialization."""


@dataclass
class ExportResult:
    width: int
    height: int
    mask_count: int
    grid_shape: tuple[int, int, int]


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def working_size(width: int, height: int, long_side: int) -> tuple[int, int]:
    """(width, height) after downscaling the longest side to ``long_side``
    (aspect kept, short side rounded half-up, min 1); smaller images keep
    their size."""
    longest = max(width, height)
    if longest <= long_side:
        return width, height
    if height >= width:
        return max(1, _round_half_up(width * long_side / height)), long_side
    return long_side, max(1, _round_half_up(height * long_side / width))


def load_working_image(image_path, long_side: int) -> np.ndarray:
    with Image.open(image_path) as img:
        rgb = img.convert("RGB")
        target = working_size(rgb.width, rgb.height, long_side)
        if target != (rgb.width, rgb.height):
            rgb = rgb.resize(target, Image.Resampling.BILINEAR)
        return np.asarray(rgb, dtype=np.uint8)


def _proposal_to_entry(proposal: dict, mask_id: int, height: int, width: int) -> MaskEntry:
    segmentation = proposal["segmentation"]
    if isinstance(segmentation, dict):
        seg_h, seg_w = segmentation["size"]
        if (seg_h, seg_w) != (height, width):
            raise ExportError(
                f"mask {mask_id}: proposal size {seg_w}x{seg_h} differs from image {width}x{height}"
            )
        runs, area = column_major_to_row_major(segmentation["counts"], height, width)
        bitmap = decode_row_major(runs, height, width)
    else:
        bitmap = np.asarray(segmentation, dtype=bool)
        if bitmap.shape != (height, width):
            raise ExportError(
                f"mask {mask_id}: proposal shape {bitmap.shape} differs from image {(height, width)}"
            )
        runs = encode_row_major(bitmap)
        area = int(bitmap.sum())
    if "area" in proposal and int(proposal["area"]) != area:
        raise ExportError(
            f"mask {mask_id}: generator area {proposal['area']} != decoded area {area}"
        )
    return MaskEntry(
        id=mask_id,
        runs=runs,
        area=area,
        bbox=tight_bbox(bitmap),
        predicted_iou=_maybe_float(proposal.get("predicted_iou")),
        stability_score=_maybe_float(proposal.get("stability_score")),
    )


def _maybe_float(value):
    return None if value is None else float(value)


def export_image(
    image_path,
    out_masks,
    out_embedding,
    params: ExportParams,
    backend: SegmentationBackend,
) -> ExportResult:
    """Run the backend on one image and write both interchange files.

    The mask file records the generation parameters field-for-field; the
    embedding header carries the post-resize image dims so the engine can
    check alignment.
    """
    params.validate()
    image = load_working_image(image_path, params.resize_long_side)
    height, width = image.shape[:2]

    proposals = backend.generate_masks(image)
    entries = [
        _proposal_to_entry(proposal, i + 1, height, width)
        for i, proposal in enumerate(proposals)
    ]

    grid = np.asarray(backend.embed(image), dtype=np.float32)
    if grid.ndim != 3:
        raise ExportError(f"backend returned a {grid.ndim}-D embedding grid")

    source = {
        "model": f"sam/{params.backbone}",
        "points_per_side": params.points_per_side,
        "nms_threshold": params.nms_threshold,
        "pred_iou_threshold": params.pred_iou_threshold,
        "stability_score_threshold": params.stability_score_threshold,
        "resize_long_side": params.resize_long_side,
    }
    out_masks = Path(out_masks)
    out_embedding = Path(out_embedding)
    write_mask_set_file(out_masks, width, height, entries, source)
    write_embedding_file(out_embedding, grid, height, width)
    return ExportResult(
        width=width,
        height=height,
        mask_count=len(entries),
        grid_shape=tuple(grid.shape),
    )
