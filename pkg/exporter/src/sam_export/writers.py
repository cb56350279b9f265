"""Writers for the two interchange files the change-detection engine
consumes.  The file formats are the contract between the two packages:

* mask sets: JSON tagged ``mergesam-masks/1`` with per-mask id, area,
  tight bbox, model quality scores, and row-major RLE runs;
* embedding grids: binary, magic ``MSEM`` + six little-endian uint32
  (version, grid_h, grid_w, dim, image_h, image_w) + float32 LE payload,
  row-major with the feature dimension fastest.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MASK_FORMAT_TAG = "mergesam-masks/1"
EMBEDDING_MAGIC = b"MSEM"
EMBEDDING_VERSION = 1
_EMB_HEADER = struct.Struct("<4s6I")


@dataclass
class MaskEntry:
    """One generated mask ready for serialization."""

    id: int
    runs: list[int]
    area: int
    bbox: tuple[int, int, int, int]  # x, y, w, h
    predicted_iou: float | None = None
    stability_score: float | None = None


def tight_bbox(bitmap: np.ndarray) -> tuple[int, int, int, int]:
    rows, cols = np.nonzero(bitmap)
    if rows.size == 0:
        return (0, 0, 0, 0)
    r0, r1 = int(rows.min()), int(rows.max())
    c0, c1 = int(cols.min()), int(cols.max())
    return (c0, r0, c1 - c0 + 1, r1 - r0 + 1)


def write_mask_set_file(path, width: int, height: int, entries: list[MaskEntry], source: dict) -> None:
    doc = {
        "format": MASK_FORMAT_TAG,
        "width": width,
        "height": height,
        "source": source,
        "masks": [
            {
                "id": e.id,
                "area": e.area,
                "bbox": list(e.bbox),
                "predicted_iou": e.predicted_iou,
                "stability_score": e.stability_score,
                "rle": e.runs,
            }
            for e in entries
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def write_embedding_file(path, grid: np.ndarray, image_height: int, image_width: int) -> None:
    grid = np.asarray(grid, dtype=np.float32)
    if grid.ndim != 3:
        raise ValueError(f"embedding grid must be 3-D, got shape {grid.shape}")
    header = _EMB_HEADER.pack(
        EMBEDDING_MAGIC,
        EMBEDDING_VERSION,
        grid.shape[0],
        grid.shape[1],
        grid.shape[2],
        image_height,
        image_width,
    )
    payload = np.ascontiguousarray(grid, dtype="<f4").tobytes()
    Path(path).write_bytes(header + payload)
