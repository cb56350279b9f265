"""Interchange file formats decoupling the engine from any model runtime.

Mask sets travel as JSON (human-inspectable), embedding grids as a small
binary container (they are large), change maps as single-channel PNG with
values restricted to {0, 255}.  All multi-byte binary values are
little-endian.  Writers and readers are byte-exact inverse pairs.

Embedding container layout::

    magic   4 bytes  b"MSEM"
    header  6 x uint32 LE: version, grid_h, grid_w, dim, image_h, image_w
    payload grid_h * grid_w * dim float32 LE, row-major, dim fastest
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ValidationError
from .raster import BinaryMask, ChangeMap, GridDims

__all__ = [
    "MASK_FORMAT_TAG",
    "EMBEDDING_MAGIC",
    "EMBEDDING_VERSION",
    "MaskSourceInfo",
    "MaskRecord",
    "MaskSet",
    "EmbeddingGrid",
    "read_mask_set",
    "write_mask_set",
    "read_embedding",
    "write_embedding",
    "read_image",
    "read_change_map",
    "write_change_map",
]

MASK_FORMAT_TAG = "mergesam-masks/1"
EMBEDDING_MAGIC = b"MSEM"
EMBEDDING_VERSION = 1
_EMB_HEADER = struct.Struct("<4s6I")


@dataclass
class MaskSourceInfo:
    """Generation parameters recorded alongside a mask set."""

    model: str | None = None
    points_per_side: int | None = None
    nms_threshold: float | None = None
    pred_iou_threshold: float | None = None
    stability_score_threshold: float | None = None
    resize_long_side: int | None = None

    def to_json(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_json(cls, obj: dict) -> "MaskSourceInfo":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in obj.items() if k in known})


@dataclass
class MaskRecord:
    """One mask plus the model's per-mask quality metadata."""

    id: int
    mask: BinaryMask
    predicted_iou: float | None = None
    stability_score: float | None = None


@dataclass
class MaskSet:
    dims: GridDims
    masks: list[MaskRecord] = field(default_factory=list)
    source: MaskSourceInfo = field(default_factory=MaskSourceInfo)


@dataclass
class EmbeddingGrid:
    """H_g x W_g x D feature grid aligned to an image of ``image_dims``."""

    data: np.ndarray  # float32, shape (grid_h, grid_w, dim)
    image_dims: GridDims

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 3:
            raise ValueError(f"embedding grid must be 3-D, got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ValueError(f"embedding grid dims must be >= 1, got {arr.shape}")
        self.data = arr

    @property
    def grid_h(self) -> int:
        return self.data.shape[0]

    @property
    def grid_w(self) -> int:
        return self.data.shape[1]

    @property
    def dim(self) -> int:
        return self.data.shape[2]


def _bbox_of(mask: BinaryMask) -> list[int]:
    box = mask.bbox()
    if box is None:
        return [0, 0, 0, 0]
    return [box.x, box.y, box.w, box.h]


def write_mask_set(path, mask_set: MaskSet) -> None:
    doc = {
        "format": MASK_FORMAT_TAG,
        "width": mask_set.dims.width,
        "height": mask_set.dims.height,
        "source": mask_set.source.to_json(),
        "masks": [
            {
                "id": rec.id,
                "area": rec.mask.area,
                "bbox": _bbox_of(rec.mask),
                "predicted_iou": rec.predicted_iou,
                "stability_score": rec.stability_score,
                "rle": list(rec.mask.runs),
            }
            for rec in mask_set.masks
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise ValidationError(f"{where}: missing field '{key}'")
    return obj[key]


def read_mask_set(path) -> MaskSet:
    """Read and fully validate a mask set file.

    Every mask is checked against the codec invariants (runs sum to the
    pixel count, declared area and bbox match the decoded mask, unique
    ids); violations are reported with the mask id and field name.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON: {exc}") from exc
    where = str(path)
    if not isinstance(doc, dict):
        raise ValidationError(f"{where}: top level must be an object")
    tag = _require(doc, "format", where)
    if tag != MASK_FORMAT_TAG:
        raise ValidationError(f"{where}: format tag {tag!r}, expected {MASK_FORMAT_TAG!r}")
    width = _require(doc, "width", where)
    height = _require(doc, "height", where)
    if not isinstance(width, int) or not isinstance(height, int):
        raise ValidationError(f"{where}: width/height must be integers")
    try:
        dims = GridDims(width, height)
    except ValueError as exc:
        raise ValidationError(f"{where}: {exc}") from exc
    source = MaskSourceInfo.from_json(doc.get("source") or {})
    entries = _require(doc, "masks", where)
    if not isinstance(entries, list):
        raise ValidationError(f"{where}: 'masks' must be a list")

    records: list[MaskRecord] = []
    seen_ids: set[int] = set()
    for pos, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise ValidationError(f"{where}: mask at position {pos} must be an object")
        mask_id = _require(entry, "id", f"{where}: mask at position {pos}")
        if not isinstance(mask_id, int):
            raise ValidationError(f"{where}: mask at position {pos}: field 'id' must be an integer")
        label = f"{where}: mask {mask_id}"
        if mask_id in seen_ids:
            raise ValidationError(f"{label}: duplicate id")
        seen_ids.add(mask_id)

        runs = _require(entry, "rle", label)
        if not isinstance(runs, list) or not all(isinstance(r, int) for r in runs):
            raise ValidationError(f"{label}: field 'rle' must be a list of integers")
        try:
            mask = BinaryMask.from_runs(dims, runs)
        except ValueError as exc:
            raise ValidationError(f"{label}: field 'rle': {exc}") from exc

        declared_area = _require(entry, "area", label)
        if declared_area != mask.area:
            raise ValidationError(
                f"{label}: field 'area': declared {declared_area} != decoded {mask.area}"
            )
        declared_bbox = entry.get("bbox")
        if declared_bbox is not None:
            if declared_bbox != _bbox_of(mask):
                raise ValidationError(
                    f"{label}: field 'bbox': declared {declared_bbox} != decoded {_bbox_of(mask)}"
                )
        for key in ("predicted_iou", "stability_score"):
            value = entry.get(key)
            if value is not None and not isinstance(value, (int, float)):
                raise ValidationError(f"{label}: field '{key}' must be a number or null")
        records.append(
            MaskRecord(
                id=mask_id,
                mask=mask,
                predicted_iou=entry.get("predicted_iou"),
                stability_score=entry.get("stability_score"),
            )
        )
    return MaskSet(dims=dims, masks=records, source=source)


def write_embedding(path, grid: EmbeddingGrid) -> None:
    header = _EMB_HEADER.pack(
        EMBEDDING_MAGIC,
        EMBEDDING_VERSION,
        grid.grid_h,
        grid.grid_w,
        grid.dim,
        grid.image_dims.height,
        grid.image_dims.width,
    )
    payload = np.ascontiguousarray(grid.data, dtype="<f4").tobytes()
    Path(path).write_bytes(header + payload)


def read_embedding(path) -> EmbeddingGrid:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _EMB_HEADER.size:
        raise ValidationError(f"{path}: truncated header ({len(blob)} bytes)")
    magic, version, grid_h, grid_w, dim, image_h, image_w = _EMB_HEADER.unpack_from(blob)
    if magic != EMBEDDING_MAGIC:
        raise ValidationError(f"{path}: bad magic {magic!r}")
    if version != EMBEDDING_VERSION:
        raise ValidationError(f"{path}: unsupported version {version}")
    if min(grid_h, grid_w, dim) < 1:
        raise ValidationError(f"{path}: grid dims must be >= 1, got {grid_h}x{grid_w}x{dim}")
    expected = grid_h * grid_w * dim * 4
    payload = blob[_EMB_HEADER.size :]
    if len(payload) < expected:
        raise ValidationError(
            f"{path}: truncated payload ({len(payload)} bytes, header promises {expected})"
        )
    if len(payload) > expected:
        raise ValidationError(
            f"{path}: trailing bytes after payload ({len(payload)} > {expected})"
        )
    try:
        image_dims = GridDims(image_w, image_h)
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    data = np.frombuffer(payload, dtype="<f4").reshape(grid_h, grid_w, dim)
    return EmbeddingGrid(data=data.copy(), image_dims=image_dims)


def read_image(path) -> np.ndarray:
    """Read an 8-bit image as a (height, width, 3) uint8 array."""
    with Image.open(path) as img:
        rgb = img.convert("RGB")
        return np.asarray(rgb, dtype=np.uint8)


def write_change_map(path, change_map: ChangeMap) -> None:
    data = np.where(change_map.data, 255, 0).astype(np.uint8)
    Image.fromarray(data, mode="L").save(path, format="PNG")


def read_change_map(path) -> ChangeMap:
    path = Path(path)
    with Image.open(path) as img:
        if img.mode in ("L", "1"):
            arr = np.asarray(img.convert("L"), dtype=np.uint8)
        elif img.mode == "RGB":
            rgb = np.asarray(img, dtype=np.uint8)
            if not (rgb[:, :, 0] == rgb[:, :, 1]).all() or not (
                rgb[:, :, 0] == rgb[:, :, 2]
            ).all():
                raise ValidationError(f"{path}: RGB change map has unequal channels")
            arr = rgb[:, :, 0]
        else:
            raise ValidationError(f"{path}: unsupported image mode {img.mode!r} for a change map")
    values = np.unique(arr)
    bad = [int(v) for v in values if v not in (0, 255)]
    if bad:
        raise ValidationError(f"{path}: change map contains values {bad}, only 0/255 allowed")
    return ChangeMap(GridDims(arr.shape[1], arr.shape[0]), arr == 255)
