"""Grid geometry foundation: RLE mask codec, mask set algebra, label maps,
connected components, and resizing.

Masks live on a fixed pixel grid and are stored run-length encoded
(row-major scan, first run counts zeros, runs alternate zero/one).
All operations here are pure functions over effectively immutable inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

__all__ = [
    "GridDims",
    "BBox",
    "BinaryMask",
    "LabelMap",
    "ChangeMap",
    "rle_encode",
    "iou",
    "mask_union",
    "flatten",
    "connected_components",
    "scaled_dims",
    "resize_image",
    "resize_nearest",
]


@dataclass(frozen=True)
class GridDims:
    """Pixel extent of an image grid."""

    width: int
    height: int

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError(f"grid dims must be >= 1, got {self.width}x{self.height}")

    @property
    def npixels(self) -> int:
        return self.width * self.height

    @property
    def shape(self) -> tuple[int, int]:
        """(rows, cols) for numpy arrays."""
        return (self.height, self.width)

    def __str__(self) -> str:
        return f"{self.width}x{self.height}"


@dataclass(frozen=True)
class BBox:
    """Axis-aligned pixel box; (x, y) is the top-left corner."""

    x: int
    y: int
    w: int
    h: int

    def intersects(self, other: "BBox") -> bool:
        return not (
            self.x + self.w <= other.x
            or other.x + other.w <= self.x
            or self.y + self.h <= other.y
            or other.y + other.h <= self.y
        )


@dataclass
class BinaryMask:
    """Run-length-encoded pixel set on a fixed grid.

    ``runs`` alternate zero/one counts over the row-major scan, starting
    with zeros; only the first run may be zero.  ``area`` caches the
    one-pixel count (the sum of odd-indexed runs).
    """

    dims: GridDims
    runs: tuple[int, ...]
    area: int
    _ones: np.ndarray | None = field(default=None, repr=False, compare=False)

    @classmethod
    def from_array(cls, bitmap: np.ndarray) -> "BinaryMask":
        return rle_encode(bitmap)

    @classmethod
    def from_runs(cls, dims: GridDims, runs) -> "BinaryMask":
        """Build from raw run lengths, validating the codec invariants."""
        runs = tuple(int(r) for r in runs)
        if not runs:
            raise ValueError("runs must be non-empty")
        if runs[0] < 0 or any(r < 1 for r in runs[1:]):
            raise ValueError("only the first run may be zero; none may be negative")
        total = sum(runs)
        if total != dims.npixels:
            raise ValueError(f"runs sum {total} != {dims.npixels} pixels for {dims}")
        return cls(dims, runs, sum(runs[1::2]))

    @classmethod
    def from_flat_indices(cls, dims: GridDims, indices: np.ndarray) -> "BinaryMask":
        """Build from sorted flat one-pixel indices (row-major)."""
        flat = np.zeros(dims.npixels, dtype=bool)
        flat[indices] = True
        mask = rle_encode(flat.reshape(dims.shape))
        mask._ones = np.asarray(indices, dtype=np.int64)
        return mask

    @property
    def is_empty(self) -> bool:
        return self.area == 0

    def decode(self) -> np.ndarray:
        """Decode to a bool array of shape (height, width)."""
        values = np.zeros(len(self.runs), dtype=bool)
        values[1::2] = True
        return np.repeat(values, self.runs).reshape(self.dims.shape)

    def one_indices(self) -> np.ndarray:
        """Sorted flat indices of the one-pixels (cached)."""
        if self._ones is None:
            runs = np.asarray(self.runs, dtype=np.int64)
            ends = np.cumsum(runs)
            starts = ends - runs
            segments = [
                np.arange(starts[i], ends[i], dtype=np.int64)
                for i in range(1, len(runs), 2)
            ]
            self._ones = (
                np.concatenate(segments) if segments else np.empty(0, dtype=np.int64)
            )
        return self._ones

    def bbox(self) -> BBox | None:
        """Tightest box containing all one-pixels; None for an empty mask."""
        if self.area == 0:
            return None
        idx = self.one_indices()
        rows = idx // self.dims.width
        cols = idx % self.dims.width
        r0, r1 = int(rows.min()), int(rows.max())
        c0, c1 = int(cols.min()), int(cols.max())
        return BBox(c0, r0, c1 - c0 + 1, r1 - r0 + 1)


@dataclass
class LabelMap:
    """Per-pixel non-negative integer labels; 0 is background."""

    dims: GridDims
    labels: np.ndarray  # int32, shape (height, width)

    def mask_of(self, label: int) -> BinaryMask:
        return BinaryMask.from_array(self.labels == label)


@dataclass
class ChangeMap:
    """Binary changed/unchanged raster, the pipeline output."""

    dims: GridDims
    data: np.ndarray  # bool, shape (height, width)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "ChangeMap":
        arr = np.asarray(arr, dtype=bool)
        if arr.ndim != 2:
            raise ValueError(f"change map must be 2-D, got shape {arr.shape}")
        return cls(GridDims(arr.shape[1], arr.shape[0]), arr)

    @property
    def changed_count(self) -> int:
        return int(self.data.sum())


def rle_encode(bitmap: np.ndarray, dims: GridDims | None = None) -> BinaryMask:
    """Encode a row-major boolean grid into a BinaryMask (lossless)."""
    arr = np.asarray(bitmap)
    if arr.ndim != 2:
        raise ValueError(f"bitmap must be 2-D, got shape {arr.shape}")
    arr = arr.astype(bool, copy=False)
    h, w = arr.shape
    if dims is not None and (dims.width, dims.height) != (w, h):
        raise ValueError(f"dimension mismatch: bitmap is {w}x{h}, declared {dims}")
    if dims is None:
        dims = GridDims(w, h)
    flat = arr.ravel()
    flips = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], flips, [flat.size]))
    runs = np.diff(bounds)
    if flat[0]:
        runs = np.concatenate(([0], runs))
    return BinaryMask(dims, tuple(int(r) for r in runs), int(flat.sum()))


def iou(a: BinaryMask, b: BinaryMask) -> float:
    """Intersection-over-union of two same-grid masks; 0 when both empty."""
    if a.dims != b.dims:
        raise ValueError(f"dimension mismatch: {a.dims} vs {b.dims}")
    if a.area == 0 and b.area == 0:
        return 0.0
    inter = np.intersect1d(a.one_indices(), b.one_indices(), assume_unique=True).size
    return inter / (a.area + b.area - inter)


def mask_union(a: BinaryMask, b: BinaryMask) -> BinaryMask:
    if a.dims != b.dims:
        raise ValueError(f"dimension mismatch: {a.dims} vs {b.dims}")
    return BinaryMask.from_flat_indices(
        a.dims, np.union1d(a.one_indices(), b.one_indices())
    )


def flatten(masks, dims: GridDims | None = None) -> LabelMap:
    """Paint masks onto a label map; later masks overwrite earlier ones.

    Pixel label is the 1-based position of the last covering mask in the
    input order (callers wanting nested objects to survive sort by area
    descending first).  ``dims`` is required when ``masks`` is empty.
    """
    masks = list(masks)
    if dims is None:
        if not masks:
            raise ValueError("flatten of an empty mask list needs explicit dims")
        dims = masks[0].dims
    labels = np.zeros(dims.npixels, dtype=np.int32)
    for i, mask in enumerate(masks):
        if mask.dims != dims:
            raise ValueError(f"dimension mismatch: mask {i} is {mask.dims}, expected {dims}")
        labels[mask.one_indices()] = i + 1
    return LabelMap(dims, labels.reshape(dims.shape))


_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


def connected_components(mask: BinaryMask) -> list[BinaryMask]:
    """Split a mask into 4-connected components.

    Sorted by area descending, ties by the scan-order position of the
    first pixel, so the output order is deterministic.
    """
    if mask.area == 0:
        return []
    labelled, count = ndimage.label(mask.decode(), structure=_FOUR_CONNECTED)
    flat = labelled.ravel()
    ones = np.flatnonzero(flat)
    labels_at = flat[ones]
    order = np.argsort(labels_at, kind="stable")  # keeps scan order within a label
    sorted_idx = ones[order]
    boundaries = np.flatnonzero(np.diff(labels_at[order])) + 1
    groups = np.split(sorted_idx, boundaries)
    groups.sort(key=lambda g: (-g.size, int(g[0])))
    return [BinaryMask.from_flat_indices(mask.dims, g) for g in groups]


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def scaled_dims(dims: GridDims, long_side: int) -> GridDims:
    """Dims after scaling the longest side to ``long_side`` (aspect kept,
    short side rounded half-up, clamped to >= 1)."""
    if long_side < 1:
        raise ValueError(f"long_side must be >= 1, got {long_side}")
    if dims.height >= dims.width:
        return GridDims(max(1, _round_half_up(dims.width * long_side / dims.height)), long_side)
    return GridDims(long_side, max(1, _round_half_up(dims.height * long_side / dims.width)))


def resize_image(img: np.ndarray, long_side: int) -> np.ndarray:
    """Scale a single- or multi-band image so its longest side equals
    ``long_side``, preserving aspect ratio (dims rounded half-up, min 1).

    Bilinear interpolation per band; returns float64.  An image already at
    the target long side is returned with unchanged dims.
    """
    if long_side < 1:
        raise ValueError(f"long_side must be >= 1, got {long_side}")
    arr = np.asarray(img, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("empty image")
    squeeze = arr.ndim == 2
    if squeeze:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValueError(f"image must be 2-D or 3-D, got shape {arr.shape}")
    h, w = arr.shape[:2]
    target = scaled_dims(GridDims(w, h), long_side)
    nh, nw = target.height, target.width
    if (nh, nw) == (h, w):
        out = arr
    else:
        out = _bilinear(arr, nh, nw)
    return out[:, :, 0] if squeeze else out


def _bilinear(arr: np.ndarray, nh: int, nw: int) -> np.ndarray:
    h, w = arr.shape[:2]
    # Center-aligned source coordinates, clamped to the grid.
    rows = np.clip((np.arange(nh) + 0.5) * (h / nh) - 0.5, 0, h - 1)
    cols = np.clip((np.arange(nw) + 0.5) * (w / nw) - 0.5, 0, w - 1)
    r0 = np.floor(rows).astype(np.int64)
    c0 = np.floor(cols).astype(np.int64)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    fr = (rows - r0)[:, None, None]
    fc = (cols - c0)[None, :, None]
    top = arr[r0][:, c0] * (1 - fc) + arr[r0][:, c1] * fc
    bottom = arr[r1][:, c0] * (1 - fc) + arr[r1][:, c1] * fc
    return top * (1 - fr) + bottom * fr


def _nearest_indices(src: int, dst: int) -> np.ndarray:
    # floor((i + 0.5) * src / dst), clipped defensively against float spill
    idx = ((np.arange(dst) + 0.5) * src / dst).astype(np.int64)
    return np.minimum(idx, src - 1)


def resize_nearest(map_or_array, target: GridDims):
    """Nearest-neighbor resample of a LabelMap, ChangeMap, or 2-D array.

    Values are sampled, never interpolated, so the output value set is a
    subset of the input's.  Returns the same kind as the input.
    """
    if isinstance(map_or_array, LabelMap):
        return LabelMap(target, resize_nearest(map_or_array.labels, target))
    if isinstance(map_or_array, ChangeMap):
        return ChangeMap(target, resize_nearest(map_or_array.data, target))
    arr = np.asarray(map_or_array)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D map, got shape {arr.shape}")
    rows = _nearest_indices(arr.shape[0], target.height)
    cols = _nearest_indices(arr.shape[1], target.width)
    return arr[np.ix_(rows, cols)].copy()
