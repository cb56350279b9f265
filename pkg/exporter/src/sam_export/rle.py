"""Run-length helpers, including the scan-order conversion from the mask
generator's column-major uncompressed RLE to the interchange row-major
form.  The conversion verifies itself by decode-compare."""

from __future__ import annotations

import numpy as np


class RleConversionError(RuntimeError):
    """The scan-order conversion failed its decode-compare self-check."""


def _encode(flat: np.ndarray) -> list[int]:
    flips = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], flips, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0]:
        runs.insert(0, 0)
    return [int(r) for r in runs]


def _decode(runs, size: int) -> np.ndarray:
    runs = np.asarray(runs, dtype=np.int64)
    if (runs < 0).any():
        raise ValueError("negative run length")
    if runs.sum() != size:
        raise ValueError(f"runs sum {int(runs.sum())} != {size} pixels")
    values = np.zeros(len(runs), dtype=bool)
    values[1::2] = True
    return np.repeat(values, runs)


def encode_row_major(mask: np.ndarray) -> list[int]:
    """Alternating zero/one run lengths over the row-major scan."""
    arr = np.asarray(mask, dtype=bool)
    return _encode(arr.ravel(order="C"))


def decode_row_major(runs, height: int, width: int) -> np.ndarray:
    return _decode(runs, height * width).reshape(height, width)


def encode_column_major(mask: np.ndarray) -> list[int]:
    """COCO-style uncompressed counts: column-major scan, zeros first."""
    arr = np.asarray(mask, dtype=bool)
    return _encode(arr.ravel(order="F"))


def decode_column_major(counts, height: int, width: int) -> np.ndarray:
    return _decode(counts, height * width).reshape(width, height).T


def column_major_to_row_major(counts, height: int, width: int) -> tuple[list[int], int]:
    """Convert generator RLE counts to interchange row-major runs.

    Returns (runs, area).  Decode-compare self-check: the row-major runs
    are decoded again and compared bit-for-bit with the bitmap decoded
    from the input counts.
    """
    bitmap = decode_column_major(counts, height, width)
    runs = encode_row_major(bitmap)
    check = decode_row_major(runs, height, width)
    if not np.array_equal(check, bitmap):
        raise RleConversionError(
            f"scan-order conversion corrupted a {width}x{height} mask"
        )
    return runs, int(bitmap.sum())
