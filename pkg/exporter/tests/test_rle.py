import numpy as np
import pytest

from sam_export import (
    column_major_to_row_major,
    decode_column_major,
    decode_row_major,
    encode_column_major,
    encode_row_major,
)

from stub_backend import loop_encode_column_major


def random_arrays(seed, count=100, max_side=24):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        h = int(rng.integers(1, max_side))
        w = int(rng.integers(1, max_side))
        yield rng.random((h, w)) < float(rng.random())


def test_column_major_matches_loop_oracle():
    for arr in random_arrays(11):
        assert encode_column_major(arr) == loop_encode_column_major(arr)


def test_round_trips_both_scan_orders():
    for arr in random_arrays(12):
        h, w = arr.shape
        assert np.array_equal(decode_row_major(encode_row_major(arr), h, w), arr)
        assert np.array_equal(decode_column_major(encode_column_major(arr), h, w), arr)


def test_scan_orders_differ_but_conversion_is_lossless():
    arr = np.array([[1, 0], [0, 1]], dtype=bool)
    assert encode_row_major(arr) == [0, 1, 2, 1]
    assert encode_column_major(arr) == [0, 1, 2, 1]
    tall = np.array([[1, 1], [0, 0], [0, 0]], dtype=bool)
    assert encode_row_major(tall) == [0, 2, 4]
    assert encode_column_major(tall) == [0, 1, 2, 1, 2]
    runs, area = column_major_to_row_major(encode_column_major(tall), 3, 2)
    assert runs == [0, 2, 4]
    assert area == 2


def test_conversion_preserves_every_bitmap():
    for arr in random_arrays(13):
        h, w = arr.shape
        counts = loop_encode_column_major(arr)
        runs, area = column_major_to_row_major(counts, h, w)
        assert area == int(arr.sum())
        assert np.array_equal(decode_row_major(runs, h, w), arr)


def test_bad_counts_rejected():
    with pytest.raises(ValueError, match="sum"):
        decode_column_major([1, 1], 2, 2)
    with pytest.raises(ValueError, match="negative"):
        decode_row_major([-1, 5], 2, 2)
