import numpy as np
import pytest

import scene
from mergesam import (
    BinaryMask,
    EmbeddingGrid,
    GridDims,
    build_comprehensive_set,
    classify_and_rasterize,
    match_masks,
    mean_embedding,
    mse,
    otsu_threshold,
    rle_encode,
    run_pipeline,
    score_table_csv,
    split_masks,
)
from mergesam.matching import AnalysisUnit, ComprehensiveSet, KIND_MATCHED, KIND_SPLIT_BOTH

from oracles import mean_embedding_loop, otsu_exhaustive, random_mask_array


def mask_of(arr):
    return rle_encode(np.asarray(arr, dtype=bool))


def rect_mask(height, width, rows, cols):
    arr = np.zeros((height, width), dtype=bool)
    arr[rows, cols] = True
    return mask_of(arr)


class TestMeanEmbedding:
    def test_constant_grid(self, rng):
        grid = EmbeddingGrid(np.full((3, 3, 4), 2.5, dtype=np.float32), GridDims(12, 12))
        region = mask_of(random_mask_array(rng, 12, 12) | np.eye(12, dtype=bool))
        assert np.allclose(mean_embedding(region, grid), [2.5] * 4)

    def test_four_cells_full_region(self):
        grid = EmbeddingGrid(
            np.array([[[1.0], [2.0]], [[3.0], [4.0]]], dtype=np.float32), GridDims(4, 4)
        )
        region = mask_of(np.ones((4, 4), dtype=bool))
        assert mean_embedding(region, grid) == pytest.approx([2.5])

    def test_region_inside_one_cell(self):
        grid = EmbeddingGrid(
            np.array([[[1.0], [2.0]], [[3.0], [4.0]]], dtype=np.float32), GridDims(4, 4)
        )
        region = rect_mask(4, 4, slice(0, 2), slice(0, 2))
        assert mean_embedding(region, grid) == pytest.approx([1.0])

    def test_empty_region_rejected(self):
        grid = EmbeddingGrid(np.zeros((2, 2, 1), dtype=np.float32), GridDims(4, 4))
        with pytest.raises(ValueError, match="empty"):
            mean_embedding(mask_of(np.zeros((4, 4), dtype=bool)), grid)

    def test_dims_mismatch(self):
        grid = EmbeddingGrid(np.zeros((2, 2, 1), dtype=np.float32), GridDims(4, 4))
        with pytest.raises(ValueError, match="dimension mismatch"):
            mean_embedding(mask_of(np.ones((5, 5), dtype=bool)), grid)

    def test_matches_pixel_loop_oracle(self, rng):
        for _ in range(30):
            h, w = int(rng.integers(2, 12)), int(rng.integers(2, 12))
            gh, gw = int(rng.integers(1, h + 1)), int(rng.integers(1, w + 1))
            d = int(rng.integers(1, 5))
            grid_data = rng.standard_normal((gh, gw, d)).astype(np.float32)
            region_arr = random_mask_array(rng, h, w, fill=0.5)
            if not region_arr.any():
                region_arr[0, 0] = True
            got = mean_embedding(mask_of(region_arr), EmbeddingGrid(grid_data, GridDims(w, h)))
            expected = mean_embedding_loop(region_arr, grid_data, h, w)
            assert np.allclose(got, expected, atol=1e-12)

    def test_linearity(self, rng):
        g1 = rng.standard_normal((3, 3, 2)).astype(np.float32)
        g2 = rng.standard_normal((3, 3, 2)).astype(np.float32)
        dims = GridDims(9, 9)
        region_arr = random_mask_array(rng, 9, 9, fill=0.5)
        region_arr[0, 0] = True
        region = mask_of(region_arr)
        lhs = mean_embedding(region, EmbeddingGrid(g1 + g2, dims))
        rhs = mean_embedding(region, EmbeddingGrid(g1, dims)) + mean_embedding(
            region, EmbeddingGrid(g2, dims)
        )
        assert np.allclose(lhs, rhs, atol=1e-6)


class TestMse:
    def test_identical(self):
        assert mse([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0

    def test_two_dim_example(self):
        assert mse([0.0, 0.0], [2.0, 0.0]) == 2.0

    def test_matches_loop_oracle(self, rng):
        a = rng.standard_normal(256)
        b = rng.standard_normal(256)
        expected = sum((x - y) ** 2 for x, y in zip(a, b)) / 256
        assert mse(a, b) == pytest.approx(expected, rel=1e-6)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            mse([1.0], [1.0, 2.0])

    def test_symmetry(self, rng):
        a = rng.standard_normal(16)
        b = rng.standard_normal(16)
        assert mse(a, b) == mse(b, a)


class TestOtsuThreshold:
    def test_two_cluster_split(self):
        scores = [0.1, 0.1, 0.9, 0.9]
        theta = otsu_threshold(scores)
        assert theta is not None
        assert [s for s in scores if s <= theta] == [0.1, 0.1]
        assert [s for s in scores if s > theta] == [0.9, 0.9]
        assert theta == otsu_exhaustive(scores)

    def test_single_outlier(self):
        scores = [0.0, 0.0, 0.0, 1.0]
        theta = otsu_threshold(scores)
        assert [s for s in scores if s > theta] == [1.0]
        assert theta == otsu_exhaustive(scores)

    def test_degenerate_cases(self):
        assert otsu_threshold([]) is None
        assert otsu_threshold([3.0]) is None
        assert otsu_threshold([2.0, 2.0, 2.0]) is None
        assert otsu_threshold([1.0, 1.0 + 1e-13]) is None

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            otsu_threshold([0.0, float("nan")])
        with pytest.raises(ValueError, match="finite"):
            otsu_threshold([0.0, float("inf")])

    def test_bins_validation(self):
        with pytest.raises(ValueError, match="bins"):
            otsu_threshold([0.0, 1.0], bins=1)

    def test_matches_exhaustive_oracle(self, rng):
        for _ in range(200):
            n = int(rng.integers(2, 60))
            scores = rng.random(n) * float(rng.choice([1.0, 10.0, 1e-3]))
            assert otsu_threshold(scores) == otsu_exhaustive(scores)

    def test_weights_equal_literal_repetition(self, rng):
        scores = [0.2, 0.7, 0.4]
        weights = [3, 1, 2]
        repeated = [s for s, w in zip(scores, weights) for _ in range(w)]
        assert otsu_threshold(scores, weights=weights) == otsu_threshold(repeated)

    def test_weight_validation(self):
        with pytest.raises(ValueError, match="weights"):
            otsu_threshold([0.1, 0.9], weights=[1.0])
        with pytest.raises(ValueError, match="weights"):
            otsu_threshold([0.1, 0.9], weights=[-1.0, 1.0])

    def test_affine_invariance_of_partition(self, rng):
        for _ in range(30):
            scores = rng.random(int(rng.integers(3, 40)))
            theta = otsu_threshold(scores)
            if theta is None:
                continue
            a, b = float(rng.random() * 5 + 0.1), float(rng.standard_normal())
            transformed = a * scores + b
            theta2 = otsu_threshold(transformed)
            assert np.array_equal(scores > theta, transformed > theta2)


def _unit(region, kind=KIND_SPLIT_BOTH):
    return AnalysisUnit(region=region, kind=kind)


class TestClassifyAndRasterize:
    def test_no_threshold_all_unchanged(self):
        units = ComprehensiveSet(
            GridDims(4, 4), [_unit(rect_mask(4, 4, slice(0, 2), slice(0, 2)))]
        )
        out = classify_and_rasterize(units, [5.0], None)
        assert not out.data.any()

    def test_single_unit_above_threshold(self):
        region = rect_mask(4, 4, slice(1, 3), slice(1, 3))
        units = ComprehensiveSet(GridDims(4, 4), [_unit(region)])
        out = classify_and_rasterize(units, [2.0], 1.0)
        assert np.array_equal(out.data, region.decode())

    def test_boundary_score_stays_unchanged(self):
        region = rect_mask(4, 4, slice(0, 1), slice(0, 1))
        units = ComprehensiveSet(GridDims(4, 4), [_unit(region)])
        out = classify_and_rasterize(units, [1.0], 1.0)
        assert not out.data.any()

    def test_overlap_changed_wins(self):
        # an unchanged matched unit overlapping a changed split unit:
        # the overlap pixels come out changed (paint-order simulation)
        matched = rect_mask(6, 6, slice(0, 4), slice(0, 4))
        split = rect_mask(6, 6, slice(2, 6), slice(2, 6))
        units = ComprehensiveSet(
            GridDims(6, 6),
            [_unit(matched, KIND_MATCHED), _unit(split, KIND_SPLIT_BOTH)],
        )
        out = classify_and_rasterize(units, [0.1, 5.0], 1.0)
        assert np.array_equal(out.data, split.decode())
        assert out.data[2, 2] and out.data[3, 3]

    def test_output_within_unit_regions(self, rng):
        arrays = [random_mask_array(rng, 8, 8) for _ in range(3)]
        arrays = [a for a in arrays if a.any()]
        units = ComprehensiveSet(GridDims(8, 8), [_unit(mask_of(a)) for a in arrays])
        scores = list(rng.random(len(arrays)) * 10)
        out = classify_and_rasterize(units, scores, 1.0)
        coverage = np.logical_or.reduce(arrays)
        assert not (out.data & ~coverage).any()

    def test_count_mismatch(self):
        units = ComprehensiveSet(GridDims(2, 2), [])
        with pytest.raises(ValueError, match="mismatch"):
            classify_and_rasterize(units, [1.0], 0.5)


class TestRunPipeline:
    def test_identity_inputs_empty_map(self, rng):
        arrays = [random_mask_array(rng, 10, 10, fill=0.3) for _ in range(3)]
        arrays = [a for a in arrays if a.any()]
        masks = [mask_of(a) for a in arrays]
        grid = EmbeddingGrid(
            rng.standard_normal((5, 5, 3)).astype(np.float32), GridDims(10, 10)
        )
        change, table = run_pipeline(masks, [m for m in masks], grid, grid)
        assert not change.data.any()
        assert all(row.score == 0.0 for row in table)
        assert all(not row.changed for row in table)

    def test_no_masks_empty_everything(self, rng):
        grid = EmbeddingGrid(
            rng.standard_normal((4, 4, 2)).astype(np.float32), GridDims(8, 8)
        )
        change, table = run_pipeline([], [], grid, grid)
        assert not change.data.any()
        assert table == []

    def test_synthetic_split_scene(self):
        masks1, masks2 = scene.masks()
        emb1, emb2 = scene.embeddings()
        change, table = run_pipeline(masks1, masks2, emb1, emb2, min_area=1)
        assert np.array_equal(change.data, scene.reference())
        kinds = sorted(row.kind for row in table)
        assert kinds == [KIND_MATCHED, KIND_SPLIT_BOTH, KIND_SPLIT_BOTH]
        changed_rows = [row for row in table if row.changed]
        assert len(changed_rows) == 1
        assert changed_rows[0].score == 1.0

    def test_embedding_swap_symmetry(self):
        masks1, masks2 = scene.masks()
        emb1, emb2 = scene.embeddings()
        forward, _ = run_pipeline(masks1, masks2, emb1, emb2, min_area=1)
        backward, _ = run_pipeline(masks2, masks1, emb2, emb1, min_area=1)
        assert np.array_equal(forward.data, backward.data)

    def test_matched_unchanged_flag(self):
        # two identical masks (always matched) with very different
        # embeddings: scored by default, held unchanged with the flag
        region_arr = np.zeros((6, 6), dtype=bool)
        region_arr[1:5, 1:5] = True
        other_arr = np.zeros((6, 6), dtype=bool)
        other_arr[0, 5] = True
        masks = [mask_of(region_arr), mask_of(other_arr)]
        e1 = EmbeddingGrid(np.zeros((6, 6, 1), dtype=np.float32), GridDims(6, 6))
        data2 = np.zeros((6, 6, 1), dtype=np.float32)
        data2[region_arr] = 5.0
        e2 = EmbeddingGrid(data2, GridDims(6, 6))
        default_map, _ = run_pipeline(masks, list(masks), e1, e2, min_area=1)
        assert np.array_equal(default_map.data, region_arr)
        held_map, held_table = run_pipeline(
            masks, list(masks), e1, e2, min_area=1, matched_unchanged=True
        )
        assert not held_map.data.any()
        assert all(not row.changed for row in held_table)
        # scores still recorded for audit
        assert any(row.score > 0 for row in held_table)

    def test_area_weighted_flag_runs(self):
        masks1, masks2 = scene.masks()
        emb1, emb2 = scene.embeddings()
        change, _ = run_pipeline(
            masks1, masks2, emb1, emb2, min_area=1, area_weighted=True
        )
        assert np.array_equal(change.data, scene.reference())

    def test_dims_mismatch(self, rng):
        g1 = EmbeddingGrid(np.zeros((2, 2, 1), dtype=np.float32), GridDims(4, 4))
        g2 = EmbeddingGrid(np.zeros((2, 2, 1), dtype=np.float32), GridDims(5, 5))
        with pytest.raises(ValueError, match="dimension mismatch"):
            run_pipeline([], [], g1, g2)

    def test_deterministic_repeat(self):
        masks1, masks2 = scene.masks()
        emb1, emb2 = scene.embeddings()
        first = run_pipeline(masks1, masks2, emb1, emb2, min_area=1)
        second = run_pipeline(masks1, masks2, emb1, emb2, min_area=1)
        assert np.array_equal(first[0].data, second[0].data)
        assert score_table_csv(first[1]) == score_table_csv(second[1])


def test_score_table_csv_layout():
    rows = [
        type("R", (), {"index": 0, "kind": "matched", "area": 10, "score": 0.25, "changed": False})(),
    ]
    text = score_table_csv(rows)
    lines = text.strip().split("\n")
    assert lines[0] == "unit_index,kind,area,score,changed"
    assert lines[1] == "0,matched,10,0.25,0"
