"""Turn analysis units into a change map: per-unit mean-embedding MSE
scores thresholded by Otsu's method.

Each unit's feature is the arithmetic mean of the embedding cells covering
its pixels, one per epoch; the unit score is the MSE between the two
means.  Otsu's histogram split over the unit scores picks the change
threshold without supervision; degenerate score distributions (all equal)
yield no threshold and an all-unchanged map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .formats import EmbeddingGrid
from .matching import (
    KIND_MATCHED,
    ComprehensiveSet,
    build_comprehensive_set,
    match_masks,
    split_masks,
)
from .raster import BinaryMask, ChangeMap, GridDims

__all__ = [
    "UnitScore",
    "mean_embedding",
    "mse",
    "otsu_threshold",
    "classify_and_rasterize",
    "run_pipeline",
    "score_table_csv",
]


@dataclass
class UnitScore:
    """Score-table row for one analysis unit."""

    index: int
    kind: str
    area: int
    score: float
    changed: bool


def mean_embedding(region: BinaryMask, grid: EmbeddingGrid) -> np.ndarray:
    """Average feature vector of the grid cells under a mask region.

    Pixel (r, c) maps to cell (floor(r*grid_h/H), floor(c*grid_w/W)); the
    result is the mean over the region's pixels of their cell vectors,
    i.e. cell vectors weighted by covered-pixel count.  Returns float64.
    """
    if region.area == 0:
        raise ValueError("empty region")
    if region.dims != grid.image_dims:
        raise ValueError(
            f"dimension mismatch: region is {region.dims}, grid aligned to {grid.image_dims}"
        )
    height, width = region.dims.height, region.dims.width
    grid_h, grid_w, dim = grid.data.shape
    idx = region.one_indices()
    cell_rows = (idx // width) * grid_h // height
    cell_cols = (idx % width) * grid_w // width
    counts = np.bincount(cell_rows * grid_w + cell_cols, minlength=grid_h * grid_w)
    flat = grid.data.reshape(grid_h * grid_w, dim).astype(np.float64)
    return counts.astype(np.float64) @ flat / region.area


def mse(v1, v2) -> float:
    """Mean squared error between two equal-length vectors."""
    a = np.asarray(v1, dtype=np.float64)
    b = np.asarray(v2, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    diff = (a - b).ravel()
    return float(diff @ diff / diff.size)


def otsu_threshold(scores, bins: int = 256, weights=None) -> float | None:
    """Otsu threshold over a score list at bin-boundary granularity.

    The histogram's interior bin edges over [min, max] are the candidate
    thresholds; for each, the scores are split by strict ``> theta`` and
    the edge maximizing the between-class variance w0*w1*(mu0-mu1)^2 is
    chosen, ties resolved toward the lowest edge.  Returns None when the
    score range is degenerate (fewer than 2 distinct values, or a spread
    below 1e-12).  Optional ``weights`` repeat each score (e.g. by region
    area) without materializing the repetition.
    """
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    values = np.asarray(scores, dtype=np.float64).ravel()
    if values.size and not np.isfinite(values).all():
        raise ValueError("scores must be finite")
    if values.size == 0:
        return None
    if weights is None:
        w = np.ones_like(values)
    else:
        w = np.asarray(weights, dtype=np.float64).ravel()
        if w.shape != values.shape:
            raise ValueError("weights must match scores in length")
        if (w < 0).any() or w.sum() <= 0:
            raise ValueError("weights must be non-negative with positive total")
    lo = float(values.min())
    hi = float(values.max())
    if hi - lo < 1e-12:  # covers the all-equal case too
        return None

    order = np.argsort(values, kind="stable")
    sorted_values = values[order]
    sorted_weights = w[order]
    cum_w = np.cumsum(sorted_weights)
    cum_ws = np.cumsum(sorted_weights * sorted_values)
    total_w = cum_w[-1]
    total_ws = cum_ws[-1]

    span = hi - lo
    edges = lo + np.arange(1, bins) * span / bins
    # count of scores <= edge; min always falls below, max always above,
    # so neither class is ever empty
    pos = np.searchsorted(sorted_values, edges, side="right")
    valid = (pos > 0) & (pos < sorted_values.size)
    pos = np.clip(pos, 1, sorted_values.size - 1)
    w0 = cum_w[pos - 1]
    w1 = total_w - w0
    nonzero = valid & (w0 > 0) & (w1 > 0)
    mu0 = cum_ws[pos - 1] / np.where(w0 > 0, w0, 1.0)
    mu1 = (total_ws - cum_ws[pos - 1]) / np.where(w1 > 0, w1, 1.0)
    variance = np.where(nonzero, (w0 / total_w) * (w1 / total_w) * (mu0 - mu1) ** 2, 0.0)
    best = int(np.argmax(variance))  # argmax takes the first (lowest) edge on ties
    if variance[best] <= 0:  # only reachable when weights collapse one class
        return None
    return float(edges[best])


def _paint(dims: GridDims, regions) -> ChangeMap:
    flat = np.zeros(dims.npixels, dtype=bool)
    for region in regions:
        flat[region.one_indices()] = True
    return ChangeMap(dims, flat.reshape(dims.shape))


def classify_and_rasterize(
    units: ComprehensiveSet,
    scores,
    theta: float | None,
) -> ChangeMap:
    """Rasterize units with score > theta as changed.

    All changed units paint the same value, so a pixel under overlapping
    units is changed exactly when its highest-scoring covering unit clears
    the threshold.  No threshold means an all-unchanged map; pixels outside
    every unit stay unchanged.
    """
    scores = list(scores)
    if len(scores) != len(units.units):
        raise ValueError(
            f"score/unit count mismatch: {len(scores)} scores for {len(units.units)} units"
        )
    if theta is None:
        return _paint(units.dims, [])
    changed = [u.region for u, s in zip(units.units, scores) if s > theta]
    return _paint(units.dims, changed)


def run_pipeline(
    masks1: list[BinaryMask],
    masks2: list[BinaryMask],
    emb1: EmbeddingGrid,
    emb2: EmbeddingGrid,
    *,
    t_iou: float = 0.75,
    min_area: int = 8,
    otsu_bins: int = 256,
    matched_unchanged: bool = False,
    area_weighted: bool = False,
) -> tuple[ChangeMap, list[UnitScore]]:
    """Full detection pipeline over aligned mask sets and embeddings.

    Composes matching, splitting, per-unit mean-embedding MSE scoring,
    Otsu thresholding, and rasterization.  Returns the change map plus the
    per-unit score table for audit.

    With ``matched_unchanged`` the matched units are assumed unchanged:
    they are excluded from the threshold estimate and never painted (their
    scores still appear in the table).  With ``area_weighted`` each unit's
    score enters the Otsu histogram weighted by its pixel area.
    """
    if emb1.image_dims != emb2.image_dims:
        raise ValueError(
            f"dimension mismatch: embeddings aligned to {emb1.image_dims} vs {emb2.image_dims}"
        )
    dims = emb1.image_dims
    for label, masks in (("masks1", masks1), ("masks2", masks2)):
        for i, m in enumerate(masks):
            if m.dims != dims:
                raise ValueError(
                    f"dimension mismatch: {label}[{i}] is {m.dims}, embeddings aligned to {dims}"
                )

    pairs, leftover1, leftover2 = match_masks(masks1, masks2, t_iou)
    split_units = split_masks(leftover1, leftover2, min_area)
    units = build_comprehensive_set(masks1, masks2, pairs, split_units, dims=dims)

    scores = [
        mse(mean_embedding(u.region, emb1), mean_embedding(u.region, emb2))
        for u in units.units
    ]

    scoreable = [
        i
        for i, u in enumerate(units.units)
        if not (matched_unchanged and u.kind == KIND_MATCHED)
    ]
    pool = [scores[i] for i in scoreable]
    pool_weights = (
        [units.units[i].region.area for i in scoreable] if area_weighted else None
    )
    theta = otsu_threshold(pool, bins=otsu_bins, weights=pool_weights)

    table: list[UnitScore] = []
    changed_regions = []
    scoreable_set = set(scoreable)
    for i, (unit, score) in enumerate(zip(units.units, scores)):
        changed = theta is not None and i in scoreable_set and score > theta
        if changed:
            changed_regions.append(unit.region)
        table.append(UnitScore(i, unit.kind, unit.region.area, score, changed))
    return _paint(dims, changed_regions), table


def score_table_csv(table: list[UnitScore]) -> str:
    """Render the score table as CSV: unit_index, kind, area, score, changed."""
    lines = ["unit_index,kind,area,score,changed"]
    for row in table:
        lines.append(f"{row.index},{row.kind},{row.area},{row.score!r},{int(row.changed)}")
    return "\n".join(lines) + "\n"
