"""Cross-epoch mask pairing and overlay splitting.

Two stages turn the raw per-epoch mask sets into analysis units:

* pairing: greedy one-to-one association of masks whose IoU clears a
  threshold, absorbing the boundary jitter between acquisitions;
* splitting: the unmatched masks of both epochs are overlaid and
  partitioned into intersection/difference fragments, which is what
  captures objects that split or merge between the two dates.

Matched pairs plus split fragments form the comprehensive unit set that
downstream scoring consumes.  Mask identity is positional: id ``i`` means
the i-th mask of the list handed to the operation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import (
    BinaryMask,
    GridDims,
    connected_components,
    flatten,
    mask_union,
)

__all__ = [
    "KIND_MATCHED",
    "KIND_SPLIT_BOTH",
    "KIND_ONLY_T1",
    "KIND_ONLY_T2",
    "MatchPair",
    "AnalysisUnit",
    "ComprehensiveSet",
    "match_masks",
    "split_masks",
    "build_comprehensive_set",
]

KIND_MATCHED = "matched"
KIND_SPLIT_BOTH = "split_both"
KIND_ONLY_T1 = "only_t1"
KIND_ONLY_T2 = "only_t2"


@dataclass(frozen=True)
class MatchPair:
    """A cross-epoch mask pair accepted by the greedy matcher."""

    id1: int
    id2: int
    iou: float


@dataclass
class AnalysisUnit:
    """One region of the comprehensive set, with provenance.

    ``ids1``/``ids2`` hold the contributing mask indices per epoch:
    positions in the lists given to :func:`match_masks` for matched units,
    positions in the leftover lists given to :func:`split_masks` for split
    and single-epoch units.
    """

    region: BinaryMask
    kind: str
    ids1: tuple[int, ...] = ()
    ids2: tuple[int, ...] = ()


@dataclass
class ComprehensiveSet:
    dims: GridDims
    units: list[AnalysisUnit]

    def __len__(self) -> int:
        return len(self.units)


def _check_dims(masks, dims: GridDims | None, label: str) -> GridDims | None:
    for i, mask in enumerate(masks):
        if dims is None:
            dims = mask.dims
        elif mask.dims != dims:
            raise ValueError(
                f"dimension mismatch: {label}[{i}] is {mask.dims}, expected {dims}"
            )
    return dims


def match_masks(
    set1: list[BinaryMask],
    set2: list[BinaryMask],
    t_iou: float = 0.75,
) -> tuple[list[MatchPair], list[BinaryMask], list[BinaryMask]]:
    """Greedy one-to-one pairing of masks across epochs by IoU.

    Candidate pairs with IoU >= ``t_iou`` are sorted by IoU descending
    (ties by ascending index pair) and accepted whenever neither mask is
    taken yet.  Returns the accepted pairs plus the unmatched masks of
    each epoch in their original order.  Pairs with disjoint bounding
    boxes are pruned before any IoU is computed.
    """
    if not 0 < t_iou <= 1:
        raise ValueError(f"t_iou must be in (0, 1], got {t_iou}")
    dims = _check_dims(set1, None, "set1")
    _check_dims(set2, dims, "set2")

    boxes1 = [m.bbox() for m in set1]
    boxes2 = [m.bbox() for m in set2]
    candidates: list[tuple[float, int, int]] = []
    for i, a in enumerate(set1):
        box_a = boxes1[i]
        if box_a is None:
            continue
        for j, b in enumerate(set2):
            box_b = boxes2[j]
            if box_b is None or not box_a.intersects(box_b):
                continue
            inter = np.intersect1d(
                a.one_indices(), b.one_indices(), assume_unique=True
            ).size
            if inter == 0:
                continue
            value = inter / (a.area + b.area - inter)
            if value >= t_iou:
                candidates.append((value, i, j))
    candidates.sort(key=lambda c: (-c[0], c[1], c[2]))

    taken1 = [False] * len(set1)
    taken2 = [False] * len(set2)
    pairs: list[MatchPair] = []
    for value, i, j in candidates:
        if taken1[i] or taken2[j]:
            continue
        taken1[i] = True
        taken2[j] = True
        pairs.append(MatchPair(i, j, value))
    leftover1 = [m for i, m in enumerate(set1) if not taken1[i]]
    leftover2 = [m for j, m in enumerate(set2) if not taken2[j]]
    return pairs, leftover1, leftover2


def _paint_order(masks) -> list[int]:
    # area descending so small objects paint last and survive nesting
    return sorted(range(len(masks)), key=lambda i: (-masks[i].area, i))


def split_masks(
    leftover1: list[BinaryMask],
    leftover2: list[BinaryMask],
    min_area: int = 8,
) -> list[AnalysisUnit]:
    """Overlay-partition the unmatched masks of both epochs.

    Each leftover set is flattened to a label map (area-descending paint
    order); every pixel gets the key (label1, label2) and each nonzero key
    region is split into 4-connected components.  Components of at least
    ``min_area`` pixels become units: ``split_both`` when both labels are
    nonzero, ``only_t1``/``only_t2`` when a single epoch covers the pixel.
    """
    if min_area < 1:
        raise ValueError(f"min_area must be >= 1, got {min_area}")
    dims = _check_dims(leftover1, None, "leftover1")
    dims = _check_dims(leftover2, dims, "leftover2")
    if dims is None:
        return []

    order1 = _paint_order(leftover1)
    order2 = _paint_order(leftover2)
    map1 = flatten([leftover1[i] for i in order1], dims)
    map2 = flatten([leftover2[i] for i in order2], dims)
    labels1 = map1.labels.ravel().astype(np.int64)
    labels2 = map2.labels.ravel().astype(np.int64)

    stride = len(leftover2) + 1
    combined = labels1 * stride + labels2
    units: list[AnalysisUnit] = []
    for key in np.unique(combined):
        if key == 0:
            continue
        label1 = int(key) // stride
        label2 = int(key) % stride
        region = BinaryMask.from_flat_indices(dims, np.flatnonzero(combined == key))
        ids1 = (order1[label1 - 1],) if label1 else ()
        ids2 = (order2[label2 - 1],) if label2 else ()
        if label1 and label2:
            kind = KIND_SPLIT_BOTH
        elif label1:
            kind = KIND_ONLY_T1
        else:
            kind = KIND_ONLY_T2
        for component in connected_components(region):
            if component.area >= min_area:
                units.append(AnalysisUnit(component, kind, ids1, ids2))
    return units


def build_comprehensive_set(
    masks1: list[BinaryMask],
    masks2: list[BinaryMask],
    pairs: list[MatchPair],
    split_units: list[AnalysisUnit],
    dims: GridDims | None = None,
) -> ComprehensiveSet:
    """Combine matched pairs and split units into the scored unit set.

    A matched pair contributes one unit whose region is the union of the
    two masks, so the score sees the object's full footprint in both
    epochs.  ``dims`` is only needed when every input is empty.
    """
    dims = _check_dims(masks1, dims, "masks1")
    dims = _check_dims(masks2, dims, "masks2")
    for unit in split_units:
        if dims is None:
            dims = unit.region.dims
        elif unit.region.dims != dims:
            raise ValueError(
                f"dimension mismatch: split unit is {unit.region.dims}, expected {dims}"
            )
    if dims is None:
        raise ValueError("cannot infer dims from empty inputs; pass dims explicitly")
    units = [
        AnalysisUnit(
            region=mask_union(masks1[p.id1], masks2[p.id2]),
            kind=KIND_MATCHED,
            ids1=(p.id1,),
            ids2=(p.id2,),
        )
        for p in pairs
    ]
    units.extend(split_units)
    return ComprehensiveSet(dims, units)
