"""Unsupervised change detection for bitemporal high-resolution imagery.

The engine consumes model-agnostic interchange files (segmentation mask
sets and encoder embedding grids, one per epoch), pairs masks across
epochs by IoU, overlay-partitions the unmatched ones into multitemporal
fragments, scores every resulting analysis unit by the MSE between its
per-epoch mean embeddings, and Otsu-thresholds the scores into a binary
change map.  Pixelwise and object-refined CVA baselines plus the
five-metric evaluation suite round out the toolkit.
"""

from .baselines import MagnitudeMap, cva_magnitude, cva_map, cva_sam
from .errors import ValidationError
from .evaluation import ConfusionCounts, MetricsReport, confusion, metrics
from .formats import (
    EmbeddingGrid,
    MaskRecord,
    MaskSet,
    MaskSourceInfo,
    read_change_map,
    read_embedding,
    read_image,
    read_mask_set,
    write_change_map,
    write_embedding,
    write_mask_set,
)
from .matching import (
    AnalysisUnit,
    ComprehensiveSet,
    MatchPair,
    build_comprehensive_set,
    match_masks,
    split_masks,
)
from .raster import (
    BBox,
    BinaryMask,
    ChangeMap,
    GridDims,
    LabelMap,
    connected_components,
    flatten,
    iou,
    mask_union,
    resize_image,
    resize_nearest,
    rle_encode,
    scaled_dims,
)
from .scoring import (
    UnitScore,
    classify_and_rasterize,
    mean_embedding,
    mse,
    otsu_threshold,
    run_pipeline,
    score_table_csv,
)

__version__ = "0.1.0"

__all__ = [
    "AnalysisUnit",
    "BBox",
    "BinaryMask",
    "ChangeMap",
    "ComprehensiveSet",
    "ConfusionCounts",
    "EmbeddingGrid",
    "GridDims",
    "LabelMap",
    "MagnitudeMap",
    "MaskRecord",
    "MaskSet",
    "MaskSourceInfo",
    "MatchPair",
    "MetricsReport",
    "UnitScore",
    "ValidationError",
    "build_comprehensive_set",
    "classify_and_rasterize",
    "confusion",
    "connected_components",
    "cva_magnitude",
    "cva_map",
    "cva_sam",
    "flatten",
    "iou",
    "mask_union",
    "match_masks",
    "mean_embedding",
    "metrics",
    "mse",
    "otsu_threshold",
    "read_change_map",
    "read_embedding",
    "read_image",
    "read_mask_set",
    "resize_image",
    "resize_nearest",
    "rle_encode",
    "run_pipeline",
    "scaled_dims",
    "score_table_csv",
    "split_masks",
    "write_change_map",
    "write_embedding",
    "write_mask_set",
]
