"""Export parameter set with the published defaults."""

from __future__ import annotations

from dataclasses import dataclass, fields

BACKBONES = ("vit_b", "vit_l", "vit_h")
EMBEDDING_LAYERS = ("neck", "trunk")


@dataclass
class ExportParams:
    """Mask-generation and embedding parameters.

    Defaults: 64 prompt points per side, box NMS at 0.7, predicted-IoU
    cutoff 0.5, stability-score cutoff 0.8, working images downscaled so
    the longest side is 1600.
    """

    points_per_side: int = 64
    nms_threshold: float = 0.7
    pred_iou_threshold: float = 0.5
    stability_score_threshold: float = 0.8
    resize_long_side: int = 1600
    backbone: str = "vit_b"
    embedding_layer: str = "neck"

    def validate(self) -> None:
        if self.points_per_side < 1:
            raise ValueError(f"points_per_side must be >= 1, got {self.points_per_side}")
        for name in ("nms_threshold", "pred_iou_threshold", "stability_score_threshold"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        if self.resize_long_side < 1:
            raise ValueError(f"resize_long_side must be >= 1, got {self.resize_long_side}")
        if self.backbone not in BACKBONES:
            raise ValueError(f"backbone must be one of {BACKBONES}, got {self.backbone!r}")
        if self.embedding_layer not in EMBEDDING_LAYERS:
            raise ValueError(
                f"embedding_layer must be one of {EMBEDDING_LAYERS}, got {self.embedding_layer!r}"
            )

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}
