"""Model backends.

A backend turns a working-resolution uint8 RGB image into (a) automatic
mask proposals, each carrying a column-major uncompressed RLE plus the
model's quality scores, and (b) an encoder feature grid aligned to that
image.  ``SamBackend`` wraps the segment-anything runtime and is imported
lazily so the exporter stays usable (with a stub backend) on machines
without model weights.
"""

from __future__ import annotations

import math
from typing import Protocol

import numpy as np

from .params import ExportParams


class MaskProposal(Protocol):
    """Duck type of one generator proposal.

    A mapping with key ``segmentation`` -> {"size": [h, w], "counts":
    [...]} (column-major uncompressed RLE) and optional ``predicted_iou``
    and ``stability_score`` floats.
    """


class SegmentationBackend(Protocol):
    def generate_masks(self, image: np.ndarray) -> list[dict]:
        """Automatic mask proposals for an (H, W, 3) uint8 image."""

    def embed(self, image: np.ndarray) -> np.ndarray:
        """(grid_h, grid_w, dim) float32 feature grid aligned to the image."""


class SamBackend:
    """segment-anything runtime: automatic mask generation plus encoder
    features.  Requires the optional [model] dependencies and a local
    checkpoint for the chosen backbone."""

    def __init__(self, weights_path: str, params: ExportParams, device: str = "cpu"):
        try:
            import torch  # noqa: F401
            from segment_anything import (
                SamAutomaticMaskGenerator,
                SamPredictor,
                sam_model_registry,
            )
        except ImportError as exc:  # pragma: no cover - environment-dependent
            raise ImportError(
                "model backend needs torch and segment-anything; "
                "install the package with the [model] extra"
            ) from exc
        self._params = params
        self._sam = sam_model_registry[params.backbone](checkpoint=weights_path)
        self._sam.to(device)
        self._generator = SamAutomaticMaskGenerator(
            model=self._sam,
            points_per_side=params.points_per_side,
            box_nms_thresh=params.nms_threshold,
            pred_iou_thresh=params.pred_iou_threshold,
            stability_score_thresh=params.stability_score_threshold,
            output_mode="uncompressed_rle",
        )
        self._predictor = SamPredictor(self._sam)

    def generate_masks(self, image: np.ndarray) -> list[dict]:
        return self._generator.generate(image)

    def embed(self, image: np.ndarray) -> np.ndarray:
        import torch

        captured: dict[str, "torch.Tensor"] = {}
        hook = None
        if self._params.embedding_layer == "trunk":
            # the neck's input is the transformer trunk's spatial output
            def _capture(module, inputs, output):
                captured["trunk"] = inputs[0]

            hook = self._sam.image_encoder.neck.register_forward_hook(_capture)
        try:
            self._predictor.set_image(image)
            if self._params.embedding_layer == "trunk":
                features = captured["trunk"].permute(0, 3, 1, 2)  # to (B, C, H, W)
            else:
                features = self._predictor.get_image_embedding()
        finally:
            if hook is not None:
                hook.remove()

        # the encoder pads the resized image to a square; keep only the
        # grid cells that cover actual image content
        grid_hw = features.shape[-2]
        patch = self._sam.image_encoder.img_size // grid_hw
        input_h, input_w = self._predictor.input_size
        grid_h = math.ceil(input_h / patch)
        grid_w = math.ceil(input_w / patch)
        grid = features[0, :, :grid_h, :grid_w].permute(1, 2, 0)
        return grid.detach().cpu().numpy().astype(np.float32)
