"""Model-facing exporter: runs automatic mask generation and the image
encoder over an image and writes the interchange files the
change-detection engine consumes."""

from .export import ExportError, ExportResult, export_image, load_working_image, working_size
from .params import BACKBONES, EMBEDDING_LAYERS, ExportParams
from .rle import (
    RleConversionError,
    column_major_to_row_major,
    decode_column_major,
    decode_row_major,
    encode_column_major,
    encode_row_major,
)
from .writers import MaskEntry, tight_bbox, write_embedding_file, write_mask_set_file

__version__ = "0.1.0"

__all__ = [
    "BACKBONES",
    "EMBEDDING_LAYERS",
    "ExportError",
    "ExportParams",
    "ExportResult",
    "MaskEntry",
    "RleConversionError",
    "column_major_to_row_major",
    "decode_column_major",
    "decode_row_major",
    "encode_column_major",
    "encode_row_major",
    "export_image",
    "load_working_image",
    "tight_bbox",
    "working_size",
    "write_embedding_file",
    "write_mask_set_file",
]
