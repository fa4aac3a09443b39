"""Detect and merge fragmented layers in UI design drafts.

The toolchain parses layered draft files, renders screenshots and
layer-boundary maps, generates augmented training drafts, consumes
merging-area boxes from any detector, merges the associated layers into
components, and scores both detection (AP family) and merging (mean
layers IoU).
"""

__version__ = "0.1.0"

from .model import (
    DesignDraft,
    DraftError,
    DraftParseError,
    DraftSchemaError,
    Layer,
    LayerType,
    MergeGroup,
    Rect,
    ValidationReport,
    draft_to_json,
    validate_draft,
)
from .parser import FlatLayerList, Tile, flatten_layers, parse_draft, tile_artboard
from .merge import MergeResult, MergerConfig, apply_merge, merge_layers
from .metrics import Detection, MetricsReport, average_precision, coco_map, mean_layers_iou

__all__ = [
    "DesignDraft",
    "Detection",
    "DraftError",
    "DraftParseError",
    "DraftSchemaError",
    "FlatLayerList",
    "Layer",
    "LayerType",
    "MergeGroup",
    "MergeResult",
    "MergerConfig",
    "MetricsReport",
    "Rect",
    "Tile",
    "ValidationReport",
    "__version__",
    "apply_merge",
    "average_precision",
    "coco_map",
    "draft_to_json",
    "flatten_layers",
    "mean_layers_iou",
    "merge_layers",
    "parse_draft",
    "tile_artboard",
    "validate_draft",
]
