"""Draft preprocessing: parsing, hierarchy flattening, and artboard tiling.

The pipeline here mirrors how layered drafts are prepared for a detector:
read the JSON draft, harvest component boxes from merge-marked layers,
flatten the designer hierarchy to a bottom-to-top paint list (the tree
structure is treated as unreliable and discarded), and split tall
artboards into detector-sized tiles.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Iterator

from .geometry import bounding_box, clip_rect
from .model import (
    DesignDraft,
    DraftParseError,
    Layer,
    MergeGroup,
    Rect,
    draft_from_dict,
    is_merge_marked,
)

logger = logging.getLogger(__name__)

MANIFEST_SCHEMA_VERSION = 1

#: Detector input-size budget: after scaling, a tile's shorter side must
#: not exceed SHORT_SIDE_MAX and its longer side must not exceed
#: LONG_SIDE_MAX. Images already inside the budget are never upscaled.
SHORT_SIDE_MAX = 800.0
LONG_SIDE_MAX = 1333.0

#: A ground-truth box clipped by a tile boundary is kept in that tile only
#: if at least this fraction of its area survives.
GT_KEEP_MIN_FRACTION = 0.30


def parse_draft(data: bytes | str) -> DesignDraft:
    """Parse a draft file into a :class:`DesignDraft`.

    Malformed JSON raises :class:`DraftParseError` with the byte offset;
    schema violations raise :class:`DraftSchemaError` naming the field.
    If the file carries no explicit ``ground_truth``, boxes are harvested
    from merge-marked layers.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as e:
        raise DraftParseError(f"invalid JSON at byte offset {e.pos}: {e.msg}", offset=e.pos) from e
    draft = draft_from_dict(obj)
    if isinstance(obj, dict) and "ground_truth" not in obj:
        draft = replace(draft, ground_truth=harvest_ground_truth(draft.layers))
    return draft


def _marked_subtrees(layers: tuple[Layer, ...]) -> Iterator[Layer]:
    for top in layers:
        for layer in top.walk():
            if is_merge_marked(layer.name):
                yield layer


def _subtree_leaf_rects(root: Layer) -> list[Rect]:
    rects = [l.rect for l in root.walk() if not l.is_container]
    return rects or [root.rect]


def harvest_ground_truth(layers: tuple[Layer, ...]) -> tuple[Rect, ...]:
    """Component boxes from merge-marked layers, in document order.

    Each marked layer contributes the tight union of its drawable
    descendants (itself, for a marked leaf). Degenerate unions are
    dropped so every harvested box has positive area.
    """
    boxes = []
    for marked in _marked_subtrees(layers):
        box = bounding_box(_subtree_leaf_rects(marked))
        if box.area > 0:
            boxes.append(box)
        else:
            logger.debug("skipping zero-area merge box from layer %r", marked.id)
    return tuple(boxes)


def ground_truth_groups(draft: DesignDraft) -> list[MergeGroup]:
    """Reference layer groups for merge evaluation, one per marked subtree."""
    groups = []
    for marked in _marked_subtrees(draft.layers):
        ids = frozenset(l.id for l in marked.walk() if not l.is_container) or frozenset({marked.id})
        box = bounding_box(_subtree_leaf_rects(marked))
        groups.append(MergeGroup(member_ids=ids, enclosing=box, source_box=box))
    return groups


# ---------------------------------------------------------------------------
# Flattening
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FlatLayerList:
    """Drawable layers in bottom-to-top paint order with assigned z_index."""

    layers: tuple[Layer, ...]
    by_id: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "by_id", {l.id: i for i, l in enumerate(self.layers)})

    def __len__(self) -> int:
        return len(self.layers)

    def __iter__(self) -> Iterator[Layer]:
        return iter(self.layers)

    def __getitem__(self, i: int) -> Layer:
        return self.layers[i]

    def index_of(self, layer_id: str) -> int:
        return self.by_id[layer_id]


def flatten_layers(draft: DesignDraft) -> FlatLayerList:
    """Flatten the layer tree to a paint-ordered list, dropping groups.

    The designer grouping is discarded; only document order survives.
    z_index runs contiguously from 0 at the bottom.
    """
    out: list[Layer] = []

    def visit(layer: Layer) -> None:
        if layer.is_container:
            for child in layer.children:
                visit(child)
        else:
            out.append(layer)

    for top in draft.layers:
        visit(top)
    return FlatLayerList(tuple(replace(l, z_index=i) for i, l in enumerate(out)))


# ---------------------------------------------------------------------------
# Tiling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Tile:
    """A vertical slice of an artboard plus the scale applied after crop.

    ``ground_truth`` boxes are expressed in tile coordinates, i.e. the
    pixel space of the cropped-and-scaled image a detector sees.
    """

    image_id: str
    index: int
    region: Rect
    scale: float
    ground_truth: tuple[Rect, ...] = ()

    @property
    def scaled_width(self) -> float:
        return self.region.w * self.scale

    @property
    def scaled_height(self) -> float:
        return self.region.h * self.scale

    def to_tile(self, r: Rect) -> Rect:
        """Map an artboard-space box into this tile's pixel space."""
        return Rect((r.x - self.region.x) * self.scale, (r.y - self.region.y) * self.scale,
                    r.w * self.scale, r.h * self.scale)

    def to_artboard(self, r: Rect) -> Rect:
        """Inverse of :meth:`to_tile`."""
        return Rect(r.x / self.scale + self.region.x, r.y / self.scale + self.region.y,
                    r.w / self.scale, r.h / self.scale)


def tile_scale(width: float, height: float) -> float:
    """Downscale-only factor fitting (width, height) into the size budget."""
    short, long = min(width, height), max(width, height)
    return min(1.0, SHORT_SIDE_MAX / short, LONG_SIDE_MAX / long)


def default_tile_height(artboard_width: float) -> float:
    """Tile height that fills the long-side budget at the width-driven scale.

    An artboard whose width already fits the short-side budget is kept at
    native scale, so its tiles are simply LONG_SIDE_MAX tall; wider
    artboards get proportionally taller tiles that land on the budget
    exactly after downscaling.
    """
    width_scale = min(1.0, SHORT_SIDE_MAX / artboard_width)
    return LONG_SIDE_MAX / width_scale


def tile_artboard(draft: DesignDraft, tile_height: float | None = None) -> list[Tile]:
    """Split an artboard into non-overlapping vertical tiles.

    Tiles cover the artboard top-to-bottom without gaps (the last tile
    takes the remainder). Every tile's scale is downscale-only and
    satisfies the SHORT/LONG side budget. Ground-truth boxes are clipped
    into each tile and kept when at least ``GT_KEEP_MIN_FRACTION`` of
    their area survives.
    """
    w, h = draft.artboard.w, draft.artboard.h
    if w <= 0 or h <= 0:
        raise ValueError(f"cannot tile a degenerate artboard ({w}x{h})")
    th = default_tile_height(w) if tile_height is None else float(tile_height)
    if th <= 0:
        raise ValueError("tile_height must be positive")

    prefix = draft.draft_id or "draft"
    tiles: list[Tile] = []
    y = 0.0
    index = 0
    while y < h:
        tile_h = min(th, h - y)
        region = Rect(0.0, y, w, tile_h)
        scale = tile_scale(w, tile_h)
        tile = Tile(image_id=f"{prefix}:{index}", index=index, region=region, scale=scale)
        kept = []
        for box in draft.ground_truth:
            clipped = clip_rect(box, region)
            if clipped is None or box.area <= 0:
                continue
            if clipped.area >= GT_KEEP_MIN_FRACTION * box.area:
                kept.append(tile.to_tile(clipped))
        tiles.append(replace(tile, ground_truth=tuple(kept)))
        y += tile_h
        index += 1
    return tiles


def tile_manifest_to_dict(draft: DesignDraft, tiles: list[Tile]) -> dict[str, Any]:
    return {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "draft_id": draft.draft_id,
        "artboard": {"w": draft.artboard.w, "h": draft.artboard.h},
        "tiles": [
            {
                "image_id": t.image_id,
                "index": t.index,
                "region": t.region.to_dict(),
                "scale": t.scale,
                "ground_truth": [b.to_dict() for b in t.ground_truth],
            }
            for t in tiles
        ],
    }


def tiles_from_manifest_dict(obj: dict[str, Any]) -> tuple[str, list[Tile]]:
    version = obj.get("schema_version")
    if version != MANIFEST_SCHEMA_VERSION:
        raise ValueError(f"unsupported tile manifest schema_version {version!r}")
    draft_id = obj.get("draft_id", "")
    tiles = []
    for t in obj.get("tiles", []):
        region = t["region"]
        tiles.append(Tile(
            image_id=t["image_id"],
            index=t["index"],
            region=Rect(region["x"], region["y"], region["w"], region["h"]),
            scale=t["scale"],
            ground_truth=tuple(Rect(b["x"], b["y"], b["w"], b["h"]) for b in t.get("ground_truth", [])),
        ))
    return draft_id, tiles


# ---------------------------------------------------------------------------
# Duplicate-draft removal
# ---------------------------------------------------------------------------

def screenshot_digest(draft: DesignDraft) -> str:
    """Content hash of the draft's rendered screenshot."""
    from .raster import render_screenshot

    return render_screenshot(flatten_layers(draft), draft.artboard).digest()


def dedup_drafts(drafts) -> list[int]:
    """Indices of drafts to keep, dropping exact screenshot duplicates."""
    seen: dict[str, int] = {}
    keep = []
    for i, draft in enumerate(drafts):
        digest = screenshot_digest(draft)
        if digest in seen:
            logger.info("dropping draft %r: duplicate screenshot of draft %r",
                        draft.draft_id or i, seen[digest])
            continue
        seen[digest] = i
        keep.append(i)
    return keep
