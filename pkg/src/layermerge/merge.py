"""Associate layers with predicted component boxes and merge them.

Given predicted merging-area boxes over a draft, each box first filters
the flattened layer list by an intersection ratio, then a z-distance test
walks the filtered layers and keeps the run of near-neighbours seeded by
the bottom one. Grouped layers leave the working list before the next box
is processed, so groups are disjoint by construction. A final rewrite
step collapses every group into a single image layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

from .geometry import bounding_box, rect_intersection_area
from .model import DesignDraft, Layer, LayerType, MergeGroup, Rect
from .parser import FlatLayerList, flatten_layers

BOX_ORDER_TOP_LEFT = "top_left"
BOX_ORDER_AREA_ASC = "area_asc"
DISTANCE_MEAN_GAP = "mean_consecutive_gap"
DISTANCE_DISABLED = "disabled"


class StaleMergeError(ValueError):
    """A merge result refers to layer ids that are not in the draft."""


@dataclass(frozen=True)
class MergerConfig:
    # Minimum fraction of a layer's own area inside a box for candidacy.
    intersection_threshold: float = 0.7
    box_order: str = BOX_ORDER_TOP_LEFT
    distance_rule: str = DISTANCE_MEAN_GAP

    def __post_init__(self):
        if not 0.0 < self.intersection_threshold <= 1.0:
            raise ValueError(f"intersection_threshold must be in (0, 1], got {self.intersection_threshold}")
        if self.box_order not in (BOX_ORDER_TOP_LEFT, BOX_ORDER_AREA_ASC):
            raise ValueError(f"unknown box_order {self.box_order!r}")
        if self.distance_rule not in (DISTANCE_MEAN_GAP, DISTANCE_DISABLED):
            raise ValueError(f"unknown distance_rule {self.distance_rule!r}")


@dataclass(frozen=True)
class MergeResult:
    groups: tuple[MergeGroup, ...]
    leftover: FlatLayerList


def filter_by_intersection(box: Rect, flat: Sequence[Layer], threshold: float) -> list[Layer]:
    """Layers with at least ``threshold`` of their own area inside the box.

    Order (and therefore z_index) is preserved. Zero-area layers cannot
    produce a ratio, so they are kept iff their center point lies inside
    the box (inclusive of its edges).
    """
    kept = []
    for layer in flat:
        area = layer.rect.area
        if area <= 0:
            cx, cy = layer.rect.center
            if box.x <= cx <= box.right and box.y <= cy <= box.bottom:
                kept.append(layer)
        elif rect_intersection_area(layer.rect, box) / area >= threshold:
            kept.append(layer)
    return kept


def distance_threshold(filtered: Sequence[Layer]) -> float:
    """Mean consecutive z-index gap of the filtered layers.

    Equals (z_last - z_first) / (K - 1); a singleton has no gaps and gets
    +inf so it always groups.
    """
    if not filtered:
        raise ValueError("distance threshold of an empty layer list")
    if len(filtered) == 1:
        return math.inf
    zs = [_z(l) for l in filtered]
    return (zs[-1] - zs[0]) / (len(zs) - 1)


def _z(layer: Layer) -> int:
    if layer.z_index is None:
        raise ValueError(f"layer {layer.id!r} has no z_index; flatten the draft first")
    return layer.z_index


def group_by_distance(filtered: Sequence[Layer], threshold: float) -> list[Layer]:
    """The run of filtered layers seeded by the first one.

    Walks consecutive pairs bottom-up; a layer joins while its z-gap to
    the previous filtered layer stays within the threshold. The first gap
    beyond the threshold ends the group; everything after it is left for
    later boxes.
    """
    if not filtered:
        raise ValueError("grouping an empty layer list")
    group = [filtered[0]]
    for prev, cur in zip(filtered, filtered[1:]):
        if _z(cur) - _z(prev) <= threshold:
            group.append(cur)
        else:
            break
    return group


def _ordered_boxes(predictions: Sequence[Rect], box_order: str) -> list[Rect]:
    indexed = list(enumerate(predictions))
    if box_order == BOX_ORDER_AREA_ASC:
        key = lambda t: (t[1].area, t[1].y, t[1].x, t[1].w, t[1].h, t[0])
    else:
        key = lambda t: (t[1].y, t[1].x, t[1].w, t[1].h, t[0])
    return [box for _, box in sorted(indexed, key=key)]


def merge_layers(predictions: Sequence[Rect], draft: DesignDraft,
                 cfg: MergerConfig = MergerConfig()) -> MergeResult:
    """Group the draft's layers under each predicted box.

    Boxes are processed in the configured order; each box filters the
    current working list, derives its distance threshold, takes the
    grouped run, and removes it from the working list before the next box
    runs. Layers never grouped end up in ``leftover`` with their original
    z_index.
    """
    flat = flatten_layers(draft)
    working: list[Layer] = list(flat.layers)
    groups: list[MergeGroup] = []
    for box in _ordered_boxes(predictions, cfg.box_order):
        filtered = filter_by_intersection(box, working, cfg.intersection_threshold)
        if not filtered:
            continue
        if cfg.distance_rule == DISTANCE_DISABLED:
            members = list(filtered)
        else:
            members = group_by_distance(filtered, distance_threshold(filtered))
        group = MergeGroup(
            member_ids=frozenset(l.id for l in members),
            enclosing=bounding_box([l.rect for l in members]),
            source_box=box,
        )
        groups.append(group)
        working = [l for l in working if l.id not in group.member_ids]
    return MergeResult(groups=tuple(groups), leftover=FlatLayerList(tuple(working)))


def apply_merge(draft: DesignDraft, result: MergeResult) -> DesignDraft:
    """Rewrite the draft, collapsing each group into one image layer.

    The merged layer takes the group's enclosing box, sits at the tree
    position of the group's bottom member, and records the member ids
    (bottom to top) so a renderer with access to the original draft can
    reproduce the content. Other members are removed.
    """
    flat = flatten_layers(draft)
    stale = sorted(lid for g in result.groups for lid in g.member_ids if lid not in flat.by_id)
    if stale:
        raise StaleMergeError(f"merge result references unknown layer ids: {', '.join(stale)}")

    used_ids = {l.id for l in draft.walk()}
    replace_with: dict[str, Layer] = {}
    drop: set[str] = set()
    for n, group in enumerate(result.groups, start=1):
        members = sorted(group.member_ids, key=flat.index_of)
        merged_id = f"merged-{n}"
        while merged_id in used_ids:
            merged_id += "x"
        used_ids.add(merged_id)
        replace_with[members[0]] = Layer(
            id=merged_id,
            name=f"merged-{n}",
            rect=group.enclosing,
            layer_type=LayerType.IMAGE,
            merged_from=tuple(members),
        )
        drop.update(members[1:])

    def rebuild(layer: Layer) -> Layer | None:
        if layer.is_container:
            kept = tuple(c for c in map(rebuild, layer.children) if c is not None)
            return replace(layer, children=kept)
        if layer.id in replace_with:
            return replace_with[layer.id]
        if layer.id in drop:
            return None
        return layer

    tops = tuple(t for t in map(rebuild, draft.layers) if t is not None)
    return replace(draft, layers=tops)
