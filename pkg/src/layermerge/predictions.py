"""Detector interchange format plus a heuristic baseline detector.

Any detector can feed the pipeline by writing the predictions JSON
documented in the README (boxes in tile coordinates, scores in [0, 1]).
The baseline detector clusters layers by rectangle proximity so the whole
toolchain runs end-to-end without a trained model.
"""

from __future__ import annotations

import json
from typing import Any, Sequence

from .geometry import bounding_box, rect_edge_gap
from .metrics import Detection
from .model import DesignDraft, Rect
from .parser import Tile, flatten_layers

PREDICTIONS_SCHEMA_VERSION = 1


class PredictionSchemaError(ValueError):
    """A predictions file violates the interchange schema."""

    def __init__(self, message: str, entry: int | None = None):
        prefix = f"entries[{entry}]: " if entry is not None else ""
        super().__init__(prefix + message)
        self.entry = entry


def _validate_entry(det: Detection, index: int | None = None) -> None:
    if not isinstance(det.score, (int, float)) or isinstance(det.score, bool):
        raise PredictionSchemaError("score must be a number", index)
    if not 0.0 <= det.score <= 1.0:
        raise PredictionSchemaError(f"score must be in [0, 1], got {det.score}", index)
    if not det.box.is_finite():
        raise PredictionSchemaError("box must be finite", index)
    if det.box.area <= 0:
        raise PredictionSchemaError(f"box must have positive area, got {det.box.w}x{det.box.h}", index)


def _entry_to_dict(det: Detection) -> dict[str, Any]:
    return {"image_id": det.image_id, "box": det.box.to_dict(), "score": det.score}


def _entry_from_dict(obj: Any, index: int) -> Detection:
    if not isinstance(obj, dict):
        raise PredictionSchemaError("expected an entry object", index)
    image_id = obj.get("image_id")
    if not isinstance(image_id, str):
        raise PredictionSchemaError("image_id must be a string", index)
    box = obj.get("box")
    if not isinstance(box, dict) or not all(k in box for k in ("x", "y", "w", "h")):
        raise PredictionSchemaError("box must be an object with x,y,w,h", index)
    det = Detection(box=Rect(box["x"], box["y"], box["w"], box["h"]),
                    score=obj.get("score"), image_id=image_id)
    _validate_entry(det, index)
    return det


def write_predictions(dets: Sequence[Detection]) -> bytes:
    """Serialize detections to the interchange JSON (validates first)."""
    for i, det in enumerate(dets):
        _validate_entry(det, i)
    obj = {"schema_version": PREDICTIONS_SCHEMA_VERSION,
           "entries": [_entry_to_dict(d) for d in dets]}
    return (json.dumps(obj, indent=2) + "\n").encode("utf-8")


def read_predictions(data: bytes | str, tiles: Sequence[Tile] | None = None,
                     draft_id: str = "") -> list[Detection]:
    """Read the interchange JSON back into detections.

    When ``tiles`` (from a tile manifest) is given, boxes are mapped from
    tile coordinates back to artboard coordinates and re-keyed to
    ``draft_id``; entries naming unknown tiles are schema errors.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    obj = json.loads(data)
    if not isinstance(obj, dict):
        raise PredictionSchemaError("expected a top-level object")
    version = obj.get("schema_version")
    if version != PREDICTIONS_SCHEMA_VERSION:
        raise PredictionSchemaError(f"unsupported schema_version {version!r}")
    entries = obj.get("entries")
    if not isinstance(entries, list):
        raise PredictionSchemaError("entries must be a list")
    dets = [_entry_from_dict(e, i) for i, e in enumerate(entries)]
    if tiles is None:
        return dets
    return map_to_artboard(dets, tiles, draft_id)


def map_to_artboard(dets: Sequence[Detection], tiles: Sequence[Tile],
                    draft_id: str = "") -> list[Detection]:
    """Re-express tile-space detections in artboard coordinates."""
    by_image_id = {t.image_id: t for t in tiles}
    out = []
    for i, det in enumerate(dets):
        tile = by_image_id.get(det.image_id)
        if tile is None:
            raise PredictionSchemaError(f"unknown tile image_id {det.image_id!r}", i)
        out.append(Detection(box=tile.to_artboard(det.box), score=det.score,
                             image_id=draft_id or det.image_id.rsplit(":", 1)[0]))
    return out


def write_predictions_ndjson(dets: Sequence[Detection]) -> bytes:
    """Streaming variant: one entry object per line, no envelope."""
    for i, det in enumerate(dets):
        _validate_entry(det, i)
    lines = [json.dumps(_entry_to_dict(d)) for d in dets]
    return ("\n".join(lines) + ("\n" if lines else "")).encode("utf-8")


def read_predictions_ndjson(data: bytes | str) -> list[Detection]:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    dets = []
    for i, line in enumerate(l for l in data.splitlines() if l.strip()):
        dets.append(_entry_from_dict(json.loads(line), i))
    return dets


# ---------------------------------------------------------------------------
# Baseline detector
# ---------------------------------------------------------------------------

class _DisjointSet:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]


#: Cluster size at which the baseline score saturates at 1.0.
SCORE_SATURATION_SIZE = 8


def baseline_detect(draft: DesignDraft, proximity: float = 0.0,
                    min_group: int = 2) -> list[Detection]:
    """Proximity-clustering stand-in for a trained merging-area detector.

    Layers whose rectangles overlap or lie within ``proximity`` of each
    other (edge to edge) are unioned into clusters; each cluster of at
    least ``min_group`` layers emits its enclosing box with a score that
    grows with cluster size. Output is sorted by top-left corner and is
    independent of the input layer order.
    """
    if proximity < 0:
        raise ValueError("proximity must be >= 0")
    if min_group < 2:
        raise ValueError("min_group must be >= 2")
    flat = flatten_layers(draft)
    n = len(flat)
    dsu = _DisjointSet(n)
    for i in range(n):
        for j in range(i + 1, n):
            if rect_edge_gap(flat[i].rect, flat[j].rect) <= proximity:
                dsu.union(i, j)
    clusters: dict[int, list[int]] = {}
    for i in range(n):
        clusters.setdefault(dsu.find(i), []).append(i)

    image_id = draft.draft_id or "draft"
    dets = []
    for members in clusters.values():
        if len(members) < min_group:
            continue
        box = bounding_box([flat[i].rect for i in members])
        score = min(1.0, len(members) / SCORE_SATURATION_SIZE)
        dets.append(Detection(box=box, score=score, image_id=image_id))
    dets.sort(key=lambda d: (d.box.y, d.box.x, d.box.w, d.box.h))
    return dets
