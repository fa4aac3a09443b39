"""Shared fixture builders and independent oracles used across test modules.

Oracles here deliberately re-derive results through a different mechanism
than the library (per-pixel scans, naive recursion, exhaustive pairwise
closure) so agreement is meaningful.
"""

from __future__ import annotations

import math

import numpy as np

from layermerge.model import DesignDraft, Layer, LayerType, Rect
from layermerge.parser import harvest_ground_truth


def make_layer(layer_id: str, x: float, y: float, w: float, h: float,
               name: str | None = None, **kwargs) -> Layer:
    return Layer(id=layer_id, name=name if name is not None else layer_id,
                 rect=Rect(x, y, w, h), **kwargs)


def make_group(layer_id: str, children, name: str | None = None,
               rect: Rect = Rect(0, 0, 0, 0)) -> Layer:
    return Layer(id=layer_id, name=name if name is not None else layer_id,
                 rect=rect, layer_type=LayerType.GROUP, children=tuple(children))


def make_draft(layers, w: float = 100, h: float = 100, ground_truth=None,
               **kwargs) -> DesignDraft:
    layers = tuple(layers)
    if ground_truth is None:
        ground_truth = harvest_ground_truth(layers)
    return DesignDraft(artboard=Rect(0, 0, w, h), layers=layers,
                       ground_truth=tuple(ground_truth), **kwargs)


# ---------------------------------------------------------------------------
# Independent oracles
# ---------------------------------------------------------------------------

def oracle_hsv_to_rgb(h: float, s: float, v: float) -> tuple[int, int, int]:
    """Sector-form HSV to RGB, truncated to 8 bits (independent of colorsys)."""
    h6 = (h % 1.0) * 6.0
    sector = int(math.floor(h6)) % 6
    f = h6 - math.floor(h6)
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    r, g, b = [
        (v, t, p),
        (q, v, p),
        (p, v, t),
        (p, q, v),
        (t, p, v),
        (v, p, q),
    ][sector]
    return (int(r * 255), int(g * 255), int(b * 255))


def oracle_layer_color(z: int) -> tuple[int, int, int]:
    return oracle_hsv_to_rgb((z * 0.618033988749895) % 1.0, 0.75, 0.95)


def _oracle_pixel_bounds(rect: Rect) -> tuple[int, int, int, int]:
    def rnd(v: float) -> int:
        return int(math.floor(v + 0.5)) if v >= 0 else int(math.ceil(v - 0.5))

    x0, y0 = rnd(rect.x), rnd(rect.y)
    x1, y1 = rnd(rect.x + rect.w), rnd(rect.y + rect.h)
    if x1 <= x0:
        x1 = x0 + 1
    if y1 <= y0:
        y1 = y0 + 1
    return x0, y0, x1, y1


def oracle_segmentation_pixels(flat_layers, width: int, height: int) -> np.ndarray:
    """Per-pixel top-down scan: each pixel takes the topmost covering layer."""
    img = np.zeros((height, width, 3), dtype=np.uint8)
    bounds = [(_oracle_pixel_bounds(l.rect), oracle_layer_color(l.z_index)) for l in flat_layers]
    for py in range(height):
        for px in range(width):
            for (x0, y0, x1, y1), color in reversed(bounds):
                if x0 <= px < x1 and y0 <= py < y1:
                    img[py, px] = color
                    break
    return img


def oracle_flatten_ids(draft: DesignDraft) -> list[str]:
    """Naive recursive leaf collection in document order."""
    out: list[str] = []

    def rec(layer: Layer) -> None:
        if layer.layer_type is LayerType.GROUP:
            for c in layer.children:
                rec(c)
        else:
            out.append(layer.id)

    for top in draft.layers:
        rec(top)
    return out


def oracle_union_box(rects) -> Rect:
    """Brute-force min/max over all four corners."""
    corners_x = [v for r in rects for v in (r.x, r.x + r.w)]
    corners_y = [v for r in rects for v in (r.y, r.y + r.h)]
    return Rect(min(corners_x), min(corners_y),
                max(corners_x) - min(corners_x), max(corners_y) - min(corners_y))


def oracle_transitive_clusters(rects, eps: float) -> list[set[int]]:
    """O(n^3)-ish closure: repeatedly merge index sets whose members are close."""

    def close(a: Rect, b: Rect) -> bool:
        dx = max(a.x, b.x) - min(a.x + a.w, b.x + b.w)
        dy = max(a.y, b.y) - min(a.y + a.h, b.y + b.h)
        return max(0.0, dx) <= eps and max(0.0, dy) <= eps

    clusters = [{i} for i in range(len(rects))]
    changed = True
    while changed:
        changed = False
        for i in range(len(clusters)):
            for j in range(i + 1, len(clusters)):
                if any(close(rects[a], rects[b]) for a in clusters[i] for b in clusters[j]):
                    clusters[i] |= clusters[j]
                    del clusters[j]
                    changed = True
                    break
            if changed:
                break
    return clusters
