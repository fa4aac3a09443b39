"""Axis-aligned box algebra plus anchor-conditioned sampling-offset math.

Boxes are the universal geometry currency of the pipeline (layers, ground
truth, predictions, tiles). The offset-field half of this module turns the
anchor-shaped sampling geometry used by boundary-aware detectors into
plain deterministic functions that can be oracle-tested without any
neural machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Rect


def round_half_away(v: float) -> int:
    """Round to the nearest integer with halves away from zero."""
    if v >= 0:
        return int(math.floor(v + 0.5))
    return int(math.ceil(v - 0.5))


def rect_intersection_area(a: Rect, b: Rect) -> float:
    """Overlap area of two boxes; 0 for disjoint or merely touching boxes."""
    ow = min(a.right, b.right) - max(a.x, b.x)
    oh = min(a.bottom, b.bottom) - max(a.y, b.y)
    return max(0.0, ow) * max(0.0, oh)


def rect_iou(a: Rect, b: Rect) -> float:
    """Intersection over union in [0, 1]; 0 when both boxes are degenerate."""
    inter = rect_intersection_area(a, b)
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return inter / union


def clip_rect(r: Rect, window: Rect) -> Rect | None:
    """Part of ``r`` inside ``window``, or None if nothing survives."""
    x0 = max(r.x, window.x)
    y0 = max(r.y, window.y)
    x1 = min(r.right, window.right)
    y1 = min(r.bottom, window.bottom)
    if x1 <= x0 or y1 <= y0:
        return None
    return Rect(x0, y0, x1 - x0, y1 - y0)


def bounding_box(rects) -> Rect:
    """Tight union of one or more boxes."""
    rects = list(rects)
    if not rects:
        raise ValueError("bounding_box of an empty collection")
    x0 = min(r.x for r in rects)
    y0 = min(r.y for r in rects)
    x1 = max(r.right for r in rects)
    y1 = max(r.bottom for r in rects)
    return Rect(x0, y0, x1 - x0, y1 - y0)


def rect_edge_gap(a: Rect, b: Rect) -> float:
    """Edge-to-edge separation between two boxes.

    0 when the boxes overlap or touch; otherwise the larger of the
    horizontal and vertical gaps (the amount each box would need to grow
    on every side, times two, for them to touch).
    """
    dx = max(a.x, b.x) - min(a.right, b.right)
    dy = max(a.y, b.y) - min(a.bottom, b.bottom)
    return max(0.0, dx, dy)


# ---------------------------------------------------------------------------
# Anchor-conditioned sampling offsets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Anchor:
    """A reference box on the feature grid; its shape conditions sampling.

    Coordinates and extents are in feature-map units (already projected
    from image space).
    """

    cx: float
    cy: float
    width: float
    height: float

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"anchor extent must be positive, got {self.width}x{self.height}")


@dataclass(frozen=True)
class OffsetField:
    """Per-tap sampling offsets for one output location.

    ``offsets`` is row-major over the kernel grid and every entry equals
    ``center_offset`` plus the tap's shape offset.
    """

    kernel: tuple[int, int]
    center_offset: tuple[float, float]
    offsets: tuple[tuple[float, float], ...]

    def __post_init__(self):
        kh, kw = self.kernel
        if len(self.offsets) != kh * kw:
            raise ValueError(f"expected {kh * kw} offsets for a {kh}x{kw} kernel, got {len(self.offsets)}")


@dataclass(eq=False)
class FeatureGrid:
    """A dense 2-D grid of real values, indexed ``values[row, col]``."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("feature grid must be 2-D")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature grid must be finite")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def center_offset(anchor: Anchor, p: tuple[float, float]) -> tuple[float, float]:
    """Displacement from location ``p`` to the anchor center."""
    return (anchor.cx - p[0], anchor.cy - p[1])


def offset_field(anchor: Anchor, p: tuple[float, float], kernel: tuple[int, int] = (3, 3),
                 dilation_base: float = 1.0) -> OffsetField:
    """Sampling offsets for an anchor-shaped kernel footprint at ``p``.

    Shape taps form a ``kh x kw`` grid centred at zero with spacing
    ``(anchor.width / kw, anchor.height / kh)`` so the footprint covers
    the anchor box uniformly; every tap is then shifted by the center
    offset. ``dilation_base`` scales the tap spacing (1.0 = feature cells).
    """
    kh, kw = kernel
    if kh < 1 or kw < 1 or kh % 2 == 0 or kw % 2 == 0:
        raise ValueError(f"kernel dims must be odd and >= 1, got {kh}x{kw}")
    ctr = center_offset(anchor, p)
    sx = anchor.width / kw * dilation_base
    sy = anchor.height / kh * dilation_base
    offsets = []
    for i in range(kh):
        dy = (i - (kh - 1) / 2.0) * sy
        for j in range(kw):
            dx = (j - (kw - 1) / 2.0) * sx
            offsets.append((ctr[0] + dx, ctr[1] + dy))
    return OffsetField(kernel=(kh, kw), center_offset=ctr, offsets=tuple(offsets))


def bilinear_sample(grid: FeatureGrid, x: float, y: float) -> float:
    """Sample the grid at a fractional position; zero outside the grid."""
    x0 = math.floor(x)
    y0 = math.floor(y)
    fx = x - x0
    fy = y - y0
    total = 0.0
    for (col, row, w) in ((x0, y0, (1 - fx) * (1 - fy)),
                          (x0 + 1, y0, fx * (1 - fy)),
                          (x0, y0 + 1, (1 - fx) * fy),
                          (x0 + 1, y0 + 1, fx * fy)):
        if w == 0.0:
            continue
        if 0 <= row < grid.height and 0 <= col < grid.width:
            total += w * float(grid.values[row, col])
    return total


def adaptive_convolve(grid: FeatureGrid, weights, field: OffsetField,
                      p: tuple[float, float]) -> float:
    """One output sample of an offset-field convolution.

    Sums ``weights[tap] * grid[p + offset(tap)]`` over the kernel grid,
    sampling at fractional positions by bilinear interpolation with zero
    padding outside the grid.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != field.kernel:
        raise ValueError(f"weights shape {w.shape} does not match kernel {field.kernel}")
    kh, kw = field.kernel
    px, py = p
    total = 0.0
    for i in range(kh):
        for j in range(kw):
            dx, dy = field.offsets[i * kw + j]
            total += float(w[i, j]) * bilinear_sample(grid, px + dx, py + dy)
    return total
