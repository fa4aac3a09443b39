"""Deterministic rasterization of drafts.

Layers render as solid axis-aligned rectangles, painted bottom-to-top.
Two rasters matter downstream: screenshots (layer fill colors) and
boundary maps (a distinct color per z-index so every layer boundary is
visible), plus their pixel-level 6-channel fusion.

Rendering is bit-deterministic: identical inputs always produce identical
pixels, so outputs can be golden-hashed.
"""

from __future__ import annotations

import colorsys
import hashlib
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
from PIL import Image

from .geometry import round_half_away
from .model import Layer, Rect

#: Hue step for the z-index palette; the fractional part of z times this
#: walks the hue wheel quasi-uniformly.
GOLDEN_RATIO_CONJUGATE = 0.618033988749895

PALETTE_SATURATION = 0.75
PALETTE_VALUE = 0.95

#: Fill used for layers that do not declare one.
DEFAULT_FILL = (128, 128, 128)


@dataclass(eq=False)
class Raster:
    """A width x height grid of RGBA pixels, 8 bits per channel."""

    pixels: np.ndarray  # (height, width, 4) uint8

    def __post_init__(self):
        p = np.asarray(self.pixels)
        if p.ndim != 3 or p.shape[2] != 4 or p.dtype != np.uint8:
            raise ValueError("raster pixels must be a (h, w, 4) uint8 array")
        self.pixels = p

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def rgb(self) -> np.ndarray:
        return self.pixels[:, :, :3]

    def copy(self) -> "Raster":
        return Raster(self.pixels.copy())

    def digest(self) -> str:
        """Content hash of dimensions plus raw pixel bytes."""
        h = hashlib.sha256(f"{self.width}x{self.height}:".encode())
        h.update(self.pixels.tobytes())
        return h.hexdigest()

    def to_png_bytes(self) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(self.pixels, mode="RGBA").save(buf, format="PNG")
        return buf.getvalue()

    @classmethod
    def from_png_bytes(cls, data: bytes) -> "Raster":
        img = Image.open(io.BytesIO(data)).convert("RGBA")
        return cls(np.asarray(img, dtype=np.uint8).copy())


def new_raster(width: int, height: int, color: tuple[int, int, int] = (0, 0, 0)) -> Raster:
    if width <= 0 or height <= 0:
        raise ValueError(f"raster dimensions must be positive, got {width}x{height}")
    pixels = np.zeros((height, width, 4), dtype=np.uint8)
    pixels[:, :, 0] = color[0]
    pixels[:, :, 1] = color[1]
    pixels[:, :, 2] = color[2]
    pixels[:, :, 3] = 255
    return Raster(pixels)


def layer_color(z_index: int) -> tuple[int, int, int]:
    """Deterministic palette color for a z-index.

    Golden-ratio hue rotation (hue = fract(z * 0.618033988749895)) at
    fixed saturation 0.75 and value 0.95, truncated to 8-bit RGB. Nearby
    z-indices land far apart on the hue wheel, so adjacent layers get
    clearly distinct colors.
    """
    if z_index < 0:
        raise ValueError("z_index must be >= 0")
    hue = (z_index * GOLDEN_RATIO_CONJUGATE) % 1.0
    r, g, b = colorsys.hsv_to_rgb(hue, PALETTE_SATURATION, PALETTE_VALUE)
    return (int(r * 255), int(g * 255), int(b * 255))


def _pixel_bounds(rect: Rect, width: int, height: int) -> tuple[int, int, int, int] | None:
    """Integer paint window for a rect, clipped to the canvas.

    Edges round half-away-from-zero; rects that collapse below one pixel
    still paint one pixel, so no layer silently disappears.
    """
    x0 = round_half_away(rect.x)
    y0 = round_half_away(rect.y)
    x1 = round_half_away(rect.x + rect.w)
    y1 = round_half_away(rect.y + rect.h)
    if x1 <= x0:
        x1 = x0 + 1
    if y1 <= y0:
        y1 = y0 + 1
    x0, y0 = max(0, x0), max(0, y0)
    x1, y1 = min(width, x1), min(height, y1)
    if x1 <= x0 or y1 <= y0:
        return None
    return x0, y0, x1, y1


def _canvas_size(artboard: Rect) -> tuple[int, int]:
    width = round_half_away(artboard.w)
    height = round_half_away(artboard.h)
    if width <= 0 or height <= 0:
        raise ValueError(f"cannot rasterize a zero-area artboard ({artboard.w}x{artboard.h})")
    return width, height


def _paint(canvas: np.ndarray, rect: Rect, color: tuple[int, int, int]) -> None:
    bounds = _pixel_bounds(rect, canvas.shape[1], canvas.shape[0])
    if bounds is None:
        return
    x0, y0, x1, y1 = bounds
    canvas[y0:y1, x0:x1, 0] = color[0]
    canvas[y0:y1, x0:x1, 1] = color[1]
    canvas[y0:y1, x0:x1, 2] = color[2]


def render_segmentation_map(flat: Iterable[Layer], artboard: Rect) -> Raster:
    """Paint each layer in its z-index palette color, bottom to top.

    Every covered pixel ends up holding the color of the topmost covering
    layer; uncovered pixels stay black. Alpha is 255 everywhere.
    """
    width, height = _canvas_size(artboard)
    raster = new_raster(width, height)
    for layer in flat:
        if layer.z_index is None:
            raise ValueError(f"layer {layer.id!r} has no z_index; flatten the draft first")
        _paint(raster.pixels, layer.rect, layer_color(layer.z_index))
    return raster


def render_screenshot(flat: Iterable[Layer], artboard: Rect,
                      external: Raster | None = None) -> Raster:
    """Solid-fill screenshot of the draft, or a supplied external image.

    Drafts exported from real design tools may ship an actual screenshot;
    when ``external`` is given it is passed through unmodified after a
    dimension check.
    """
    width, height = _canvas_size(artboard)
    if external is not None:
        if (external.width, external.height) != (width, height):
            raise ValueError(
                f"external screenshot is {external.width}x{external.height}, "
                f"artboard needs {width}x{height}")
        return external
    raster = new_raster(width, height)
    for layer in flat:
        _paint(raster.pixels, layer.rect, layer.fill or DEFAULT_FILL)
    return raster


@dataclass(eq=False)
class FusionImage:
    """Six aligned channel planes: screenshot RGB then boundary-map RGB."""

    planes: np.ndarray  # (height, width, 6) uint8

    def __post_init__(self):
        p = np.asarray(self.planes)
        if p.ndim != 3 or p.shape[2] != 6 or p.dtype != np.uint8:
            raise ValueError("fusion planes must be a (h, w, 6) uint8 array")
        self.planes = p

    @property
    def width(self) -> int:
        return self.planes.shape[1]

    @property
    def height(self) -> int:
        return self.planes.shape[0]

    @property
    def screenshot_rgb(self) -> np.ndarray:
        return self.planes[:, :, :3]

    @property
    def segmap_rgb(self) -> np.ndarray:
        return self.planes[:, :, 3:]


def compose_spatial_fusion(screenshot: Raster, segmap: Raster) -> FusionImage:
    """Stack the boundary map onto the screenshot at the pixel level."""
    if (screenshot.width, screenshot.height) != (segmap.width, segmap.height):
        raise ValueError(
            f"dimension mismatch: screenshot {screenshot.width}x{screenshot.height} "
            f"vs segmentation map {segmap.width}x{segmap.height}")
    return FusionImage(np.concatenate([screenshot.rgb(), segmap.rgb()], axis=2))


def read_fusion(manifest_path: str | Path) -> FusionImage:
    """Re-stack a fusion image persisted as two PNGs plus a manifest."""
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    base = manifest_path.parent
    screenshot = Raster.from_png_bytes((base / manifest["screenshot"]).read_bytes())
    segmap = Raster.from_png_bytes((base / manifest["segmap"]).read_bytes())
    return compose_spatial_fusion(screenshot, segmap)


def draw_rect_outline(raster: Raster, rect: Rect, color: tuple[int, int, int],
                      thickness: int = 2) -> None:
    """Stroke a rectangle outline in place, clipped to the canvas."""
    bounds = _pixel_bounds(rect, raster.width, raster.height)
    if bounds is None:
        return
    x0, y0, x1, y1 = bounds
    t = max(1, thickness)
    p = raster.pixels
    for band in (
        (x0, y0, x1, min(y1, y0 + t)),          # top
        (x0, max(y0, y1 - t), x1, y1),          # bottom
        (x0, y0, min(x1, x0 + t), y1),          # left
        (max(x0, x1 - t), y0, x1, y1),          # right
    ):
        bx0, by0, bx1, by1 = band
        if bx1 > bx0 and by1 > by0:
            p[by0:by1, bx0:bx1, 0] = color[0]
            p[by0:by1, bx0:bx1, 1] = color[1]
            p[by0:by1, bx0:bx1, 2] = color[2]
