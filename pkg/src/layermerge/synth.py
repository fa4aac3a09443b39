"""Seeded synthetic draft generators.

Three flavors, all deterministic per seed:

* component drafts: merge-marked component groups laid out on a sparse
  grid so no foreign layer touches any component box (clean-room inputs
  for exercising the merging algorithm and the full pipeline);
* dense drafts: small canvases with freely overlapping layers, for
  rasterization checks;
* deletion-stress drafts: a large pile of deletable fragments plus
  merge-marked anchors, for augmentation statistics.
"""

from __future__ import annotations

import random

from .model import DesignDraft, Layer, LayerType, Rect
from .parser import harvest_ground_truth


def _rand_subrect(rng: random.Random, bounds: Rect, min_side: int = 4) -> Rect:
    max_w, max_h = int(bounds.w), int(bounds.h)
    w = rng.randint(min_side, max_w)
    h = rng.randint(min_side, max_h)
    x = int(bounds.x) + rng.randint(0, max_w - w)
    y = int(bounds.y) + rng.randint(0, max_h - h)
    return Rect(float(x), float(y), float(w), float(h))


def _rand_fill(rng: random.Random) -> tuple[int, int, int]:
    return (rng.randrange(256), rng.randrange(256), rng.randrange(256))


def generate_component_draft(seed: int, columns: int = 4, rows: int = 8, cell: int = 100,
                             margin: int = 10, n_components: int | None = None,
                             n_noise: int | None = None, draft_id: str = "") -> DesignDraft:
    """A draft whose merge-marked components sit in disjoint grid cells.

    Component layers are fully inside their component's box and no other
    layer intersects it, so feeding the ground-truth boxes to the merging
    step should recover the components exactly.
    """
    rng = random.Random(seed)
    n_components = rng.randint(2, 5) if n_components is None else n_components
    n_noise = rng.randint(3, 10) if n_noise is None else n_noise
    n_cells = columns * rows
    if n_components + n_noise > n_cells:
        raise ValueError("not enough grid cells for the requested layer count")

    cells = rng.sample(range(n_cells), n_components + n_noise)
    inner = cell - 2 * margin

    def cell_bounds(index: int) -> Rect:
        cx = (index % columns) * cell + margin
        cy = (index // columns) * cell + margin
        return Rect(float(cx), float(cy), float(inner), float(inner))

    tops: list[Layer] = []
    for k in range(n_components):
        bounds = cell_bounds(cells[k])
        children = tuple(
            Layer(id=f"part-{k}-{i}", name=f"part-{k}-{i}",
                  rect=_rand_subrect(rng, bounds), fill=_rand_fill(rng))
            for i in range(rng.randint(2, 5))
        )
        tops.append(Layer(id=f"component-{k}", name=f"component-{k} #merge#",
                          rect=bounds, layer_type=LayerType.GROUP, children=children))
    for i in range(n_noise):
        bounds = cell_bounds(cells[n_components + i])
        if rng.random() < 0.3:
            # Thin strip: keeps high-aspect layers in the corpus.
            rect = Rect(bounds.x, bounds.y, float(rng.randint(40, inner)), float(rng.randint(2, 8)))
        else:
            rect = _rand_subrect(rng, bounds)
        tops.append(Layer(id=f"noise-{i}", name=f"noise-{i}", rect=rect, fill=_rand_fill(rng)))
    rng.shuffle(tops)

    layers = tuple(tops)
    return DesignDraft(
        artboard=Rect(0.0, 0.0, float(columns * cell), float(rows * cell)),
        layers=layers,
        ground_truth=harvest_ground_truth(layers),
        draft_id=draft_id or f"synth-{seed}",
    )


def generate_corpus(count: int, seed: int = 0, **kwargs) -> list[DesignDraft]:
    """A list of component drafts with per-draft derived seeds."""
    return [
        generate_component_draft(seed * 100003 + i, draft_id=f"synth-{i:03d}", **kwargs)
        for i in range(count)
    ]


def generate_dense_draft(seed: int, width: int = 64, height: int = 64,
                         n_layers: int | None = None, draft_id: str = "") -> DesignDraft:
    """A small canvas of freely overlapping layers, overflow included."""
    rng = random.Random(seed)
    n_layers = rng.randint(5, 20) if n_layers is None else n_layers
    layers = []
    for i in range(n_layers):
        w = rng.randint(1, max(2, width // 2))
        h = rng.randint(1, max(2, height // 2))
        x = rng.randint(-w // 2, width - w // 2)
        y = rng.randint(-h // 2, height - h // 2)
        # Occasional half-pixel offsets exercise edge rounding.
        fx = x + rng.choice((0.0, 0.0, 0.5))
        fy = y + rng.choice((0.0, 0.0, 0.5))
        layers.append(Layer(id=f"layer-{i}", name=f"layer-{i}",
                            rect=Rect(fx, fy, float(w), float(h)), fill=_rand_fill(rng)))
    return DesignDraft(
        artboard=Rect(0.0, 0.0, float(width), float(height)),
        layers=tuple(layers),
        draft_id=draft_id or f"dense-{seed}",
    )


def generate_deletion_stress_draft(n_deletable: int = 1000, n_marked: int = 50,
                                   seed: int = 0) -> DesignDraft:
    """Many small deletable fragments plus merge-marked anchor layers."""
    rng = random.Random(seed)
    side = 1000.0
    layers: list[Layer] = []
    for i in range(n_deletable):
        x = rng.uniform(0, side - 10)
        y = rng.uniform(0, side - 10)
        layers.append(Layer(id=f"frag-{i}", name=f"frag-{i}",
                            rect=Rect(x, y, 10.0, 10.0), fill=_rand_fill(rng)))
    for i in range(n_marked):
        x = rng.uniform(0, side - 300)
        y = rng.uniform(0, side - 300)
        layers.append(Layer(id=f"anchor-{i}", name=f"anchor-{i} #merge#",
                            rect=Rect(x, y, 300.0, 300.0), fill=_rand_fill(rng)))
    rng.shuffle(layers)
    tuple_layers = tuple(layers)
    return DesignDraft(
        artboard=Rect(0.0, 0.0, side, side),
        layers=tuple_layers,
        ground_truth=harvest_ground_truth(tuple_layers),
        draft_id=f"stress-{seed}",
    )
