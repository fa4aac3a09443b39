"""Dynamic draft augmentation: epoch-wise random deletion of layers.

Each epoch, non-merge layers that are either very large or very small
relative to the artboard get an independent chance of being deleted,
producing a fresh training variant of the draft without touching the
component ground truth. Deletions are driven by a counter-style RNG keyed
on (seed, epoch, layer id), so results are reproducible and independent
of traversal order.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from enum import Enum

from .model import DesignDraft, Layer, Rect, is_merge_marked

#: Object-size cutoffs used for corpus selection: drafts containing layers
#: smaller than SMALL_OBJECT_AREA or with aspect ratio above
#: HIGH_ASPECT_RATIO are the ones worth augmenting.
SMALL_OBJECT_AREA = 32.0 * 32.0
HIGH_ASPECT_RATIO = 3.0


class LayerClass(Enum):
    LARGE_DELETABLE = "large_deletable"
    SMALL_DELETABLE = "small_deletable"
    PROTECTED = "protected"


@dataclass(frozen=True)
class AugmentationConfig:
    seed: int = 0
    deletion_prob: float = 0.3
    large_width_ratio: float = 0.7
    large_area_ratio: float = 0.3
    small_width_ratio: float = 0.2
    small_area_ratio: float = 0.2
    epochs: int = 1
    # Delete exactly round(prob * deletable) layers instead of per-layer coin flips.
    exact_fraction: bool = False

    def __post_init__(self):
        for name in ("large_width_ratio", "large_area_ratio", "small_width_ratio", "small_area_ratio"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must be in (0, 1), got {v}")
        if not 0.0 <= self.deletion_prob <= 1.0:
            raise ValueError(f"deletion_prob must be in [0, 1], got {self.deletion_prob}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")


def classify_layer(layer: Layer, artboard: Rect, cfg: AugmentationConfig) -> LayerClass:
    """Deletion class of a single layer.

    Merge-marked layers are always protected. Otherwise a layer is
    large-deletable when its width or area dominates the artboard,
    small-deletable when its width or area is a small fraction of it, and
    protected when neither branch matches.
    """
    if artboard.area <= 0:
        raise ValueError("artboard area must be positive")
    if is_merge_marked(layer.name):
        return LayerClass.PROTECTED
    w, a = layer.rect.w, layer.rect.area
    if w > cfg.large_width_ratio * artboard.w or a > cfg.large_area_ratio * artboard.area:
        return LayerClass.LARGE_DELETABLE
    if w < cfg.small_width_ratio * artboard.w or a < cfg.small_area_ratio * artboard.area:
        return LayerClass.SMALL_DELETABLE
    return LayerClass.PROTECTED


def deletion_score(seed: int, epoch: int, layer_id: str) -> float:
    """Uniform [0, 1) variate keyed by (seed, epoch, layer id)."""
    key = f"{seed}:{epoch}:{layer_id}".encode("utf-8")
    digest = hashlib.blake2b(key, digest_size=8).digest()
    return int.from_bytes(digest, "big") / 2.0**64


def deletable_layer_ids(draft: DesignDraft, cfg: AugmentationConfig) -> list[str]:
    return [l.id for l in draft.leaf_layers()
            if classify_layer(l, draft.artboard, cfg) is not LayerClass.PROTECTED]


def augment_draft(draft: DesignDraft, cfg: AugmentationConfig, epoch: int) -> DesignDraft:
    """One augmented variant of a draft for a given epoch.

    Deletable leaves are removed independently with ``deletion_prob``
    (or as an exact fraction when configured); protected leaves and the
    tree structure are kept, and ``ground_truth`` is carried over
    unchanged. Identical (draft, cfg, epoch) always produces an identical
    result.
    """
    candidates = deletable_layer_ids(draft, cfg)
    if cfg.exact_fraction:
        k = round(cfg.deletion_prob * len(candidates))
        ranked = sorted(candidates, key=lambda lid: (deletion_score(cfg.seed, epoch, lid), lid))
        doomed = set(ranked[:k])
    else:
        doomed = {lid for lid in candidates
                  if deletion_score(cfg.seed, epoch, lid) < cfg.deletion_prob}

    def rebuild(layer: Layer) -> Layer | None:
        if layer.is_container:
            kept = tuple(c for c in map(rebuild, layer.children) if c is not None)
            return replace(layer, children=kept)
        return None if layer.id in doomed else layer

    tops = tuple(t for t in map(rebuild, draft.layers) if t is not None)
    return replace(draft, layers=tops)


def deleted_layer_ids(original: DesignDraft, augmented: DesignDraft) -> list[str]:
    """Ids present in the original draft but not in the augmented one."""
    remaining = {l.id for l in augmented.walk()}
    return [l.id for l in original.walk() if l.id not in remaining]


# ---------------------------------------------------------------------------
# Corpus-level selection
# ---------------------------------------------------------------------------

def draft_has_small_layers(draft: DesignDraft) -> bool:
    return any(l.rect.area < SMALL_OBJECT_AREA for l in draft.leaf_layers())


def draft_has_high_aspect_layers(draft: DesignDraft) -> bool:
    for l in draft.leaf_layers():
        w, h = l.rect.w, l.rect.h
        if w <= 0 or h <= 0:
            continue
        if max(w / h, h / w) > HIGH_ASPECT_RATIO:
            return True
    return False


@dataclass(frozen=True)
class CorpusSelection:
    small: tuple[int, ...]
    high_aspect: tuple[int, ...]

    @property
    def all(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.small) | set(self.high_aspect)))


def select_for_augmentation(drafts, fraction: float = 0.3, seed: int = 0) -> CorpusSelection:
    """Pick the corpus slices worth augmenting.

    For each focus category (drafts with small layers; drafts with
    high-aspect layers) a deterministic seeded sample of up to
    ``fraction`` of the whole corpus is selected from the eligible drafts.
    Returns indices into ``drafts``.
    """
    drafts = list(drafts)
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must be in [0, 1], got {fraction}")
    target = round(fraction * len(drafts))

    def pick(category: str, eligible: list[int]) -> tuple[int, ...]:
        ranked = sorted(eligible, key=lambda i: (deletion_score(seed, 0, f"{category}:{i}"), i))
        return tuple(sorted(ranked[:target]))

    small = pick("small", [i for i, d in enumerate(drafts) if draft_has_small_layers(d)])
    aspect = pick("aspect", [i for i, d in enumerate(drafts) if draft_has_high_aspect_layers(d)])
    return CorpusSelection(small=small, high_aspect=aspect)
