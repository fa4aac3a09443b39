"""Core domain types for layered UI design drafts.

A draft is an ordered tree of layers on a fixed-size artboard. Document
order is paint order: earlier layers are painted below later ones. The
draft file format is a small versioned JSON schema (documented in the
README), not a real design-tool archive.

All types are immutable after construction.
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterator

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

#: Layer-name token that marks a subtree as one mergeable component.
#: Matched case-insensitively as a substring so both "#merge#" and
#: "Merge me" qualify.
MERGE_MARKER = "merge"

_HEX_FILL_RE = re.compile(r"^#[0-9a-fA-F]{6}$")

# Schema keys that are accepted but carry no meaning for this toolchain.
_IGNORED_LAYER_KEYS = {"boolean_op"}
_KNOWN_LAYER_KEYS = {"id", "name", "type", "x", "y", "w", "h", "fill",
                     "children", "merged_from"} | _IGNORED_LAYER_KEYS
_KNOWN_DRAFT_KEYS = {"schema_version", "id", "artboard", "layers", "ground_truth"}


class DraftError(ValueError):
    """Base class for draft reading errors."""


class DraftParseError(DraftError):
    """The input is not valid JSON."""

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class DraftSchemaError(DraftError):
    """The JSON is well formed but violates the draft schema."""

    def __init__(self, message: str, field_path: str):
        super().__init__(f"{field_path}: {message}")
        self.field_path = field_path


def is_merge_marked(name: str) -> bool:
    """True if a layer name carries the merge marker."""
    return MERGE_MARKER in name.lower()


class LayerType(str, Enum):
    SHAPE = "shape"
    IMAGE = "image"
    TEXT = "text"
    GROUP = "group"
    OTHER = "other"


@dataclass(frozen=True)
class Rect:
    """Axis-aligned box: top-left corner plus non-negative extent, in pixels."""

    x: float
    y: float
    w: float
    h: float

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def right(self) -> float:
        return self.x + self.w

    @property
    def bottom(self) -> float:
        return self.y + self.h

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in (self.x, self.y, self.w, self.h))

    def to_dict(self) -> dict[str, float]:
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h}


@dataclass(frozen=True)
class Layer:
    """One node of the draft tree.

    Only leaves are painted; layers of type ``group`` structure the tree
    and carry no pixels of their own. ``z_index`` is assigned when a draft
    is flattened and is ``None`` on freshly parsed trees.
    """

    id: str
    name: str
    rect: Rect
    layer_type: LayerType = LayerType.SHAPE
    fill: tuple[int, int, int] | None = None
    children: tuple["Layer", ...] = ()
    z_index: int | None = None
    merged_from: tuple[str, ...] = ()

    @property
    def is_container(self) -> bool:
        return self.layer_type is LayerType.GROUP

    def walk(self) -> Iterator["Layer"]:
        """Yield this layer and all descendants in document order."""
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass(frozen=True)
class DesignDraft:
    """An artboard-sized canvas plus an ordered tree of layers.

    ``ground_truth`` holds the boxes of components whose layers should be
    merged, harvested from merge-marked layers (or carried over verbatim
    from the draft file when present).
    """

    artboard: Rect
    layers: tuple[Layer, ...] = ()
    ground_truth: tuple[Rect, ...] = ()
    draft_id: str = ""

    def walk(self) -> Iterator[Layer]:
        for layer in self.layers:
            yield from layer.walk()

    def leaf_layers(self) -> Iterator[Layer]:
        for layer in self.walk():
            if not layer.is_container:
                yield layer


@dataclass(frozen=True)
class MergeGroup:
    """A set of layer ids asserted to form one UI component."""

    member_ids: frozenset[str]
    enclosing: Rect
    source_box: Rect


@dataclass(frozen=True)
class Violation:
    rule: str
    layer_id: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __iter__(self) -> Iterator[Violation]:
        return iter(self.violations)

    def __len__(self) -> int:
        return len(self.violations)


def validate_draft(draft: DesignDraft) -> ValidationReport:
    """Check every type invariant; never raises.

    Returns an empty report iff the draft is well formed. Each violation
    names the offending layer id (empty for draft-level rules) and rule.
    """
    out: list[Violation] = []
    ab = draft.artboard
    if ab.x != 0 or ab.y != 0:
        out.append(Violation("artboard-origin", "", f"artboard origin must be (0,0), got ({ab.x},{ab.y})"))
    if not ab.is_finite():
        out.append(Violation("nonfinite-coordinate", "", "artboard has non-finite extent"))
    elif ab.w <= 0 or ab.h <= 0:
        out.append(Violation("artboard-extent", "", f"artboard extent must be positive, got {ab.w}x{ab.h}"))

    seen: set[str] = set()
    for layer in draft.walk():
        if layer.id in seen:
            out.append(Violation("duplicate-id", layer.id, f"layer id {layer.id!r} appears more than once"))
        seen.add(layer.id)
        if not layer.rect.is_finite():
            out.append(Violation("nonfinite-coordinate", layer.id, "layer rect has non-finite values"))
        elif layer.rect.w < 0 or layer.rect.h < 0:
            out.append(Violation("negative-extent", layer.id,
                                 f"layer extent must be non-negative, got {layer.rect.w}x{layer.rect.h}"))
        if layer.children and not layer.is_container:
            out.append(Violation("children-on-leaf", layer.id,
                                 f"layer of type {layer.layer_type.value!r} must not have children"))

    for i, box in enumerate(draft.ground_truth):
        if not box.is_finite():
            out.append(Violation("nonfinite-coordinate", "", f"ground_truth[{i}] has non-finite values"))
        elif box.area <= 0:
            out.append(Violation("ground-truth-area", "", f"ground_truth[{i}] must have positive area"))

    return ValidationReport(tuple(out))


# ---------------------------------------------------------------------------
# Serialization (schema version 1)
# ---------------------------------------------------------------------------

def fill_to_hex(fill: tuple[int, int, int]) -> str:
    return "#{:02X}{:02X}{:02X}".format(*fill)


def _fill_from_hex(value: Any, path: str) -> tuple[int, int, int]:
    if not isinstance(value, str) or not _HEX_FILL_RE.match(value):
        raise DraftSchemaError("fill must be a '#RRGGBB' string", path)
    return (int(value[1:3], 16), int(value[3:5], 16), int(value[5:7], 16))


def _require_number(obj: dict, key: str, path: str) -> float:
    if key not in obj:
        raise DraftSchemaError("missing required key", f"{path}.{key}")
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DraftSchemaError("expected a number", f"{path}.{key}")
    return value


def _require_str(obj: dict, key: str, path: str) -> str:
    if key not in obj:
        raise DraftSchemaError("missing required key", f"{path}.{key}")
    value = obj[key]
    if not isinstance(value, str):
        raise DraftSchemaError("expected a string", f"{path}.{key}")
    return value


def rect_from_dict(obj: Any, path: str) -> Rect:
    if not isinstance(obj, dict):
        raise DraftSchemaError("expected an object with x,y,w,h", path)
    return Rect(_require_number(obj, "x", path), _require_number(obj, "y", path),
                _require_number(obj, "w", path), _require_number(obj, "h", path))


def layer_to_dict(layer: Layer) -> dict[str, Any]:
    out: dict[str, Any] = {
        "id": layer.id,
        "name": layer.name,
        "type": layer.layer_type.value,
        "x": layer.rect.x,
        "y": layer.rect.y,
        "w": layer.rect.w,
        "h": layer.rect.h,
    }
    if layer.fill is not None:
        out["fill"] = fill_to_hex(layer.fill)
    if layer.merged_from:
        out["merged_from"] = list(layer.merged_from)
    if layer.children:
        out["children"] = [layer_to_dict(c) for c in layer.children]
    return out


def layer_from_dict(obj: Any, path: str = "layers[0]") -> Layer:
    if not isinstance(obj, dict):
        raise DraftSchemaError("expected a layer object", path)
    for key in obj:
        if key not in _KNOWN_LAYER_KEYS:
            logger.warning("ignoring unknown layer key %r at %s", key, path)
    layer_id = _require_str(obj, "id", path)
    name = _require_str(obj, "name", path)
    type_str = _require_str(obj, "type", path)
    try:
        layer_type = LayerType(type_str)
    except ValueError:
        logger.warning("unknown layer type %r at %s, treating as 'other'", type_str, path)
        layer_type = LayerType.OTHER
    rect = Rect(_require_number(obj, "x", path), _require_number(obj, "y", path),
                _require_number(obj, "w", path), _require_number(obj, "h", path))
    fill = _fill_from_hex(obj["fill"], f"{path}.fill") if "fill" in obj else None

    merged_from: tuple[str, ...] = ()
    if "merged_from" in obj:
        raw = obj["merged_from"]
        if not isinstance(raw, list) or not all(isinstance(v, str) for v in raw):
            raise DraftSchemaError("expected a list of strings", f"{path}.merged_from")
        merged_from = tuple(raw)

    children: tuple[Layer, ...] = ()
    if "children" in obj:
        raw = obj["children"]
        if not isinstance(raw, list):
            raise DraftSchemaError("expected a list of layers", f"{path}.children")
        if layer_type is not LayerType.GROUP:
            raise DraftSchemaError("children are only allowed on 'group' layers", f"{path}.children")
        children = tuple(layer_from_dict(c, f"{path}.children[{i}]") for i, c in enumerate(raw))

    return Layer(id=layer_id, name=name, rect=rect, layer_type=layer_type,
                 fill=fill, children=children, merged_from=merged_from)


def draft_to_dict(draft: DesignDraft) -> dict[str, Any]:
    out: dict[str, Any] = {"schema_version": SCHEMA_VERSION}
    if draft.draft_id:
        out["id"] = draft.draft_id
    out["artboard"] = {"w": draft.artboard.w, "h": draft.artboard.h}
    out["layers"] = [layer_to_dict(l) for l in draft.layers]
    out["ground_truth"] = [b.to_dict() for b in draft.ground_truth]
    return out


def draft_to_json(draft: DesignDraft) -> str:
    return json.dumps(draft_to_dict(draft), indent=2) + "\n"


def draft_from_dict(obj: Any) -> DesignDraft:
    """Build a draft from a schema-version-1 dict.

    Unknown keys are ignored with a warning; missing or mistyped required
    keys raise :class:`DraftSchemaError` naming the field. The returned
    draft carries ``ground_truth`` only if the dict had the key; callers
    wanting harvested boxes should go through ``parser.parse_draft``.
    """
    if not isinstance(obj, dict):
        raise DraftSchemaError("expected a top-level object", "$")
    for key in obj:
        if key not in _KNOWN_DRAFT_KEYS:
            logger.warning("ignoring unknown draft key %r", key)
    version = obj.get("schema_version")
    if version != SCHEMA_VERSION:
        raise DraftSchemaError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})",
                               "schema_version")
    if "artboard" not in obj:
        raise DraftSchemaError("missing required key", "artboard")
    ab = obj["artboard"]
    artboard = Rect(0.0, 0.0, _require_number(ab, "w", "artboard"), _require_number(ab, "h", "artboard"))

    raw_layers = obj.get("layers", [])
    if not isinstance(raw_layers, list):
        raise DraftSchemaError("expected a list of layers", "layers")
    layers = tuple(layer_from_dict(l, f"layers[{i}]") for i, l in enumerate(raw_layers))

    ground_truth: tuple[Rect, ...] = ()
    if "ground_truth" in obj:
        raw_gt = obj["ground_truth"]
        if not isinstance(raw_gt, list):
            raise DraftSchemaError("expected a list of boxes", "ground_truth")
        ground_truth = tuple(rect_from_dict(b, f"ground_truth[{i}]") for i, b in enumerate(raw_gt))

    draft_id = obj.get("id", "")
    if not isinstance(draft_id, str):
        raise DraftSchemaError("expected a string", "id")

    return DesignDraft(artboard=artboard, layers=layers, ground_truth=ground_truth, draft_id=draft_id)
