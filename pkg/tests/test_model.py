import itertools
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from layermerge.model import (
    DesignDraft,
    DraftSchemaError,
    Layer,
    LayerType,
    Rect,
    draft_from_dict,
    draft_to_dict,
    draft_to_json,
    is_merge_marked,
    validate_draft,
)
from layermerge.parser import harvest_ground_truth, parse_draft

from helpers import make_draft, make_group, make_layer


def test_valid_three_layer_draft_has_empty_report():
    draft = make_draft([make_layer("a", 0, 0, 10, 10),
                        make_layer("b", 20, 0, 10, 10),
                        make_layer("c", 40, 0, 10, 10)])
    assert validate_draft(draft).ok


def test_duplicate_id_reported_once():
    draft = make_draft([make_layer("a", 0, 0, 10, 10), make_layer("a", 5, 5, 10, 10)])
    report = validate_draft(draft)
    dupes = [v for v in report if v.rule == "duplicate-id"]
    assert len(dupes) == 1
    assert dupes[0].layer_id == "a"


def test_negative_extent_reported():
    draft = make_draft([make_layer("a", 0, 0, -1, 10)])
    report = validate_draft(draft)
    assert [v.rule for v in report] == ["negative-extent"]


def test_nonfinite_coordinates_reported():
    draft = make_draft([make_layer("a", float("nan"), 0, 1, 1)])
    assert any(v.rule == "nonfinite-coordinate" for v in validate_draft(draft))


def test_zero_area_artboard_reported():
    draft = make_draft([], w=0, h=100)
    assert any(v.rule == "artboard-extent" for v in validate_draft(draft))


def test_degenerate_ground_truth_reported():
    draft = make_draft([], ground_truth=(Rect(0, 0, 0, 5),))
    assert any(v.rule == "ground-truth-area" for v in validate_draft(draft))


def test_children_on_leaf_reported():
    bad = Layer(id="a", name="a", rect=Rect(0, 0, 1, 1), layer_type=LayerType.SHAPE,
                children=(make_layer("b", 0, 0, 1, 1),))
    draft = make_draft([bad])
    assert any(v.rule == "children-on-leaf" for v in validate_draft(draft))


def test_validation_never_throws_on_garbage_geometry():
    draft = make_draft([make_layer("a", float("inf"), 0, -3, float("nan"))])
    report = validate_draft(draft)
    assert not report.ok


@pytest.mark.parametrize("name,expected", [
    ("icon #merge#", True),
    ("Merge me", True,),
    ("MERGED-1", True),
    ("plain layer", False),
    ("", False),
])
def test_merge_marker_is_case_insensitive_substring(name, expected):
    assert is_merge_marked(name) is expected


# ---------------------------------------------------------------------------
# Schema reading
# ---------------------------------------------------------------------------

def _minimal_dict():
    return {
        "schema_version": 1,
        "artboard": {"w": 100, "h": 100},
        "layers": [{"id": "a", "name": "a", "type": "shape", "x": 0, "y": 0, "w": 10, "h": 10}],
    }


def test_missing_required_key_names_the_field():
    obj = _minimal_dict()
    del obj["layers"][0]["w"]
    with pytest.raises(DraftSchemaError) as exc:
        draft_from_dict(obj)
    assert exc.value.field_path == "layers[0].w"


def test_wrong_schema_version_rejected():
    obj = _minimal_dict()
    obj["schema_version"] = 99
    with pytest.raises(DraftSchemaError) as exc:
        draft_from_dict(obj)
    assert exc.value.field_path == "schema_version"


def test_unknown_layer_type_becomes_other(caplog):
    obj = _minimal_dict()
    obj["layers"][0]["type"] = "artboard-thing"
    with caplog.at_level("WARNING"):
        draft = draft_from_dict(obj)
    assert draft.layers[0].layer_type is LayerType.OTHER
    assert "artboard-thing" in caplog.text


def test_unknown_keys_ignored_with_warning(caplog):
    obj = _minimal_dict()
    obj["layers"][0]["opacity"] = 0.5
    obj["frobnicate"] = True
    with caplog.at_level("WARNING"):
        draft = draft_from_dict(obj)
    assert draft.layers[0].id == "a"
    assert "opacity" in caplog.text and "frobnicate" in caplog.text


def test_boolean_op_accepted_silently(caplog):
    obj = _minimal_dict()
    obj["layers"][0]["boolean_op"] = "union"
    with caplog.at_level("WARNING"):
        draft_from_dict(obj)
    assert "boolean_op" not in caplog.text


def test_children_only_on_groups():
    obj = _minimal_dict()
    obj["layers"][0]["children"] = []
    with pytest.raises(DraftSchemaError) as exc:
        draft_from_dict(obj)
    assert "children" in exc.value.field_path


def test_bad_fill_rejected():
    obj = _minimal_dict()
    obj["layers"][0]["fill"] = "red"
    with pytest.raises(DraftSchemaError):
        draft_from_dict(obj)


def test_fill_parses_to_rgb_tuple():
    obj = _minimal_dict()
    obj["layers"][0]["fill"] = "#0A80FF"
    assert draft_from_dict(obj).layers[0].fill == (10, 128, 255)


def test_explicit_ground_truth_is_used_verbatim():
    obj = _minimal_dict()
    obj["layers"][0]["name"] = "icon #merge#"
    obj["ground_truth"] = []
    draft = parse_draft(json.dumps(obj))
    assert draft.ground_truth == ()


# ---------------------------------------------------------------------------
# Round trip and harvesting idempotence
# ---------------------------------------------------------------------------

_finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)
_extent = st.floats(min_value=0, max_value=1e6, allow_nan=False, allow_infinity=False)
_names = st.text(min_size=0, max_size=12)
_rgb = st.tuples(st.integers(0, 255), st.integers(0, 255), st.integers(0, 255))
_leaf_types = st.sampled_from([LayerType.SHAPE, LayerType.IMAGE, LayerType.TEXT, LayerType.OTHER])


@st.composite
def draft_trees(draw):
    counter = itertools.count()

    def leaf():
        i = next(counter)
        return Layer(
            id=f"l{i}",
            name=draw(_names),
            rect=Rect(draw(_finite), draw(_finite), draw(_extent), draw(_extent)),
            layer_type=draw(_leaf_types),
            fill=draw(st.one_of(st.none(), _rgb)),
        )

    def node(depth):
        if depth == 0 or draw(st.booleans()):
            return leaf()
        kids = tuple(node(depth - 1) for _ in range(draw(st.integers(0, 3))))
        i = next(counter)
        return Layer(id=f"g{i}", name=draw(_names), rect=Rect(0, 0, 0, 0),
                     layer_type=LayerType.GROUP, children=kids)

    tops = tuple(node(2) for _ in range(draw(st.integers(0, 5))))
    gt = tuple(Rect(draw(_finite), draw(_finite), draw(_extent), draw(_extent))
               for _ in range(draw(st.integers(0, 3))))
    return DesignDraft(artboard=Rect(0, 0, draw(_extent) + 1, draw(_extent) + 1),
                       layers=tops, ground_truth=gt,
                       draft_id=draw(st.text(max_size=8)))


@settings(max_examples=60, deadline=None)
@given(draft_trees())
def test_serialization_round_trip(draft):
    assert parse_draft(draft_to_json(draft)) == draft


@settings(max_examples=40, deadline=None)
@given(draft_trees())
def test_ground_truth_harvest_is_idempotent(draft):
    first = harvest_ground_truth(draft.layers)
    second = harvest_ground_truth(draft.layers)
    assert first == second


def test_round_trip_preserves_nested_structure_exactly():
    draft = make_draft([
        make_layer("a", 0.5, -2.25, 10, 10, fill=(1, 2, 3)),
        make_group("g", [make_layer("b", 1, 1, 2, 2), make_layer("c", 3, 3, 4, 4)],
                   name="grp #merge#"),
    ], draft_id="fixture")
    draft = DesignDraft(artboard=draft.artboard, layers=draft.layers,
                        ground_truth=harvest_ground_truth(draft.layers), draft_id="fixture")
    again = parse_draft(draft_to_json(draft))
    assert again == draft
    assert draft_to_dict(again) == draft_to_dict(draft)
