import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from layermerge.model import DesignDraft, DraftParseError, DraftSchemaError, Rect
from layermerge.parser import (
    LONG_SIDE_MAX,
    SHORT_SIDE_MAX,
    FlatLayerList,
    dedup_drafts,
    default_tile_height,
    flatten_layers,
    ground_truth_groups,
    harvest_ground_truth,
    parse_draft,
    tile_artboard,
    tile_manifest_to_dict,
    tiles_from_manifest_dict,
)
from layermerge.synth import generate_component_draft

from helpers import make_draft, make_group, make_layer, oracle_flatten_ids, oracle_union_box


def _draft_json(layers, w=100, h=100):
    return json.dumps({"schema_version": 1, "artboard": {"w": w, "h": h}, "layers": layers})


# ---------------------------------------------------------------------------
# Parsing and harvesting
# ---------------------------------------------------------------------------

def test_single_marked_layer_is_its_own_ground_truth():
    data = _draft_json([{"id": "a", "name": "icon #merge#", "type": "shape",
                         "x": 10, "y": 10, "w": 20, "h": 20}])
    draft = parse_draft(data)
    assert draft.ground_truth == (Rect(10, 10, 20, 20),)


def test_no_marked_layers_means_no_ground_truth():
    data = _draft_json([{"id": "a", "name": "plain", "type": "shape",
                         "x": 0, "y": 0, "w": 5, "h": 5}])
    assert parse_draft(data).ground_truth == ()


def test_marked_group_box_is_union_of_children():
    children = [
        {"id": "c0", "name": "c0", "type": "shape", "x": 0, "y": 0, "w": 10, "h": 10},
        {"id": "c1", "name": "c1", "type": "shape", "x": 5, "y": 5, "w": 10, "h": 10},
        {"id": "c2", "name": "c2", "type": "shape", "x": 20, "y": 0, "w": 4, "h": 4},
    ]
    data = _draft_json([{"id": "g", "name": "grp #merge#", "type": "group",
                         "x": 0, "y": 0, "w": 0, "h": 0, "children": children}])
    draft = parse_draft(data)
    want = oracle_union_box([Rect(0, 0, 10, 10), Rect(5, 5, 10, 10), Rect(20, 0, 4, 4)])
    assert want == Rect(0, 0, 24, 15)
    assert draft.ground_truth == (want,)


def test_malformed_json_reports_byte_offset():
    with pytest.raises(DraftParseError) as exc:
        parse_draft(b'{"schema_version": 1, !}')
    assert exc.value.offset == 22
    assert "22" in str(exc.value)


def test_schema_violation_names_field():
    with pytest.raises(DraftSchemaError) as exc:
        parse_draft(json.dumps({"schema_version": 1, "layers": []}))
    assert exc.value.field_path == "artboard"


def test_zero_area_marked_layers_are_skipped():
    data = _draft_json([{"id": "a", "name": "ghost #merge#", "type": "shape",
                         "x": 1, "y": 1, "w": 0, "h": 0}])
    assert parse_draft(data).ground_truth == ()


def test_nested_marked_layers_each_yield_a_box():
    inner = {"id": "c", "name": "sub #merge#", "type": "shape", "x": 2, "y": 2, "w": 4, "h": 4}
    data = _draft_json([{"id": "g", "name": "grp #merge#", "type": "group",
                         "x": 0, "y": 0, "w": 0, "h": 0, "children": [inner]}])
    assert parse_draft(data).ground_truth == (Rect(2, 2, 4, 4), Rect(2, 2, 4, 4))


def test_ground_truth_groups_collects_leaf_ids():
    draft = make_draft([
        make_group("g", [make_layer("b", 0, 0, 10, 10), make_layer("c", 5, 0, 10, 10)],
                   name="grp #merge#"),
        make_layer("noise", 50, 50, 5, 5),
    ])
    groups = ground_truth_groups(draft)
    assert len(groups) == 1
    assert groups[0].member_ids == frozenset({"b", "c"})
    assert groups[0].enclosing == Rect(0, 0, 15, 10)


# ---------------------------------------------------------------------------
# Flattening
# ---------------------------------------------------------------------------

def test_flatten_document_order_with_group():
    draft = make_draft([
        make_layer("A", 0, 0, 10, 10),
        make_group("G", [make_layer("B", 0, 0, 5, 5), make_layer("C", 5, 5, 5, 5)]),
    ])
    flat = flatten_layers(draft)
    assert [l.id for l in flat] == ["A", "B", "C"]
    assert [l.z_index for l in flat] == [0, 1, 2]


def test_flatten_empty_draft():
    assert len(flatten_layers(make_draft([]))) == 0


def _random_tree(rng, n_leaves):
    leaves = [make_layer(f"l{i}", rng.uniform(0, 90), rng.uniform(0, 90), 5, 5)
              for i in range(n_leaves)]
    nodes = list(leaves)
    gid = 0
    while len(nodes) > 1 and rng.random() < 0.8:
        k = rng.randint(1, min(4, len(nodes)))
        start = rng.randrange(0, len(nodes) - k + 1)
        grouped = nodes[start:start + k]
        nodes[start:start + k] = [make_group(f"g{gid}", grouped)]
        gid += 1
    return make_draft(nodes)


def test_flatten_matches_recursive_walk_oracle_on_random_trees():
    rng = random.Random(123)
    for _ in range(20):
        draft = _random_tree(rng, 50)
        flat = flatten_layers(draft)
        assert [l.id for l in flat] == oracle_flatten_ids(draft)


def test_flatten_is_a_bijection_on_leaves():
    rng = random.Random(9)
    for _ in range(10):
        draft = _random_tree(rng, 30)
        flat = flatten_layers(draft)
        leaf_ids = [l.id for l in draft.walk() if not l.is_container]
        assert sorted(l.id for l in flat) == sorted(leaf_ids)
        assert len(set(l.id for l in flat)) == len(flat)
        assert [l.z_index for l in flat] == list(range(len(flat)))


def test_flat_layer_list_lookup():
    flat = flatten_layers(make_draft([make_layer("a", 0, 0, 1, 1), make_layer("b", 2, 2, 1, 1)]))
    assert flat.index_of("b") == 1
    assert flat[0].id == "a"


# ---------------------------------------------------------------------------
# Tiling
# ---------------------------------------------------------------------------

def test_documented_derivation_for_750x3000():
    # Width 750 already fits the 800 px short-side budget, so tiles stay at
    # native scale and the default tile height is the 1333 px long-side cap:
    # ceil(3000 / 1333) = 3 tiles, every scale exactly 1.0.
    draft = DesignDraft(artboard=Rect(0, 0, 750, 3000), draft_id="d")
    assert default_tile_height(750) == 1333.0
    tiles = tile_artboard(draft)
    assert len(tiles) == 3
    assert [t.scale for t in tiles] == [1.0, 1.0, 1.0]
    assert [t.region.h for t in tiles] == [1333.0, 1333.0, 334.0]


def test_small_artboard_is_one_native_tile():
    draft = DesignDraft(artboard=Rect(0, 0, 400, 400), draft_id="d")
    tiles = tile_artboard(draft)
    assert len(tiles) == 1
    assert tiles[0].scale == 1.0
    assert tiles[0].region == Rect(0, 0, 400, 400)


def test_wide_artboard_downscales_to_budget():
    draft = DesignDraft(artboard=Rect(0, 0, 1600, 5000), draft_id="d")
    for t in tile_artboard(draft):
        assert t.scale <= 1.0
        short = min(t.scaled_width, t.scaled_height)
        long = max(t.scaled_width, t.scaled_height)
        assert short <= SHORT_SIDE_MAX + 1e-9
        assert long <= LONG_SIDE_MAX + 1e-9


def test_tiles_partition_the_artboard():
    draft = DesignDraft(artboard=Rect(0, 0, 750, 3000), draft_id="d")
    tiles = tile_artboard(draft, tile_height=1249.6875)
    assert len(tiles) == 3
    assert sum(t.region.h for t in tiles) == 3000
    ys = [t.region.y for t in tiles]
    assert ys == sorted(ys)
    for prev, cur in zip(tiles, tiles[1:]):
        assert cur.region.y == prev.region.y + prev.region.h


@settings(max_examples=60, deadline=None)
@given(st.floats(1, 5000), st.floats(1, 9000), st.one_of(st.none(), st.floats(10, 4000)))
def test_tile_constraints_hold_everywhere(w, h, th):
    draft = DesignDraft(artboard=Rect(0, 0, w, h), draft_id="d")
    tiles = tile_artboard(draft, tile_height=th)
    assert tiles
    assert sum(t.region.h for t in tiles) == pytest.approx(h)
    for t in tiles:
        assert t.scale <= 1.0
        assert min(t.scaled_width, t.scaled_height) <= SHORT_SIDE_MAX + 1e-6
        assert max(t.scaled_width, t.scaled_height) <= LONG_SIDE_MAX + 1e-6


def test_degenerate_artboard_rejected():
    with pytest.raises(ValueError):
        tile_artboard(DesignDraft(artboard=Rect(0, 0, 0, 100)))


def test_gt_box_lands_only_in_its_tile():
    draft = DesignDraft(artboard=Rect(0, 0, 400, 3000), draft_id="d",
                        ground_truth=(Rect(10, 1100, 50, 50),))
    tiles = tile_artboard(draft, tile_height=1000)
    assert [len(t.ground_truth) for t in tiles] == [0, 1, 0]
    # Tile 1 starts at y=1000, scale 1: box lands at y=100 in tile space.
    assert tiles[1].ground_truth[0] == Rect(10, 100, 50, 50)


def test_straddling_gt_box_kept_where_30_percent_survives():
    # 100-tall box crossing y=1000 at y=960: 40% above, 60% below.
    draft = DesignDraft(artboard=Rect(0, 0, 400, 2000), draft_id="d",
                        ground_truth=(Rect(0, 960, 50, 100),))
    tiles = tile_artboard(draft, tile_height=1000)
    assert len(tiles[0].ground_truth) == 1
    assert len(tiles[1].ground_truth) == 1
    # 75/25 split: only the 75% side keeps it.
    draft2 = DesignDraft(artboard=Rect(0, 0, 400, 2000), draft_id="d",
                         ground_truth=(Rect(0, 925, 50, 100),))
    tiles2 = tile_artboard(draft2, tile_height=1000)
    assert len(tiles2[0].ground_truth) == 1
    assert len(tiles2[1].ground_truth) == 0


def test_tile_gt_is_expressed_in_scaled_tile_space():
    # Single 1600x1000 tile: shorter side 1000 -> scale 800/1000 = 0.8
    # (the longer side then sits at 1280 <= 1333).
    draft = DesignDraft(artboard=Rect(0, 0, 1600, 1000), draft_id="d",
                        ground_truth=(Rect(100, 200, 400, 100),))
    tiles = tile_artboard(draft)
    assert len(tiles) == 1
    t = tiles[0]
    assert t.scale == 0.8
    assert t.ground_truth[0] == Rect(80, 160, 320, 80)


def test_tile_coordinate_round_trip():
    t = tile_artboard(DesignDraft(artboard=Rect(0, 0, 1600, 4000), draft_id="d"))[1]
    box = Rect(120.5, 3000.25, 40.0, 17.0)
    back = t.to_artboard(t.to_tile(box))
    for a, b in zip((back.x, back.y, back.w, back.h), (box.x, box.y, box.w, box.h)):
        assert a == pytest.approx(b, abs=1e-6)


def test_tile_manifest_round_trip():
    draft = generate_component_draft(5, draft_id="m")
    tiles = tile_artboard(draft)
    draft_id, again = tiles_from_manifest_dict(
        json.loads(json.dumps(tile_manifest_to_dict(draft, tiles))))
    assert draft_id == "m"
    assert again == tiles


# ---------------------------------------------------------------------------
# Duplicate removal
# ---------------------------------------------------------------------------

def test_exact_duplicate_screenshots_are_dropped():
    a = generate_component_draft(1, draft_id="a")
    b = DesignDraft(artboard=a.artboard, layers=a.layers, ground_truth=a.ground_truth,
                    draft_id="copy-of-a")
    c = generate_component_draft(2, draft_id="c")
    assert dedup_drafts([a, b, c]) == [0, 2]
