"""Batch pipeline CLI: parse, rasterize, augment, detect, merge, evaluate.

One binary with subcommands. Every run is reproducible: all randomness
flows from --seed, outputs are written atomically, and re-running with
the same config overwrites artifacts byte-identically. Verbosity comes
from --log-level or the UILM_LOG environment variable.

Exit codes: 0 success, 1 partial failure (some inputs failed),
2 invalid invocation or total failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Sequence

from . import __version__
from .augment import AugmentationConfig, augment_draft, deleted_layer_ids, select_for_augmentation
from .merge import (
    BOX_ORDER_AREA_ASC,
    BOX_ORDER_TOP_LEFT,
    DISTANCE_DISABLED,
    DISTANCE_MEAN_GAP,
    MergerConfig,
    apply_merge,
    merge_layers,
)
from .metrics import Detection, coco_map, mean_layers_iou
from .model import (
    DesignDraft,
    DraftError,
    MergeGroup,
    Rect,
    draft_to_json,
    validate_draft,
)
from .parser import (
    FlatLayerList,
    Tile,
    dedup_drafts,
    flatten_layers,
    ground_truth_groups,
    parse_draft,
    tile_artboard,
    tile_manifest_to_dict,
    tiles_from_manifest_dict,
)
from .predictions import map_to_artboard, read_predictions, write_predictions
from .raster import (
    Raster,
    compose_spatial_fusion,
    draw_rect_outline,
    render_screenshot,
    render_segmentation_map,
)
from .synth import generate_component_draft, generate_dense_draft

logger = logging.getLogger(__name__)

GROUPS_SCHEMA_VERSION = 1
GT_SCHEMA_VERSION = 1

GT_COLOR = (255, 0, 0)
PREDICTION_COLOR = (0, 255, 0)


# ---------------------------------------------------------------------------
# Small IO helpers (atomic writes, deterministic JSON)
# ---------------------------------------------------------------------------

def _write_bytes(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _write_json(path: Path, obj: Any) -> None:
    _write_bytes(path, (json.dumps(obj, indent=2) + "\n").encode("utf-8"))


def _read_json(path: Path) -> Any:
    return json.loads(Path(path).read_text("utf-8"))


def _basename_if_path(value: Any) -> Any:
    if isinstance(value, Path):
        return value.name
    if isinstance(value, str) and os.sep in value:
        return os.path.basename(value)
    return value


def _sanitize_config(args: argparse.Namespace) -> dict[str, Any]:
    """Flag values with paths reduced to basenames, for the run record.

    Keeps re-runs of the same pipeline byte-identical even when inputs
    live under different directories.
    """
    out: dict[str, Any] = {}
    for key, value in sorted(vars(args).items()):
        if key in ("func", "command", "config"):
            continue
        if isinstance(value, list):
            value = [_basename_if_path(v) for v in value]
        else:
            value = _basename_if_path(value)
        out[key] = value
    return out


def _write_run_meta(out_dir: Path, command: str, args: argparse.Namespace) -> None:
    config = _sanitize_config(args)
    payload = json.dumps(config, sort_keys=True).encode("utf-8")
    meta = {
        "command": command,
        "config": config,
        "config_hash": hashlib.sha256(payload).hexdigest(),
        "seed": config.get("seed"),
        "version": __version__,
    }
    _write_json(out_dir / f"{command}.run.json", meta)


def _exit_code(total: int, failed: int) -> int:
    if failed == 0:
        return 0
    return 2 if failed == total else 1


def _run_per_file(worker: Callable, items: Sequence, jobs: int) -> list:
    """Apply a worker to each item, optionally across processes.

    Returns (item, result, error) triples in input order.
    """
    results = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(worker, item) for item in items]
            for item, fut in zip(items, futures):
                try:
                    results.append((item, fut.result(), None))
                except Exception as e:  # per-file isolation
                    results.append((item, None, e))
    else:
        for item in items:
            try:
                results.append((item, worker(item), None))
            except Exception as e:
                results.append((item, None, e))
    return results


def _load_draft(path: Path) -> DesignDraft:
    draft = parse_draft(Path(path).read_bytes())
    if not draft.draft_id:
        draft = replace(draft, draft_id=Path(path).stem.split(".")[0])
    return draft


def _load_tiles(path: Path | None) -> tuple[str, list[Tile]] | None:
    if path is None:
        return None
    return tiles_from_manifest_dict(_read_json(path))


# ---------------------------------------------------------------------------
# Ground truth and group files
# ---------------------------------------------------------------------------

def _gt_file_dict(draft: DesignDraft) -> dict[str, Any]:
    return {
        "schema_version": GT_SCHEMA_VERSION,
        "images": [{"image_id": draft.draft_id, "boxes": [b.to_dict() for b in draft.ground_truth]}],
    }


def _gts_from_file(obj: dict[str, Any]) -> dict[str, list[Rect]]:
    """Accepts both the gt file schema and a tile manifest."""
    if "tiles" in obj:
        _, tiles = tiles_from_manifest_dict(obj)
        return {t.image_id: list(t.ground_truth) for t in tiles}
    out: dict[str, list[Rect]] = {}
    for image in obj.get("images", []):
        out[image["image_id"]] = [Rect(b["x"], b["y"], b["w"], b["h"]) for b in image["boxes"]]
    return out


def _groups_to_dict(draft_id: str, groups: Sequence[MergeGroup],
                    flat: FlatLayerList | None = None) -> dict[str, Any]:
    def order_key(lid: str):
        return flat.index_of(lid) if flat is not None and lid in flat.by_id else lid

    return {
        "schema_version": GROUPS_SCHEMA_VERSION,
        "draft_id": draft_id,
        "groups": [
            {
                "member_ids": sorted(g.member_ids, key=order_key),
                "enclosing": g.enclosing.to_dict(),
                "source_box": g.source_box.to_dict(),
            }
            for g in groups
        ],
    }


def _groups_from_file(obj: dict[str, Any]) -> list[MergeGroup]:
    """Accepts a groups file, or a draft file (its marked components)."""
    if "layers" in obj and "groups" not in obj:
        from .model import draft_from_dict

        return ground_truth_groups(draft_from_dict(obj))
    groups = []
    for g in obj.get("groups", []):
        enc = g["enclosing"]
        src = g.get("source_box", enc)
        groups.append(MergeGroup(
            member_ids=frozenset(g["member_ids"]),
            enclosing=Rect(enc["x"], enc["y"], enc["w"], enc["h"]),
            source_box=Rect(src["x"], src["y"], src["w"], src["h"]),
        ))
    return groups


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_gen_corpus(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    for i in range(args.count):
        if args.kind == "dense":
            draft = generate_dense_draft(args.seed * 100003 + i, draft_id=f"synth-{i:03d}")
        else:
            draft = generate_component_draft(args.seed * 100003 + i, draft_id=f"synth-{i:03d}")
        _write_bytes(out_dir / f"{draft.draft_id}.json", draft_to_json(draft).encode("utf-8"))
    _write_run_meta(out_dir, "gen-corpus", args)
    print(f"wrote {args.count} drafts to {out_dir}")
    return 0


def _parse_one(path: Path) -> DesignDraft:
    draft = _load_draft(path)
    report = validate_draft(draft)
    if not report.ok:
        details = "; ".join(f"{v.rule}({v.layer_id}): {v.message}" for v in report)
        raise DraftError(f"invalid draft: {details}")
    return draft


def cmd_parse(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    results = _run_per_file(_parse_one, [Path(p) for p in args.drafts], args.jobs)
    failed = 0
    parsed: list[tuple[Path, DesignDraft]] = []
    for path, draft, error in results:
        if error is not None:
            failed += 1
            logger.error("%s: %s", path, error)
            print(f"error: {path}: {error}", file=sys.stderr)
        else:
            parsed.append((path, draft))

    if args.dedup and parsed:
        keep = set(dedup_drafts([d for _, d in parsed]))
        parsed = [pd for i, pd in enumerate(parsed) if i in keep]

    corpus = []
    for path, draft in parsed:
        stem = draft.draft_id
        tiles = tile_artboard(draft, args.tile_height)
        _write_bytes(out_dir / f"{stem}.draft.json", draft_to_json(draft).encode("utf-8"))
        _write_json(out_dir / f"{stem}.gt.json", _gt_file_dict(draft))
        _write_json(out_dir / f"{stem}.tiles.json", tile_manifest_to_dict(draft, tiles))
        corpus.append({
            "draft_id": stem,
            "draft": f"{stem}.draft.json",
            "ground_truth": f"{stem}.gt.json",
            "tiles": f"{stem}.tiles.json",
        })
    _write_json(out_dir / "corpus.json", {"schema_version": 1, "drafts": corpus})
    _write_run_meta(out_dir, "parse", args)
    print(f"parsed {len(parsed)} drafts ({failed} failed)")
    return _exit_code(len(results), failed)


def _rasterize_one(item: tuple[Path, Path]) -> str:
    path, out_dir = item
    draft = _load_draft(path)
    flat = flatten_layers(draft)
    screenshot = render_screenshot(flat, draft.artboard)
    segmap = render_segmentation_map(flat, draft.artboard)
    compose_spatial_fusion(screenshot, segmap)  # dimension sanity before writing
    stem = draft.draft_id
    _write_bytes(out_dir / f"{stem}.screenshot.png", screenshot.to_png_bytes())
    _write_bytes(out_dir / f"{stem}.segmap.png", segmap.to_png_bytes())
    _write_json(out_dir / f"{stem}.fusion.json",
                {"screenshot": f"{stem}.screenshot.png", "segmap": f"{stem}.segmap.png"})
    return stem


def cmd_rasterize(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    items = [(Path(p), out_dir) for p in args.drafts]
    results = _run_per_file(_rasterize_one, items, args.jobs)
    failed = sum(1 for _, _, e in results if e is not None)
    for (path, _), _, error in zip(items, [r[1] for r in results], [r[2] for r in results]):
        if error is not None:
            print(f"error: {path}: {error}", file=sys.stderr)
    _write_run_meta(out_dir, "rasterize", args)
    print(f"rasterized {len(results) - failed} drafts ({failed} failed)")
    return _exit_code(len(results), failed)


def cmd_augment(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    cfg = AugmentationConfig(seed=args.seed, deletion_prob=args.deletion_prob,
                             epochs=args.epochs, exact_fraction=args.exact_fraction)
    paths = [Path(p) for p in args.drafts]
    results = _run_per_file(_load_draft, paths, args.jobs)
    failed = 0
    loaded: list[DesignDraft] = []
    loaded_paths: list[Path] = []
    for path, draft, error in results:
        if error is not None:
            failed += 1
            print(f"error: {path}: {error}", file=sys.stderr)
        else:
            loaded.append(draft)
            loaded_paths.append(path)

    if args.select_fraction is not None:
        selection = select_for_augmentation(loaded, args.select_fraction, args.seed)
        chosen = set(selection.all)
    else:
        chosen = set(range(len(loaded)))

    audit = []
    for i, draft in enumerate(loaded):
        if i not in chosen:
            continue
        for epoch in range(cfg.epochs):
            augmented = augment_draft(draft, cfg, epoch)
            name = f"{draft.draft_id}.e{epoch}.json"
            _write_bytes(out_dir / name, draft_to_json(augmented).encode("utf-8"))
            audit.append({
                "draft_id": draft.draft_id,
                "epoch": epoch,
                "output": name,
                "deleted": deleted_layer_ids(draft, augmented),
            })
    _write_json(out_dir / "augment.audit.json", {"schema_version": 1, "entries": audit})
    _write_run_meta(out_dir, "augment", args)
    print(f"augmented {len(chosen)} drafts x {cfg.epochs} epochs ({failed} failed)")
    return _exit_code(len(results), failed)


def cmd_detect_baseline(args: argparse.Namespace) -> int:
    from .predictions import baseline_detect

    out = Path(args.out)
    dets: list[Detection] = []
    failed = 0
    paths = [Path(p) for p in args.drafts]
    for path in paths:
        try:
            draft = _load_draft(path)
            dets.extend(baseline_detect(draft, args.proximity, args.min_group))
        except Exception as e:
            failed += 1
            print(f"error: {path}: {e}", file=sys.stderr)
    _write_bytes(out, write_predictions(dets))
    _write_run_meta(out.parent, "detect-baseline", args)
    print(f"wrote {len(dets)} detections from {len(paths) - failed} drafts ({failed} failed)")
    return _exit_code(len(paths), failed)


def cmd_merge(args: argparse.Namespace) -> int:
    draft = _load_draft(Path(args.draft))
    manifest = _load_tiles(Path(args.tile_manifest) if args.tile_manifest else None)
    dets = read_predictions(Path(args.predictions).read_bytes())
    if manifest is not None:
        draft_id, tiles = manifest
        dets = map_to_artboard(dets, tiles, draft_id or draft.draft_id)
    cfg = MergerConfig(
        intersection_threshold=args.t_i,
        box_order=BOX_ORDER_AREA_ASC if args.box_order == "area-asc" else BOX_ORDER_TOP_LEFT,
        distance_rule=DISTANCE_DISABLED if args.distance_rule == "disabled" else DISTANCE_MEAN_GAP,
    )
    result = merge_layers([d.box for d in dets], draft, cfg)
    merged = apply_merge(draft, result)
    out = Path(args.out)
    _write_bytes(out, draft_to_json(merged).encode("utf-8"))
    if args.report:
        flat = flatten_layers(draft)
        _write_json(Path(args.report), _groups_to_dict(draft.draft_id, result.groups, flat))
    _write_run_meta(out.parent, "merge", args)
    print(f"merged {sum(len(g.member_ids) for g in result.groups)} layers "
          f"into {len(result.groups)} components")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    if not (args.detections or args.pred_groups):
        raise UsageError("eval needs --detections/--gt, --pred-groups/--gt-groups, or both")
    report_obj: dict[str, Any] = {"schema_version": 1}

    if args.detections:
        if not args.gt:
            raise UsageError("--detections requires --gt")
        dets = read_predictions(Path(args.detections).read_bytes())
        manifest = _load_tiles(Path(args.tile_manifest) if args.tile_manifest else None)
        if manifest is not None:
            draft_id, tiles = manifest
            dets = map_to_artboard(dets, tiles, draft_id)
        gts = _gts_from_file(_read_json(Path(args.gt)))
        report = coco_map(dets, gts)
        print(report.format_table())
        report_obj["detection"] = report.to_dict()

    if args.pred_groups:
        if not args.gt_groups:
            raise UsageError("--pred-groups requires --gt-groups")
        pred = _groups_from_file(_read_json(Path(args.pred_groups)))
        gt = _groups_from_file(_read_json(Path(args.gt_groups)))
        value = mean_layers_iou(pred, gt)
        print(f"mean layers IoU {value:.4f}")
        report_obj["merging"] = {
            "mean_layers_iou": value,
            "group_matching": "greedy descending set-IoU, normalized by reference group count",
        }

    if args.report:
        _write_json(Path(args.report), report_obj)
        _write_run_meta(Path(args.report).parent, "eval", args)
    return 0


def cmd_render_overlay(args: argparse.Namespace) -> int:
    draft = _load_draft(Path(args.draft))
    flat = flatten_layers(draft)
    canvas: Raster = render_screenshot(flat, draft.artboard).copy()
    for box in draft.ground_truth:
        draw_rect_outline(canvas, box, GT_COLOR, thickness=2)
    for layer in draft.walk():
        if layer.merged_from:
            draw_rect_outline(canvas, layer.rect, GT_COLOR, thickness=1)
    if args.predictions:
        dets = read_predictions(Path(args.predictions).read_bytes())
        manifest = _load_tiles(Path(args.tile_manifest) if args.tile_manifest else None)
        if manifest is not None:
            draft_id, tiles = manifest
            dets = map_to_artboard(dets, tiles, draft_id)
        for det in dets:
            draw_rect_outline(canvas, det.box, PREDICTION_COLOR, thickness=2)
    out = Path(args.out)
    _write_bytes(out, canvas.to_png_bytes())
    _write_run_meta(out.parent, "render-overlay", args)
    print(f"wrote {out}")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

class UsageError(Exception):
    pass


def _load_config(path: str) -> dict[str, Any]:
    """Key/value config: one ``name = value`` pair per line, # comments.

    Keys use the flag name with dashes or underscores; values are parsed
    as JSON scalars when possible, else kept as strings.
    """
    out: dict[str, Any] = {}
    for lineno, raw in enumerate(Path(path).read_text("utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def build_arg_parser(defaults: dict[str, Any] | None = None) -> argparse.ArgumentParser:
    """Build the CLI parser, optionally seeding config-file defaults.

    Defaults are applied to each subparser (a subcommand parses into a
    fresh namespace, so top-level set_defaults would be clobbered).
    """
    parser = argparse.ArgumentParser(
        prog="layermerge",
        description="Detect and merge fragmented layers in UI design drafts.")
    parser.add_argument("--log-level", default=None,
                        help="logging level (overrides UILM_LOG)")
    parser.add_argument("--config", default=None,
                        help="key=value config file; flags override it")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="generate a synthetic draft corpus")
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kind", choices=("components", "dense"), default="components")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("parse", help="validate drafts, harvest ground truth, emit tiles")
    p.add_argument("drafts", nargs="+")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--tile-height", type=float, default=None,
                   help="tile height in artboard pixels (default: derived from the size budget)")
    p.add_argument("--dedup", action="store_true",
                   help="drop drafts whose rendered screenshots are exact duplicates")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("rasterize", help="render screenshots, boundary maps, and fusion manifests")
    p.add_argument("drafts", nargs="+")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_rasterize)

    p = sub.add_parser("augment", help="write epoch-wise augmented draft variants")
    p.add_argument("drafts", nargs="+")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--deletion-prob", type=float, default=0.3)
    p.add_argument("--exact-fraction", action="store_true",
                   help="delete exactly round(prob * deletable) layers per epoch")
    p.add_argument("--select-fraction", type=float, default=None,
                   help="augment only a seeded selection of small/high-aspect drafts")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("detect-baseline", help="run the proximity-clustering baseline detector")
    p.add_argument("drafts", nargs="+")
    p.add_argument("--out", required=True, help="predictions JSON to write")
    p.add_argument("--proximity", type=float, default=0.0,
                   help="edge-to-edge gap (px) at which layers cluster")
    p.add_argument("--min-group", type=int, default=2)
    p.set_defaults(func=cmd_detect_baseline)

    p = sub.add_parser("merge", help="group and merge layers under predicted boxes")
    p.add_argument("--draft", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--tile-manifest", default=None,
                   help="map tile-space predictions back to the artboard")
    p.add_argument("--t-i", type=float, default=0.7,
                   help="min fraction of a layer's area inside a box")
    p.add_argument("--box-order", choices=("top-left", "area-asc"), default="top-left")
    p.add_argument("--distance-rule", choices=("mean-gap", "disabled"), default="mean-gap")
    p.add_argument("--out", required=True, help="merged draft to write")
    p.add_argument("--report", default=None, help="groups JSON to write")
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("eval", help="score detections (AP family) and/or merging (mean layers IoU)")
    p.add_argument("--detections", default=None)
    p.add_argument("--gt", default=None, help="ground-truth boxes file or tile manifest")
    p.add_argument("--tile-manifest", default=None)
    p.add_argument("--pred-groups", default=None)
    p.add_argument("--gt-groups", default=None, help="groups file or draft file")
    p.add_argument("--report", default=None, help="evaluation JSON to write")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("render-overlay", help="screenshot with ground-truth and prediction boxes")
    p.add_argument("--draft", required=True)
    p.add_argument("--predictions", default=None)
    p.add_argument("--tile-manifest", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render_overlay)

    if defaults:
        parser.set_defaults(**defaults)
        for subparser in sub.choices.values():
            subparser.set_defaults(**defaults)
    return parser


def _setup_logging(level_flag: str | None) -> None:
    level_name = level_flag or os.environ.get("UILM_LOG", "WARNING")
    level = getattr(logging, str(level_name).upper(), None)
    if not isinstance(level, int):
        raise UsageError(f"unknown log level {level_name!r}")
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        # Apply config-file defaults before the real parse so explicit
        # flags win over the file.
        defaults = None
        if "--config" in argv:
            config_path = argv[argv.index("--config") + 1]
            defaults = _load_config(config_path)
        parser = build_arg_parser(defaults)
        args = parser.parse_args(argv)
        _setup_logging(args.log_level)
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (DraftError, FileNotFoundError, json.JSONDecodeError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
