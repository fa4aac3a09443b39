"""Evaluation: detection quality (AP family) and merging quality.

Detection scoring follows the standard COCO protocol for a single class:
greedy score-ordered matching at IoU thresholds 0.50:0.05:0.95,
101-point interpolated average precision, and object-size buckets by
ground-truth area (small < 32^2 <= medium < 96^2 <= large). Merging
quality is the mean per-component set-IoU between predicted and reference
layer groups.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .geometry import rect_iou
from .model import MergeGroup, Rect

IOU_THRESHOLDS: tuple[float, ...] = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))
RECALL_GRID = np.linspace(0.0, 1.0, 101)

AREA_SMALL_MAX = 32.0**2
AREA_MEDIUM_MAX = 96.0**2
AREA_RANGES: dict[str, tuple[float, float]] = {
    "all": (0.0, math.inf),
    "small": (0.0, AREA_SMALL_MAX),
    "medium": (AREA_SMALL_MAX, AREA_MEDIUM_MAX),
    "large": (AREA_MEDIUM_MAX, math.inf),
}
DEFAULT_MAX_DETECTIONS = 100


@dataclass(frozen=True)
class Detection:
    box: Rect
    score: float
    image_id: str = ""


@dataclass(frozen=True)
class MetricsReport:
    """AP summary in the usual column order: AP, AP50, AP75, AP_S, AP_M, AP_L.

    Values are in [0, 1]; a scale bucket with no ground truth is None.
    """

    ap: float | None
    ap50: float | None
    ap75: float | None
    ap_small: float | None
    ap_medium: float | None
    ap_large: float | None
    per_threshold: dict[float, float | None] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "ap": self.ap,
            "ap50": self.ap50,
            "ap75": self.ap75,
            "ap_small": self.ap_small,
            "ap_medium": self.ap_medium,
            "ap_large": self.ap_large,
            "per_threshold": {f"{t:.2f}": v for t, v in self.per_threshold.items()},
        }

    def format_table(self) -> str:
        headers = ("AP", "AP50", "AP75", "AP_S", "AP_M", "AP_L")
        values = (self.ap, self.ap50, self.ap75, self.ap_small, self.ap_medium, self.ap_large)
        cells = ["{:>8}".format(h) for h in headers]
        row = ["{:>8}".format("-" if v is None else f"{v:.3f}") for v in values]
        return "".join(cells) + "\n" + "".join(row)


def match_detections(dets: Sequence[Detection], gts: Sequence[Rect],
                     iou_thr: float) -> list[tuple[int, int | None]]:
    """Greedy single-image matching of detections to ground truth.

    Detections are visited in descending score (ties keep insertion
    order); each takes the unmatched ground-truth box of highest IoU,
    provided that IoU reaches the threshold. Returns (detection index,
    matched gt index or None) pairs in visit order.
    """
    order = sorted(range(len(dets)), key=lambda i: -dets[i].score)
    taken = [False] * len(gts)
    matches: list[tuple[int, int | None]] = []
    for di in order:
        best_j: int | None = None
        best_iou = 0.0
        for j, gt in enumerate(gts):
            if taken[j]:
                continue
            iou = rect_iou(dets[di].box, gt)
            if iou > best_iou:
                best_iou, best_j = iou, j
        if best_j is not None and best_iou >= iou_thr:
            taken[best_j] = True
            matches.append((di, best_j))
        else:
            matches.append((di, None))
    return matches


def _normalize_gts(dets: Sequence[Detection],
                   gts: Mapping[str, Sequence[Rect]] | Sequence[Rect]) -> dict[str, list[Rect]]:
    if isinstance(gts, Mapping):
        return {k: list(v) for k, v in gts.items()}
    # Single-image shorthand: every detection is scored against this list.
    image_ids = {d.image_id for d in dets} or {""}
    if len(image_ids) > 1:
        raise ValueError("a bare ground-truth list needs single-image detections; "
                         "pass a mapping of image_id -> boxes instead")
    return {next(iter(image_ids)): list(gts)}


def _evaluate_threshold(dets: Sequence[Detection], gts_by_image: dict[str, list[Rect]],
                        iou_thr: float, area_range: tuple[float, float],
                        max_dets: int) -> float | None:
    """101-point interpolated AP at one IoU threshold and area range.

    Ground truth outside the area range is ignored: detections matched to
    it are dropped from scoring, as are unmatched detections whose own
    area falls outside the range (the COCO convention, so size-bucket APs
    don't punish detectors for objects outside the bucket).
    """
    lo, hi = area_range
    image_ids = sorted(set(gts_by_image) | {d.image_id for d in dets})
    scores: list[float] = []
    is_tp: list[bool] = []
    n_gt = 0

    for image_id in image_ids:
        gt_boxes = gts_by_image.get(image_id, [])
        gt_ignored = [not (lo <= g.area < hi) for g in gt_boxes]
        n_gt += sum(1 for ig in gt_ignored if not ig)

        image_dets = [d for d in dets if d.image_id == image_id]
        det_order = sorted(range(len(image_dets)), key=lambda i: -image_dets[i].score)[:max_dets]
        # Consider real ground truth before ignored ground truth so a
        # detection only falls back to an ignored match when no scored
        # match is available.
        gt_order = sorted(range(len(gt_boxes)), key=lambda j: gt_ignored[j])
        taken = [False] * len(gt_boxes)
        for di in det_order:
            det = image_dets[di]
            best_j = -1
            best_iou = 0.0
            for j in gt_order:
                if taken[j]:
                    continue
                if best_j >= 0 and not gt_ignored[best_j] and gt_ignored[j]:
                    break
                iou = rect_iou(det.box, gt_boxes[j])
                if iou >= iou_thr and iou > best_iou:
                    best_iou, best_j = iou, j
            if best_j >= 0:
                taken[best_j] = True
                if not gt_ignored[best_j]:
                    scores.append(det.score)
                    is_tp.append(True)
            else:
                if lo <= det.box.area < hi:
                    scores.append(det.score)
                    is_tp.append(False)

    if n_gt == 0:
        return None
    if not scores:
        return 0.0

    order = np.argsort(-np.asarray(scores), kind="stable")
    tp = np.asarray(is_tp, dtype=np.float64)[order]
    cum_tp = np.cumsum(tp)
    cum_fp = np.cumsum(1.0 - tp)
    recall = cum_tp / n_gt
    precision = cum_tp / (cum_tp + cum_fp)

    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, RECALL_GRID, side="left")
    q = np.where(idx < len(envelope), envelope[np.minimum(idx, len(envelope) - 1)], 0.0)
    return float(np.mean(q))


def average_precision(dets: Sequence[Detection],
                      gts: Mapping[str, Sequence[Rect]] | Sequence[Rect],
                      iou_thr: float, max_dets: int = DEFAULT_MAX_DETECTIONS) -> float | None:
    """Interpolated AP at one IoU threshold over all object sizes.

    Returns None when there is no ground truth at all (the metric is
    undefined), and 0.0 when ground truth exists but nothing was detected.
    """
    gts_by_image = _normalize_gts(dets, gts)
    return _evaluate_threshold(dets, gts_by_image, iou_thr, AREA_RANGES["all"], max_dets)


def coco_map(dets: Sequence[Detection],
             gts: Mapping[str, Sequence[Rect]] | Sequence[Rect],
             max_dets: int = DEFAULT_MAX_DETECTIONS) -> MetricsReport:
    """Full AP summary across IoU thresholds and object-size buckets."""
    gts_by_image = _normalize_gts(dets, gts)

    def mean_over_thresholds(area_key: str) -> float | None:
        values = [_evaluate_threshold(dets, gts_by_image, t, AREA_RANGES[area_key], max_dets)
                  for t in IOU_THRESHOLDS]
        if all(v is None for v in values):
            return None
        return float(np.mean([v for v in values if v is not None]))

    per_threshold = {t: _evaluate_threshold(dets, gts_by_image, t, AREA_RANGES["all"], max_dets)
                     for t in IOU_THRESHOLDS}
    return MetricsReport(
        ap=mean_over_thresholds("all"),
        ap50=per_threshold[0.50],
        ap75=per_threshold[0.75],
        ap_small=mean_over_thresholds("small"),
        ap_medium=mean_over_thresholds("medium"),
        ap_large=mean_over_thresholds("large"),
        per_threshold=per_threshold,
    )


def layers_set_iou(a: MergeGroup, b: MergeGroup) -> float:
    inter = len(a.member_ids & b.member_ids)
    union = len(a.member_ids | b.member_ids)
    return inter / union if union else 0.0


def mean_layers_iou(pred_groups: Sequence[MergeGroup],
                    gt_groups: Sequence[MergeGroup]) -> float:
    """Mean per-component set-IoU between predicted and reference groups.

    Groups are matched greedily by descending set-IoU over member ids;
    each matched pair contributes its IoU, unmatched reference groups
    contribute 0, and the sum is normalized by the number of reference
    groups. Undefined (raises) without reference groups.
    """
    if not gt_groups:
        raise ValueError("mean layers IoU is undefined with no reference groups")

    def content_key(group: MergeGroup):
        return tuple(sorted(group.member_ids))

    pairs = []
    for gi, gt in enumerate(gt_groups):
        for pi, pred in enumerate(pred_groups):
            iou = layers_set_iou(gt, pred)
            if iou > 0.0:
                pairs.append((iou, gi, pi))
    # Ties break on group content, not list position, so the matching is
    # invariant under permutation of either argument.
    pairs.sort(key=lambda t: (-t[0], content_key(gt_groups[t[1]]), content_key(pred_groups[t[2]])))
    used_gt: set[int] = set()
    used_pred: set[int] = set()
    total = 0.0
    for iou, gi, pi in pairs:
        if gi in used_gt or pi in used_pred:
            continue
        used_gt.add(gi)
        used_pred.add(pi)
        total += iou
    return total / len(gt_groups)
