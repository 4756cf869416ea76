"""Detection AP at an IoU threshold and pixel F-measure with ignore regions."""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DimensionMismatchError

logger = logging.getLogger(__name__)

AP_MODES = ("all-points", "11-point")


@dataclass(frozen=True)
class Detection:
    image_id: str
    category: str
    bbox: tuple[float, float, float, float]
    score: float

    def __post_init__(self):
        if self.bbox[2] <= 0 or self.bbox[3] <= 0:
            raise ValueError(f"degenerate box {self.bbox}")


@dataclass(frozen=True)
class GroundTruth:
    image_id: str
    category: str
    bbox: tuple[float, float, float, float]


@dataclass
class DetectionReport:
    ap: dict[str, float]
    mean_ap: float
    iou_thresh: float
    mode: str
    unknown_categories: list[str] = field(default_factory=list)
    curves: dict[str, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict, repr=False)


@dataclass(frozen=True)
class SegCounts:
    tp: int
    fp: int
    fn: int

    def __add__(self, other: "SegCounts") -> "SegCounts":
        return SegCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    @property
    def precision(self) -> float:
        return 1.0 if self.tp + self.fp == 0 else self.tp / (self.tp + self.fp)

    @property
    def recall(self) -> float:
        return 1.0 if self.tp + self.fn == 0 else self.tp / (self.tp + self.fn)

    @property
    def f_measure(self) -> float:
        p, r = self.precision, self.recall
        return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def bbox_iou(a, b) -> float:
    """IoU of two (x, y, w, h) boxes."""
    ax0, ay0, aw, ah = a
    bx0, by0, bw, bh = b
    iw = min(ax0 + aw, bx0 + bw) - max(ax0, bx0)
    ih = min(ay0 + ah, by0 + bh) - max(ay0, by0)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (aw * ah + bw * bh - inter)


def ap_from_curve(recall: np.ndarray, precision: np.ndarray, mode: str = "all-points") -> float:
    if mode == "11-point":
        return float(
            np.mean([precision[recall >= t].max() if (recall >= t).any() else 0.0 for t in np.linspace(0, 1, 11)])
        )
    if mode != "all-points":
        raise ValueError(f"unknown AP mode {mode!r}")
    r = np.concatenate(([0.0], recall, [1.0]))
    p = np.concatenate(([0.0], precision, [0.0]))
    p = np.maximum.accumulate(p[::-1])[::-1]
    steps = np.flatnonzero(r[1:] != r[:-1])
    return float(np.sum((r[steps + 1] - r[steps]) * p[steps + 1]))


def _category_curve(dets: Sequence[Detection], gts: Sequence[GroundTruth], iou_thresh: float):
    by_image = defaultdict(list)
    for g in gts:
        by_image[g.image_id].append(g.bbox)
    used = {k: np.zeros(len(v), dtype=bool) for k, v in by_image.items()}
    order = sorted(range(len(dets)), key=lambda i: -dets[i].score)  # stable: ties keep input order
    tp = np.zeros(len(dets))
    for rank, i in enumerate(order):
        d = dets[i]
        boxes = by_image.get(d.image_id, [])
        best, best_iou = -1, iou_thresh
        for j, g in enumerate(boxes):
            if used[d.image_id][j]:
                continue
            iou = bbox_iou(d.bbox, g)
            if iou >= best_iou and (best < 0 or iou > best_iou):
                best, best_iou = j, iou
        if best >= 0:
            used[d.image_id][best] = True
            tp[rank] = 1
    ctp = np.cumsum(tp)
    recall = ctp / max(len(gts), 1)
    precision = ctp / np.arange(1, len(dets) + 1)
    return recall, precision


def average_precision(
    dets: Iterable[Detection],
    gts: Iterable[GroundTruth],
    iou_thresh: float = 0.5,
    mode: str = "all-points",
) -> DetectionReport:
    """Per-category AP with greedy score-ordered matching, and their mean.

    Categories are those present in the ground truth; detections of other
    categories are reported in ``unknown_categories`` and otherwise ignored.
    """
    dets = list(dets)
    gts = list(gts)
    gt_by_cat = defaultdict(list)
    for g in gts:
        gt_by_cat[g.category].append(g)
    det_by_cat = defaultdict(list)
    for d in dets:
        det_by_cat[d.category].append(d)
    unknown = sorted(set(det_by_cat) - set(gt_by_cat))
    if unknown:
        logger.warning("detections with categories absent from ground truth: %s", unknown)
    ap, curves = {}, {}
    for cat in sorted(gt_by_cat):
        recall, precision = _category_curve(det_by_cat.get(cat, []), gt_by_cat[cat], iou_thresh)
        curves[cat] = (recall, precision)
        ap[cat] = ap_from_curve(recall, precision, mode) if recall.size else 0.0
    mean_ap = float(np.mean(list(ap.values()))) if ap else 0.0
    return DetectionReport(ap, mean_ap, iou_thresh, mode, unknown, curves)


def seg_counts(pred: np.ndarray, gt: np.ndarray, ignore: np.ndarray | None = None) -> SegCounts:
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape or (ignore is not None and np.shape(ignore) != gt.shape):
        raise DimensionMismatchError("prediction, ground truth and ignore masks must match in size")
    keep = np.ones_like(gt) if ignore is None else ~np.asarray(ignore, dtype=bool)
    return SegCounts(
        tp=int((pred & gt & keep).sum()),
        fp=int((pred & ~gt & keep).sum()),
        fn=int((~pred & gt & keep).sum()),
    )


def f_measure(pred: np.ndarray, gt: np.ndarray, ignore: np.ndarray | None = None) -> tuple[float, float, float]:
    c = seg_counts(pred, gt, ignore)
    return c.precision, c.recall, c.f_measure


def parse_detections(obj) -> list[Detection]:
    items = obj["detections"] if isinstance(obj, Mapping) else obj
    return [
        Detection(str(d["image_id"]), str(d["category"]), tuple(float(v) for v in d["bbox"]), float(d["score"]))
        for d in items
    ]


def parse_ground_truth(obj) -> list[GroundTruth]:
    """Accepts ``{"annotations": [...]}`` (a dataset manifest works) or a bare list."""
    items = obj["annotations"] if isinstance(obj, Mapping) else obj
    return [GroundTruth(str(g["image_id"]), str(g["category"]), tuple(float(v) for v in g["bbox"])) for g in items]
