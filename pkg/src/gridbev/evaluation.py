"""KITTI BEV benchmark scoring: difficulty buckets, greedy matching at
class-specific IoU thresholds, precision/recall and average precision.

Raw Van ground truths absorb Car detections without penalty and raw sitting
persons absorb Pedestrian detections, as do same-class ground truths outside
the evaluated difficulty. DontCare regions absorb detections only when they
carry a BEV box and masking is enabled.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .boxes import rotated_iou
from .kitti import DONT_CARE, MergedClass

DEFAULT_IOU_THRESHOLDS = {
    MergedClass.CAR: 0.7,
    MergedClass.PEDESTRIAN: 0.5,
    MergedClass.CYCLIST: 0.5,
}

EVAL_CLASSES = (MergedClass.CAR, MergedClass.PEDESTRIAN, MergedClass.CYCLIST)

# Raw label classes that count as true positives for each evaluated class;
# other raw classes sharing the merged class only absorb detections.
COUNTED_RAW = {
    MergedClass.CAR: {"Car"},
    MergedClass.PEDESTRIAN: {"Pedestrian"},
    MergedClass.CYCLIST: {"Cyclist"},
    MergedClass.TRUCK: {"Truck"},
    MergedClass.MISC: {"Misc"},
    MergedClass.TRAM: {"Tram"},
}


class Difficulty(str, Enum):
    EASY = "Easy"
    MODERATE = "Moderate"
    HARD = "Hard"


@dataclass(frozen=True)
class DifficultyThresholds:
    """Per-difficulty admission limits, defaults from the public KITTI devkit."""

    min_bbox_height: dict = field(default_factory=lambda: {
        Difficulty.EASY: 40.0, Difficulty.MODERATE: 25.0, Difficulty.HARD: 25.0})
    max_occlusion: dict = field(default_factory=lambda: {
        Difficulty.EASY: 0, Difficulty.MODERATE: 1, Difficulty.HARD: 2})
    max_truncation: dict = field(default_factory=lambda: {
        Difficulty.EASY: 0.15, Difficulty.MODERATE: 0.30, Difficulty.HARD: 0.50})


def assign_difficulty(label, th: DifficultyThresholds = DifficultyThresholds()):
    """Set of difficulties admitting a label; empty set means fully ignored."""
    height = label.image_bbox[3] - label.image_bbox[1]
    out = set()
    for d in Difficulty:
        if (height >= th.min_bbox_height[d]
                and label.occlusion <= th.max_occlusion[d]
                and label.truncation <= th.max_truncation[d]):
            out.add(d)
    return out


@dataclass
class FrameAssignment:
    """Per-frame matching outcome: kept detections as (score, is_tp) pairs."""

    scored: list          # [(score, bool), ...] with absorbed detections removed
    n_gt: int             # counted ground truths in this difficulty


def match_detections(dets, gts, cls: MergedClass, difficulty: Difficulty,
                     iou_threshold: float,
                     th: DifficultyThresholds = DifficultyThresholds(),
                     dontcare_masking: bool = False) -> FrameAssignment:
    """Greedy one-to-one matching of one frame's detections for one class."""
    counted, absorbing = [], []
    for g in gts:
        if g.raw_class == DONT_CARE:
            if dontcare_masking and g.box is not None:
                absorbing.append(g.box)
            continue
        if g.merged_class != cls or g.box is None:
            continue
        if g.raw_class in COUNTED_RAW.get(cls, ()) and difficulty in assign_difficulty(g, th):
            counted.append(g.box)
        else:
            absorbing.append(g.box)

    cls_dets = sorted((d for d in dets if d.cls == cls), key=lambda d: -d.score)
    matched = [False] * len(counted)
    scored = []
    for d in cls_dets:
        best_iou, best_g = 0.0, -1
        for gi, gb in enumerate(counted):
            if matched[gi]:
                continue
            iou = rotated_iou(d.box, gb)
            if iou > best_iou:
                best_iou, best_g = iou, gi
        if best_g >= 0 and best_iou >= iou_threshold:
            matched[best_g] = True
            scored.append((d.score, True))
            continue
        if any(rotated_iou(d.box, ab) >= iou_threshold for ab in absorbing):
            continue  # absorbed: neither TP nor FP
        scored.append((d.score, False))
    return FrameAssignment(scored, len(counted))


@dataclass
class PRCurve:
    recall: np.ndarray
    precision: np.ndarray
    scores: np.ndarray
    cls: MergedClass
    difficulty: Difficulty
    n_gt: int

    @property
    def empty_gt(self) -> bool:
        return self.n_gt == 0


def compute_pr(assignments, cls, difficulty) -> PRCurve:
    """Dataset-level PR curve: one operating point per detection score."""
    n_gt = sum(a.n_gt for a in assignments)
    pairs = [p for a in assignments for p in a.scored]
    pairs.sort(key=lambda p: -p[0])
    if not pairs or n_gt == 0:
        return PRCurve(np.empty(0), np.empty(0), np.empty(0), cls, difficulty, n_gt)
    scores = np.array([p[0] for p in pairs])
    tp = np.cumsum([1 if p[1] else 0 for p in pairs])
    fp = np.cumsum([0 if p[1] else 1 for p in pairs])
    recall = tp / n_gt
    precision = tp / (tp + fp)
    return PRCurve(recall, precision, scores, cls, difficulty, n_gt)


@dataclass(frozen=True)
class APResult:
    cls: MergedClass
    difficulty: Difficulty
    ap: float              # percent
    iou_threshold: float
    mode: int              # 11 or 40 interpolation points


class UndefinedAPError(ValueError):
    """AP requested for a class/difficulty with no ground truth."""


def average_precision(curve: PRCurve, mode: int = 11,
                      iou_threshold: float = float("nan")) -> APResult:
    """Interpolated AP: mean over fixed recall points of the max precision at
    recall >= r. mode 11 uses {0, 0.1, ..., 1}; mode 40 uses {1/40, ..., 1}.
    """
    if curve.empty_gt:
        raise UndefinedAPError(f"no ground truth for {curve.cls}/{curve.difficulty}")
    if mode == 11:
        points = np.linspace(0.0, 1.0, 11)
    elif mode == 40:
        points = np.arange(1, 41) / 40.0
    else:
        raise ValueError(f"unsupported AP mode {mode}")
    if curve.recall.size == 0:
        return APResult(curve.cls, curve.difficulty, 0.0, iou_threshold, mode)
    interp = [curve.precision[curve.recall >= r].max(initial=0.0) for r in points]
    return APResult(curve.cls, curve.difficulty, 100.0 * float(np.mean(interp)),
                    iou_threshold, mode)


def evaluate_dataset(gts_by_frame: dict, dets_by_frame: dict,
                     classes=EVAL_CLASSES,
                     iou_thresholds=None,
                     th: DifficultyThresholds = DifficultyThresholds(),
                     mode: int = 11,
                     dontcare_masking: bool = False):
    """AP per class x difficulty over aligned frame dicts (frame id -> lists).

    Classes with zero counted ground truth yield ap = nan.
    """
    iou_thresholds = dict(DEFAULT_IOU_THRESHOLDS if iou_thresholds is None else iou_thresholds)
    results = []
    for cls in classes:
        thr = iou_thresholds[cls]
        for difficulty in Difficulty:
            assignments = [
                match_detections(dets_by_frame.get(f, []), gts, cls, difficulty,
                                 thr, th, dontcare_masking)
                for f, gts in sorted(gts_by_frame.items())
            ]
            curve = compute_pr(assignments, cls, difficulty)
            try:
                results.append(average_precision(curve, mode, thr))
            except UndefinedAPError:
                results.append(APResult(cls, difficulty, float("nan"), thr, mode))
    return results


def format_ap_table(results) -> str:
    """Aligned class x difficulty AP grid."""
    by_cls = {}
    for r in results:
        by_cls.setdefault(r.cls, {})[r.difficulty] = r
    lines = [f"{'Class':<12}{'Easy':>8}{'Moderate':>10}{'Hard':>8}"]
    for cls, row in by_cls.items():
        cells = []
        for d in Difficulty:
            r = row.get(d)
            cells.append("   n/a" if r is None or np.isnan(r.ap) else f"{r.ap:6.2f}")
        lines.append(f"{cls.value:<12}{cells[0]:>8}{cells[1]:>10}{cells[2]:>8}")
    return "\n".join(lines)
