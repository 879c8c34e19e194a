"""Overlap, success / normalized-precision curves, AUC and the SV histogram."""
from __future__ import annotations

import math

import numpy as np

from ..bbox import BBox
from ..errors import InvalidInputError

SUCCESS_THRESHOLDS = np.linspace(0.0, 1.0, 101)
NP_THRESHOLDS = np.linspace(0.0, 0.5, 101)

# |log2 R| histogram: bins [1.0, 1.1), ..., [2.4, 2.5)
SV_EDGES = np.array([(10 + k) / 10.0 for k in range(16)])
SV_THRESHOLD = 1.0
# |log2 R| is snapped to this many decimals so exact powers of two land on bin edges
SV_DECIMALS = 9


def iou(a: BBox, b: BBox) -> float:
    iw = max(0.0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    ih = max(0.0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = iw * ih
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return min(1.0, max(0.0, inter / union))


def normalized_center_error(pred: BBox, gt: BBox) -> float:
    """Centre distance with each axis divided by the ground-truth extent.

    A ground-truth box with zero width or height yields ``inf``.
    """
    if gt.w <= 0 or gt.h <= 0:
        return math.inf
    return math.hypot((pred.cx - gt.cx) / gt.w, (pred.cy - gt.cy) / gt.h)


def success_and_precision_curves(pred, gt):
    """Success uses ``IoU > t``; normalized precision uses ``error <= t``."""
    if len(pred) != len(gt):
        raise InvalidInputError(f"prediction has {len(pred)} boxes, ground truth {len(gt)}")
    if len(gt) == 0:
        raise InvalidInputError("cannot evaluate an empty sequence")
    overlaps = np.array([iou(p, g) for p, g in zip(pred, gt)])
    errors = np.array([normalized_center_error(p, g) for p, g in zip(pred, gt)])
    success = (overlaps[None, :] > SUCCESS_THRESHOLDS[:, None]).mean(axis=1)
    precision = (errors[None, :] <= NP_THRESHOLDS[:, None]).mean(axis=1)
    return success, precision


def auc(curve):
    """Trapezoidal area under a curve sampled on a uniform grid, over a unit range."""
    curve = np.asarray(curve, dtype=np.float64)
    if curve.ndim != 1 or curve.size < 2:
        raise InvalidInputError("auc needs at least 2 samples")
    return float((curve[:-1] + curve[1:]).sum() / (2.0 * (curve.size - 1)))


def log2_area_ratios(gt):
    if not gt or not gt[0].area > 0:
        raise InvalidInputError("SV analysis needs a first box with positive area")
    a0 = gt[0].area
    out = []
    for box in gt:
        r = box.area / a0
        out.append(math.inf if r == 0 else round(abs(math.log2(r)), SV_DECIMALS))
    return out


def is_sv_frame(value):
    return value > SV_THRESHOLD


def sv_counts(gt):
    """Per-bin frame counts of ``|log2 R|`` and the total frame count."""
    counts = np.zeros(len(SV_EDGES) - 1, dtype=np.int64)
    for v in log2_area_ratios(gt):
        if not is_sv_frame(v) or v >= SV_EDGES[-1]:
            continue
        counts[int(np.searchsorted(SV_EDGES, v, side="right")) - 1] += 1
    return counts, len(gt)


def sv_histogram(gt):
    """Fraction of all frames whose ``|log2 R|`` falls in each 0.1-wide bin over (1, 2.5)."""
    counts, total = sv_counts(gt)
    return counts / total


def has_scale_variation(gt):
    return any(is_sv_frame(v) for v in log2_area_ratios(gt))
