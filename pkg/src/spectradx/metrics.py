"""Segmentation overlap metrics and classification metrics/curves."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatchError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class ClassificationMetrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    degenerate: tuple = ()


@dataclass(frozen=True)
class Curve:
    """Polyline in [0,1]^2 with non-decreasing x and its trapezoidal area."""

    points: np.ndarray
    area: float


def dice_iou(pred: np.ndarray, gt: np.ndarray):
    """(Dice, IoU) of two binary masks; both-empty counts as (1, 1)."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ShapeMismatchError(f"mask shapes differ: {pred.shape} vs {gt.shape}")
    for name, m in (("pred", pred), ("gt", gt)):
        if not np.isin(m, (0.0, 1.0)).all():
            raise ValueError(f"{name} mask is not binary")
    inter = float(np.sum((pred == 1) & (gt == 1)))
    p_sum = float(pred.sum())
    g_sum = float(gt.sum())
    if p_sum + g_sum == 0.0:
        return 1.0, 1.0
    dice = 2.0 * inter / (p_sum + g_sum)
    union = p_sum + g_sum - inter
    return dice, inter / union


def classification_metrics(c: ConfusionCounts) -> ClassificationMetrics:
    """Accuracy/precision/recall/F1; 0/0 ratios return 0 and are flagged."""
    if c.total == 0:
        raise ValueError("confusion counts sum to zero")
    degenerate = []

    def ratio(num, den, name):
        if den == 0:
            degenerate.append(name)
            return 0.0
        return num / den

    precision = ratio(c.tp, c.tp + c.fp, "precision")
    recall = ratio(c.tp, c.tp + c.fn, "recall")
    f1 = ratio(2 * precision * recall, precision + recall, "f1")
    return ClassificationMetrics(
        accuracy=(c.tp + c.tn) / c.total,
        precision=precision,
        recall=recall,
        f1=f1,
        degenerate=tuple(degenerate),
    )


def _parse_scores(scores):
    arr = np.asarray(list(scores), dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] == 0:
        raise ValueError("scores must be a non-empty sequence of (prob, label) pairs")
    probs, labels = arr[:, 0], arr[:, 1].astype(np.int64)
    return probs, labels


def _trapezoid(points: np.ndarray) -> float:
    return float(np.trapezoid(points[:, 1], points[:, 0]))


def roc_curve(scores) -> Curve:
    """ROC polyline from a threshold sweep over unique scores, plus AUC.

    Tied scores are grouped into one threshold step; the endpoints (0,0)
    and (1,1) are always present.  The area is the trapezoidal integral,
    which equals the Mann-Whitney statistic with ties counted one half.
    """
    probs, labels = _parse_scores(scores)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_curve needs both labels present")
    order = np.argsort(-probs, kind="stable")
    sorted_probs = probs[order]
    sorted_labels = labels[order]
    boundaries = np.flatnonzero(np.diff(sorted_probs)) + 1
    tp_cum = np.cumsum(sorted_labels == 1)
    fp_cum = np.cumsum(sorted_labels == 0)
    idx = np.append(boundaries - 1, len(sorted_probs) - 1)
    tpr = np.concatenate([[0.0], tp_cum[idx] / n_pos])
    fpr = np.concatenate([[0.0], fp_cum[idx] / n_neg])
    points = np.column_stack([fpr, tpr])
    return Curve(points=points, area=_trapezoid(points))


def pr_curve(scores) -> Curve:
    """Precision-recall staircase and step-interpolated average precision.

    Points trace the staircase outline (both corners of each step), so the
    trapezoidal integral of the polyline equals
    sum_i (R_i - R_{i-1}) * P_i exactly.
    """
    probs, labels = _parse_scores(scores)
    n_pos = int((labels == 1).sum())
    if n_pos == 0:
        raise ValueError("pr_curve needs at least one positive")
    order = np.argsort(-probs, kind="stable")
    sorted_probs = probs[order]
    sorted_labels = labels[order]
    boundaries = np.flatnonzero(np.diff(sorted_probs)) + 1
    tp_cum = np.cumsum(sorted_labels == 1)
    idx = np.append(boundaries - 1, len(sorted_probs) - 1)
    tp = tp_cum[idx].astype(np.float64)
    pred_pos = (idx + 1).astype(np.float64)
    precision = tp / pred_pos
    recall = tp / n_pos
    xs, ys = [], []
    prev_r = 0.0
    for r, p in zip(recall, precision):
        xs.extend([prev_r, r])
        ys.extend([p, p])
        prev_r = r
    points = np.column_stack([xs, ys])
    ap = float(np.sum(np.diff(np.concatenate([[0.0], recall])) * precision))
    return Curve(points=points, area=ap)


def mann_whitney_auc(scores) -> float:
    """Probability a random positive outranks a random negative (ties = 1/2).

    Independent O(n^2)-free implementation via rank sums; serves as the
    cross-check partner for :func:`roc_curve`.
    """
    probs, labels = _parse_scores(scores)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("mann_whitney_auc needs both labels present")
    order = np.argsort(probs, kind="stable")
    ranks = np.empty(len(probs))
    sorted_probs = probs[order]
    # midranks for tied groups
    i = 0
    while i < len(sorted_probs):
        j = i
        while j + 1 < len(sorted_probs) and sorted_probs[j + 1] == sorted_probs[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    rank_sum_pos = float(ranks[labels == 1].sum())
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)
