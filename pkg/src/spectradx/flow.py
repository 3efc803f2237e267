"""Mask refinement along a straight probability path.

A mask is a 2-D float array with values in [0, 1].  Refinement moves a
coarse mask toward a target along the linear path
x_t = (1 - t) x0 + t x1, whose exact velocity is the constant field
x1 - x0; inference integrates a (learned or given) velocity field with a
forward Euler solver, clamping to [0, 1] after every step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatchError

BCE_CLAMP = 1e-7
DICE_SMOOTH = 1e-6


@dataclass(frozen=True)
class ConditioningFeatures:
    """Per-sample guidance: a text embedding and an H x W x c evidence grid."""

    text_vec: np.ndarray
    img_grid: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.text_vec, dtype=np.float64)
        g = np.asarray(self.img_grid, dtype=np.float64)
        if t.ndim != 1 or g.ndim != 3 or g.shape[2] != t.shape[0]:
            raise ShapeMismatchError(f"conditioning shapes differ: {t.shape} vs {g.shape}")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(g))):
            raise ValueError("conditioning features must be finite")
        object.__setattr__(self, "text_vec", t)
        object.__setattr__(self, "img_grid", g)


@dataclass(frozen=True)
class FlowState:
    """A mask together with its position t in [0, 1] along the path."""

    mask: np.ndarray
    time: float

    def __post_init__(self):
        if not 0.0 <= self.time <= 1.0:
            raise ValueError(f"time must lie in [0, 1], got {self.time}")


def _check_same_shape(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise ShapeMismatchError(f"mask shapes differ: {a.shape} vs {b.shape}")


def probability_path(x0: np.ndarray, x1: np.ndarray, t: float) -> np.ndarray:
    """Pointwise linear interpolation (1 - t) x0 + t x1; exact at endpoints."""
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    _check_same_shape(x0, x1)
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    if t == 0.0:
        return x0.copy()
    if t == 1.0:
        return x1.copy()
    return (1.0 - t) * x0 + t * x1


def target_velocity(x0: np.ndarray, x1: np.ndarray) -> np.ndarray:
    """The path's exact velocity x1 - x0 (constant in t)."""
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    _check_same_shape(x0, x1)
    return x1 - x0


def euler_refine(model, x0: np.ndarray, cond, n_steps: int) -> np.ndarray:
    """Integrate the velocity field from t=0 to t=1 with forward Euler.

    ``model`` is either a trained velocity model (anything exposing
    ``predict(x, t, cond)``) or a plain callable ``f(x, t, cond)``.  Each
    step applies x <- clamp01(x + v dt), dt = 1 / n_steps; the returned
    mask is the soft (pre-binarization) endpoint state.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    velocity = model.predict if hasattr(model, "predict") else model
    x = np.asarray(x0, dtype=np.float64).copy()
    dt = 1.0 / n_steps
    for k in range(n_steps):
        v = velocity(x, k * dt, cond)
        x = np.clip(x + v * dt, 0.0, 1.0)
    return x


def binarize(mask: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Hard-threshold a soft mask; ties (value == threshold) go to 1."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    mask = np.asarray(mask, dtype=np.float64)
    return (mask >= threshold).astype(np.float64)


def seg_loss(pred: np.ndarray, gt: np.ndarray, lambda_bce: float = 1.0) -> float:
    """Hybrid overlap loss: soft Dice loss plus lambda_bce * mean BCE.

    Predictions are clamped to [1e-7, 1 - 1e-7] for BCE stability.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    _check_same_shape(pred, gt)
    p = np.clip(pred, BCE_CLAMP, 1.0 - BCE_CLAMP)
    inter = float((p * gt).sum())
    dice_loss = 1.0 - (2.0 * inter + DICE_SMOOTH) / (p.sum() + gt.sum() + DICE_SMOOTH)
    bce = float(-(gt * np.log(p) + (1.0 - gt) * np.log(1.0 - p)).mean())
    return float(dice_loss + lambda_bce * bce)


def seg_loss_grad(pred: np.ndarray, gt: np.ndarray, lambda_bce: float = 1.0) -> np.ndarray:
    """Analytic gradient of :func:`seg_loss` with respect to ``pred``.

    Valid where the prediction is strictly inside the clamp interval.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    _check_same_shape(pred, gt)
    p = np.clip(pred, BCE_CLAMP, 1.0 - BCE_CLAMP)
    denom = p.sum() + gt.sum() + DICE_SMOOTH
    numer = 2.0 * float((p * gt).sum()) + DICE_SMOOTH
    d_dice = -(2.0 * gt * denom - numer) / denom**2
    d_bce = (-gt / p + (1.0 - gt) / (1.0 - p)) / pred.size
    return d_dice + lambda_bce * d_bce
