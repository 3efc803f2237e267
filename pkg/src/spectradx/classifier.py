"""Logistic diagnosis over the scalar spectral anomaly score.

A single-feature logistic model maps the score to a disease probability;
it is trained with focal loss to cope with class imbalance, and the
decision threshold is chosen post hoc to maximize training F1.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

PROB_CLAMP = 1e-7


@dataclass(frozen=True)
class ClassifierModel:
    weight: float = 0.0
    bias: float = 0.0
    alpha: float = 0.25
    gamma: float = 2.0
    threshold: float = 0.5

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError("alpha must lie in (0, 1]")
        if self.gamma < 0.0:
            raise ValueError("gamma must be non-negative")
        if not (0.0 < self.threshold < 1.0):
            raise ValueError("threshold must lie in (0, 1)")
        for name in ("weight", "bias"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


class LabeledScore(NamedTuple):
    sas: float
    label: int


class Diagnosis(NamedTuple):
    label: int
    probability: float
    sas: float


def _sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def predict_prob(model: ClassifierModel, sas: float) -> float:
    """sigma(w * sas + b), numerically stable for any finite score."""
    if not np.isfinite(sas):
        raise ValueError("sas must be finite")
    return float(_sigmoid(np.array(model.weight * sas + model.bias)))


def focal_loss(p, y, alpha: float = 0.25, gamma: float = 2.0):
    """-alpha_t (1 - p_t)^gamma log(p_t), elementwise.

    p_t is p for label 1 and 1-p for label 0; alpha_t is alpha for label 1
    and 1-alpha for label 0.  p is clamped to [1e-7, 1 - 1e-7].  With
    gamma = 0 this is alpha_t-weighted cross-entropy.
    """
    p = np.clip(np.asarray(p, dtype=np.float64), PROB_CLAMP, 1.0 - PROB_CLAMP)
    y = np.asarray(y)
    p_t = np.where(y == 1, p, 1.0 - p)
    a_t = np.where(y == 1, alpha, 1.0 - alpha)
    out = -a_t * (1.0 - p_t) ** gamma * np.log(p_t)
    return float(out) if out.ndim == 0 else out


def _focal_grad(weight, bias, scores, labels, alpha, gamma):
    """Mean focal loss over the data and its gradient in (weight, bias)."""
    z = weight * scores + bias
    p = _sigmoid(z)
    pc = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    p_t = np.where(labels == 1, pc, 1.0 - pc)
    a_t = np.where(labels == 1, alpha, 1.0 - alpha)
    sign = np.where(labels == 1, 1.0, -1.0)
    loss = float(np.mean(-a_t * (1.0 - p_t) ** gamma * np.log(p_t)))
    # dL/dp_t, then p_t -> z via sign * p(1-p)
    d_pt = a_t * (gamma * (1.0 - p_t) ** (gamma - 1.0) * np.log(p_t) - (1.0 - p_t) ** gamma / p_t)
    d_z = d_pt * sign * pc * (1.0 - pc)
    return loss, float(np.mean(d_z * scores)), float(np.mean(d_z))


def _f1_at(probs, labels, tau):
    pred = probs >= tau
    tp = int(np.sum(pred & (labels == 1)))
    fp = int(np.sum(pred & (labels == 0)))
    fn = int(np.sum(~pred & (labels == 1)))
    return 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0


def select_threshold(probs: np.ndarray, labels: np.ndarray) -> float:
    """F1-maximizing threshold over the unique predicted probabilities.

    Ties prefer the smaller threshold (recall-favoring).
    """
    best_tau, best_f1 = 0.5, -1.0
    for tau in np.unique(probs):
        tau = float(min(max(tau, PROB_CLAMP), 1.0 - PROB_CLAMP))
        f1 = _f1_at(probs, labels, tau)
        if f1 > best_f1:
            best_tau, best_f1 = tau, f1
    return best_tau


@dataclass(frozen=True)
class ClassifierTrainConfig:
    alpha: float = 0.25
    gamma: float = 2.0
    lr: float = 1.0
    steps: int = 500
    seed: int = 0  # kept for config compatibility; full-batch descent is seed-free


def train_classifier(data, hyper: ClassifierTrainConfig = ClassifierTrainConfig()) -> ClassifierModel:
    """Fit (weight, bias) by full-batch gradient descent on mean focal loss.

    Scores are scaled to unit standard deviation internally (the scale is
    folded back into the returned weight), which makes the optimization
    invariant to a positive rescaling of the score axis.  Starts from the
    symmetric initial point (0, 0).  Data must contain both labels.
    """
    scores = np.asarray([d[0] for d in data], dtype=np.float64)
    labels = np.asarray([d[1] for d in data], dtype=np.int64)
    if scores.size == 0 or len(np.unique(labels)) < 2:
        raise ValueError("training data must contain both labels")
    scale = scores.std()
    if scale == 0.0:
        scale = 1.0
    scaled = scores / scale

    w, b = 0.0, 0.0
    for _ in range(hyper.steps):
        _, dw, db = _focal_grad(w, b, scaled, labels, hyper.alpha, hyper.gamma)
        w -= hyper.lr * dw
        b -= hyper.lr * db

    model = ClassifierModel(weight=w / scale, bias=b, alpha=hyper.alpha, gamma=hyper.gamma)
    probs = _sigmoid(model.weight * scores + model.bias)
    return replace(model, threshold=select_threshold(probs, labels))


def diagnose(model: ClassifierModel, report) -> Diagnosis:
    """Label a spectral report: 1 iff the predicted probability reaches tau."""
    prob = predict_prob(model, report.sas)
    return Diagnosis(label=int(prob >= model.threshold), probability=prob, sas=float(report.sas))
