"""Per-pixel velocity predictor and its flow-matching trainer.

The predictor is a small stencil network evaluated at every pixel: the
local (2r+1)^2 neighborhood of the current mask is linearly projected to a
query, cross-attention over the two-row context [text_vec; img_grid pixel
vector] produces a guidance vector, and a single tanh hidden layer maps
[stencil, t, guidance] to a scalar velocity.  Training regresses the
constant path velocity x1 - x0 with plain SGD; gradients are derived
analytically (backpropagation implemented here, no autodiff).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FlowDivergenceError, ShapeMismatchError
from .flow import ConditioningFeatures, probability_path, target_velocity
from .rng import SplitMix64


def param_count(stencil_radius: int, hidden_width: int, cond_dim: int) -> int:
    """Total parameters: c*S + h*(S+1+c) + h + h + 1 with S = (2r+1)^2."""
    s = (2 * stencil_radius + 1) ** 2
    return cond_dim * s + hidden_width * (s + 1 + cond_dim) + 2 * hidden_width + 1


@dataclass
class VectorFieldModel:
    """Flat parameter vector plus the architecture that interprets it.

    Layout of ``params``: query projection (c x S), hidden weights
    (h x (S+1+c)), hidden bias (h), output weights (h), output bias (1).
    """

    params: np.ndarray
    stencil_radius: int = 1
    hidden_width: int = 16
    cond_dim: int = 8

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=np.float64)
        expected = param_count(self.stencil_radius, self.hidden_width, self.cond_dim)
        if self.params.shape != (expected,):
            raise ValueError(f"expected {expected} parameters, got shape {self.params.shape}")

    @property
    def stencil_size(self) -> int:
        return (2 * self.stencil_radius + 1) ** 2

    def unpack(self, params=None):
        """Views (w_query, w_hidden, b_hidden, w_out, b_out) into the flat vector."""
        theta = self.params if params is None else params
        s, h, c = self.stencil_size, self.hidden_width, self.cond_dim
        sizes = [c * s, h * (s + 1 + c), h, h, 1]
        offsets = np.cumsum([0] + sizes)
        w_query = theta[offsets[0]:offsets[1]].reshape(c, s)
        w_hidden = theta[offsets[1]:offsets[2]].reshape(h, s + 1 + c)
        b_hidden = theta[offsets[2]:offsets[3]]
        w_out = theta[offsets[3]:offsets[4]]
        b_out = theta[offsets[4]]
        return w_query, w_hidden, b_hidden, w_out, b_out

    def predict(self, mask: np.ndarray, t: float, cond: ConditioningFeatures) -> np.ndarray:
        """Velocity field for the mask at path time t."""
        v, _ = _forward(self, np.asarray(mask, dtype=np.float64), t, cond)
        return v.reshape(mask.shape)


def zeros_model(stencil_radius=1, hidden_width=16, cond_dim=8) -> VectorFieldModel:
    n = param_count(stencil_radius, hidden_width, cond_dim)
    return VectorFieldModel(np.zeros(n), stencil_radius, hidden_width, cond_dim)


def init_model(stencil_radius=1, hidden_width=16, cond_dim=8, seed=0) -> VectorFieldModel:
    """Seeded init: hidden blocks scaled by 1/sqrt(fan_in), output block zero.

    A zero output layer makes the initial velocity field identically zero,
    so training starts from the plain "keep the coarse mask" baseline.
    """
    s = (2 * stencil_radius + 1) ** 2
    stream = SplitMix64(seed)
    w_query = stream.normal(cond_dim * s) / np.sqrt(s)
    w_hidden = stream.normal(hidden_width * (s + 1 + cond_dim)) / np.sqrt(s + 1 + cond_dim)
    tail = np.zeros(2 * hidden_width + 1)
    return VectorFieldModel(
        np.concatenate([w_query, w_hidden, tail]),
        stencil_radius,
        hidden_width,
        cond_dim,
    )


def _stencils(mask: np.ndarray, radius: int) -> np.ndarray:
    """(H*W, (2r+1)^2) matrix of zero-padded local neighborhoods."""
    padded = np.pad(mask, radius, mode="constant")
    win = np.lib.stride_tricks.sliding_window_view(padded, (2 * radius + 1, 2 * radius + 1))
    return win.reshape(mask.size, -1)


def _forward(model: VectorFieldModel, mask: np.ndarray, t: float, cond: ConditioningFeatures):
    """Vectorized forward pass; returns (velocity, cache for backprop).

    Per pixel this evaluates exactly the guidance-attention primitive
    (softmax(Q K^T / sqrt(c)) V with K = V = [text_vec; img pixel vector])
    followed by the tanh stencil network.
    """
    if mask.ndim != 2:
        raise ShapeMismatchError(f"mask must be 2-D, got shape {mask.shape}")
    if cond.img_grid.shape[:2] != mask.shape or cond.text_vec.shape[0] != model.cond_dim:
        raise ShapeMismatchError(
            f"conditioning {cond.img_grid.shape} incompatible with mask {mask.shape} "
            f"and cond_dim {model.cond_dim}"
        )
    w_query, w_hidden, b_hidden, w_out, b_out = model.unpack()
    c = model.cond_dim
    txt = cond.text_vec
    img = cond.img_grid.reshape(-1, c)

    stencil = _stencils(mask, model.stencil_radius)
    queries = stencil @ w_query.T
    scale = 1.0 / np.sqrt(c)
    z0 = queries @ txt * scale
    z1 = (queries * img).sum(axis=1) * scale
    zmax = np.maximum(z0, z1)
    e0 = np.exp(z0 - zmax)
    e1 = np.exp(z1 - zmax)
    denom = e0 + e1
    a0 = e0 / denom
    a1 = e1 / denom
    attended = a0[:, None] * txt + a1[:, None] * img

    features = np.concatenate(
        [stencil, np.full((stencil.shape[0], 1), t), attended], axis=1
    )
    hidden = np.tanh(features @ w_hidden.T + b_hidden)
    velocity = hidden @ w_out + b_out
    cache = (stencil, img, txt, a0, a1, features, hidden, scale)
    return velocity, cache


def _backward(model: VectorFieldModel, d_velocity: np.ndarray, cache) -> np.ndarray:
    """Parameter gradient given d(loss)/d(velocity) per pixel."""
    stencil, img, txt, a0, a1, features, hidden, scale = cache
    w_query, w_hidden, _, w_out, _ = model.unpack()
    s = model.stencil_size

    d_w_out = hidden.T @ d_velocity
    d_b_out = d_velocity.sum()
    d_hidden = np.outer(d_velocity, w_out)
    d_pre = d_hidden * (1.0 - hidden**2)
    d_w_hidden = d_pre.T @ features
    d_b_hidden = d_pre.sum(axis=0)
    d_features = d_pre @ w_hidden

    d_attended = d_features[:, s + 1:]
    d_a0 = d_attended @ txt
    d_a1 = (d_attended * img).sum(axis=1)
    # 2-way softmax jacobian: dz_i = a_i (da_i - sum_j a_j da_j)
    mix = a0 * d_a0 + a1 * d_a1
    d_z0 = a0 * (d_a0 - mix)
    d_z1 = a1 * (d_a1 - mix)
    d_queries = (d_z0[:, None] * txt + d_z1[:, None] * img) * scale
    d_w_query = d_queries.T @ stencil

    return np.concatenate(
        [d_w_query.ravel(), d_w_hidden.ravel(), d_b_hidden, d_w_out, [d_b_out]]
    )


def cfm_loss(model: VectorFieldModel, x0, x1, cond, t_samples) -> float:
    """Mean squared error between predicted and exact path velocity.

    Averaged over the given path times and all pixels.
    """
    loss, _ = cfm_loss_grad(model, x0, x1, cond, t_samples, need_grad=False)
    return loss


def cfm_loss_grad(model, x0, x1, cond, t_samples, need_grad=True):
    """Flow-matching loss and (optionally) its analytic parameter gradient."""
    t_samples = list(t_samples)
    if not t_samples:
        raise ValueError("t_samples must be non-empty")
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    target = target_velocity(x0, x1).ravel()
    n_t = len(t_samples)
    n_px = target.size
    loss = 0.0
    grad = np.zeros_like(model.params) if need_grad else None
    for t in t_samples:
        x_t = probability_path(x0, x1, t)
        velocity, cache = _forward(model, x_t, t, cond)
        resid = velocity - target
        loss += float(resid @ resid) / (n_t * n_px)
        if need_grad:
            grad += _backward(model, 2.0 * resid / (n_t * n_px), cache)
    return loss, grad


@dataclass(frozen=True)
class FlowTrainConfig:
    lr: float = 0.05
    steps: int = 2000
    batch: int = 8
    t_per_sample: int = 4
    seed: int = 0


@dataclass
class TrainResult:
    model: VectorFieldModel
    step_losses: list
    initial_loss: float
    final_loss: float


_EVAL_T_GRID = (0.125, 0.375, 0.625, 0.875)


def _corpus_loss(model, corpus) -> float:
    return float(
        np.mean([cfm_loss(model, x0, x1, cond, _EVAL_T_GRID) for x0, x1, cond in corpus])
    )


def train_flow(corpus, hyper: FlowTrainConfig = FlowTrainConfig(), model: VectorFieldModel | None = None) -> TrainResult:
    """Fit the velocity model by SGD on the flow-matching objective.

    Each step draws ``batch`` corpus items and ``t_per_sample`` uniform
    path times per item from the seeded stream, then takes one SGD step on
    the mean loss.  Deterministic for a fixed corpus and config.  Raises
    :class:`FlowDivergenceError` if the loss stops being finite.
    """
    corpus = list(corpus)
    if not corpus:
        raise ValueError("corpus must be non-empty")
    if model is None:
        x0, _, cond = corpus[0]
        model = init_model(cond_dim=cond.text_vec.shape[0], seed=hyper.seed)
    theta = model.params.copy()
    work = VectorFieldModel(theta, model.stencil_radius, model.hidden_width, model.cond_dim)
    # distinct stream from init_model, which consumes the raw seed
    stream = SplitMix64(hyper.seed ^ 0x7E5D_B06B)

    initial = _corpus_loss(work, corpus)
    losses = []
    for step in range(hyper.steps):
        idx = stream.integers(hyper.batch, len(corpus))
        grad = np.zeros_like(theta)
        batch_loss = 0.0
        for i in idx:
            x0, x1, cond = corpus[int(i)]
            t_draws = stream.uniform(hyper.t_per_sample)
            item_loss, item_grad = cfm_loss_grad(work, x0, x1, cond, t_draws)
            batch_loss += item_loss / hyper.batch
            grad += item_grad / hyper.batch
        if not np.isfinite(batch_loss):
            raise FlowDivergenceError(
                f"training loss became non-finite at step {step}",
                step=step,
                loss_history=losses[-10:],
            )
        theta -= hyper.lr * grad
        losses.append(batch_loss)
    final = _corpus_loss(work, corpus)
    return TrainResult(model=work, step_losses=losses, initial_loss=initial, final_loss=final)
