"""Multimodal guidance primitives: cross-attention and channel fusion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatchError


@dataclass(frozen=True)
class AttentionInput:
    """Queries (m x d), keys (k x d) and values (k x d_v)."""

    queries: np.ndarray
    keys: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        q = np.atleast_2d(np.asarray(self.queries, dtype=np.float64))
        k = np.atleast_2d(np.asarray(self.keys, dtype=np.float64))
        v = np.atleast_2d(np.asarray(self.values, dtype=np.float64))
        if q.shape[1] != k.shape[1]:
            raise ShapeMismatchError(f"query dim {q.shape[1]} != key dim {k.shape[1]}")
        if k.shape[0] != v.shape[0]:
            raise ShapeMismatchError(f"{k.shape[0]} keys but {v.shape[0]} values")
        if q.shape[1] < 1:
            raise ShapeMismatchError("inner dimension must be at least 1")
        object.__setattr__(self, "queries", q)
        object.__setattr__(self, "keys", k)
        object.__setattr__(self, "values", v)


def attention_weights(inp: AttentionInput) -> np.ndarray:
    """Row-stochastic softmax(Q K^T / sqrt(d)) with max subtraction."""
    d = inp.queries.shape[1]
    scores = inp.queries @ inp.keys.T / np.sqrt(d)
    scores -= scores.max(axis=1, keepdims=True)
    w = np.exp(scores)
    return w / w.sum(axis=1, keepdims=True)


def cross_attention(inp: AttentionInput) -> np.ndarray:
    """Scaled dot-product attention output, one d_v row per query."""
    return attention_weights(inp) @ inp.values


def channel_fuse(img_grid: np.ndarray, text_vec: np.ndarray) -> np.ndarray:
    """Channel-wise product of an H x W x c grid with a c-vector."""
    img_grid = np.asarray(img_grid, dtype=np.float64)
    text_vec = np.asarray(text_vec, dtype=np.float64)
    if img_grid.ndim != 3 or text_vec.ndim != 1 or img_grid.shape[2] != text_vec.shape[0]:
        raise ShapeMismatchError(
            f"channel counts differ: grid {img_grid.shape} vs vector {text_vec.shape}"
        )
    return img_grid * text_vec
