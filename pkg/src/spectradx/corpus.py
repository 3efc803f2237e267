"""Synthetic (coarse mask, target mask, conditioning) training corpus.

Targets are unions of 1-3 random filled ellipses.  Coarse inputs corrupt
the target with random square-element dilation or erosion, per-component
drops, and clamped additive Gaussian noise.  Conditioning mimics the two
guidance channels: a fixed class text embedding, and an evidence grid
built from the box-blurred target plus per-channel noise (this evidence
leak is deliberate; it is what makes refinement learnable).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .flow import ConditioningFeatures
from .rng import SplitMix64

TEXT_EMBED_SEED = 0x7E87_0001


@dataclass(frozen=True)
class CorruptionConfig:
    """Knobs for degrading a target mask into a coarse one.

    Per sample: dilate by U{0..dilate_px} or erode by U{0..erode_px}
    (coin flip), drop each connected component with probability
    ``drop_prob``, then add N(0, noise_sd^2) noise and clamp to [0, 1].
    ``noise_sd`` also sets the evidence-grid noise level.
    """

    dilate_px: int = 2
    erode_px: int = 2
    noise_sd: float = 0.2
    drop_prob: float = 0.1


DEFAULT_CORRUPTION = CorruptionConfig()


class CorpusPair(NamedTuple):
    coarse: np.ndarray
    gt: np.ndarray
    cond: ConditioningFeatures


def class_text_embedding(cond_dim: int) -> np.ndarray:
    """Fixed unit-norm pseudo-embedding standing in for the prompt vector."""
    vec = SplitMix64(TEXT_EMBED_SEED).normal(cond_dim)
    return vec / np.linalg.norm(vec)


def _fill_ellipse(mask: np.ndarray, stream: SplitMix64):
    h, w = mask.shape
    u = stream.uniform(5)
    cy = u[0] * (h - 8) + 4
    cx = u[1] * (w - 8) + 4
    lo, hi = h / 8.0, h / 4.0
    a = lo + u[2] * (hi - lo)
    b = lo + u[3] * (hi - lo)
    phi = u[4] * np.pi
    yy, xx = np.mgrid[0:h, 0:w]
    dy, dx = yy - cy, xx - cx
    major = (dx * np.cos(phi) + dy * np.sin(phi)) / a
    minor = (-dx * np.sin(phi) + dy * np.cos(phi)) / b
    mask[major**2 + minor**2 <= 1.0] = 1.0


def _gen_target(h: int, w: int, stream: SplitMix64) -> np.ndarray:
    gt = np.zeros((h, w))
    n_blobs = 1 + int(stream.integers(1, 3)[0])
    for _ in range(n_blobs):
        _fill_ellipse(gt, stream)
    return gt


def _corrupt(gt: np.ndarray, corruption: CorruptionConfig, stream: SplitMix64) -> np.ndarray:
    coarse = gt.astype(bool)
    if stream.uniform(1)[0] < 0.5:
        px = int(stream.integers(1, corruption.dilate_px + 1)[0])
        if px:
            coarse = ndimage.binary_dilation(coarse, structure=np.ones((2 * px + 1, 2 * px + 1)))
    else:
        px = int(stream.integers(1, corruption.erode_px + 1)[0])
        if px:
            coarse = ndimage.binary_erosion(coarse, structure=np.ones((2 * px + 1, 2 * px + 1)))
    labels, n_comp = ndimage.label(coarse)
    if n_comp:
        drop = stream.uniform(n_comp) < corruption.drop_prob
        for comp in np.flatnonzero(drop):
            coarse = coarse & (labels != comp + 1)
    noisy = coarse.astype(np.float64)
    if corruption.noise_sd > 0:
        noisy = noisy + corruption.noise_sd * stream.normal(noisy.size).reshape(noisy.shape)
    return np.clip(noisy, 0.0, 1.0)


def _evidence_grid(gt: np.ndarray, cond_dim: int, noise_sd: float, stream: SplitMix64) -> np.ndarray:
    blurred = ndimage.uniform_filter(gt, size=3, mode="constant")
    grid = np.repeat(blurred[:, :, None], cond_dim, axis=2)
    if noise_sd > 0:
        grid = grid + noise_sd * stream.normal(grid.size).reshape(grid.shape)
    return grid


def gen_mask_corpus(
    n: int,
    h: int,
    w: int,
    corruption: CorruptionConfig = DEFAULT_CORRUPTION,
    seed: int = 0,
    cond_dim: int = 8,
) -> list:
    """Generate ``n`` (coarse, target, conditioning) triples, seeded.

    Minimum mask size is 16x16.  All randomness comes from one stream, so
    a fixed (n, h, w, corruption, seed, cond_dim) reproduces the corpus
    exactly.
    """
    if h < 16 or w < 16:
        raise ValueError("masks must be at least 16x16")
    stream = SplitMix64(seed)
    text_vec = class_text_embedding(cond_dim)
    pairs = []
    for _ in range(n):
        gt = _gen_target(h, w, stream)
        coarse = _corrupt(gt, corruption, stream)
        grid = _evidence_grid(gt, cond_dim, corruption.noise_sd, stream)
        pairs.append(CorpusPair(coarse, gt, ConditioningFeatures(text_vec, grid)))
    return pairs
