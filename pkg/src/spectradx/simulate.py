"""Synthetic noise and spiked feature ensembles.

Null matrices are i.i.d. standard Gaussian.  The alternative adds a
low-rank structured component: rows are drawn from a zero-mean Gaussian
whose population covariance is the identity plus rank-k spikes
``sum_k (strength_k - 1) u_k u_k^T``, realized as the noise matrix plus a
low-rank correction so that an empty spike list reproduces the null
stream bit for bit.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .rng import SplitMix64, derive_seed
from .spectral import FeatureMatrix, SpectralReport, spectral_report


@dataclass(frozen=True)
class SpikeSpec:
    """Population spike strengths (> 1) and optional orthonormal directions."""

    strengths: tuple
    directions: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "strengths", tuple(float(s) for s in self.strengths))
        if any(s <= 1.0 for s in self.strengths):
            raise ValueError("spike strengths must exceed 1 (strength 1 is pure noise)")
        if self.directions is not None:
            dirs = np.asarray(self.directions, dtype=np.float64)
            if dirs.ndim != 2 or dirs.shape[1] != len(self.strengths):
                raise ValueError("directions must be a (p, k) matrix matching the strengths")
            gram = dirs.T @ dirs
            if np.max(np.abs(gram - np.eye(dirs.shape[1]))) > 1e-8:
                raise ValueError("spike directions must be pairwise orthonormal")
            object.__setattr__(self, "directions", dirs)


@dataclass(frozen=True)
class EnsembleConfig:
    n_samples: int
    n_features: int
    spike: SpikeSpec | None = None
    seed: int = 0
    n_trials: int = 1

    def __post_init__(self):
        if self.n_samples < 2 or self.n_features < 1:
            raise ValueError("need n_samples >= 2 and n_features >= 1")
        if self.n_trials < 1:
            raise ValueError("n_trials must be positive")


def gen_noise(cfg: EnsembleConfig) -> FeatureMatrix:
    """N x p i.i.d. standard normal matrix from the seeded stream (row-major)."""
    stream = SplitMix64(cfg.seed)
    data = stream.normal(cfg.n_samples * cfg.n_features)
    return FeatureMatrix(data.reshape(cfg.n_samples, cfg.n_features))


def _orthonormal_directions(stream: SplitMix64, p: int, k: int) -> np.ndarray:
    """Draw k Gaussian p-vectors in stream order and orthonormalize them.

    Modified Gram-Schmidt, so the result is deterministic and independent
    of any LAPACK implementation details.
    """
    dirs = np.empty((p, k))
    for j in range(k):
        v = stream.normal(p)
        for i in range(j):
            v -= (v @ dirs[:, i]) * dirs[:, i]
        norm = np.linalg.norm(v)
        if norm < 1e-12:
            raise ValueError("degenerate random direction draw")
        dirs[:, j] = v / norm
    return dirs


def gen_spiked(cfg: EnsembleConfig) -> FeatureMatrix:
    """Noise matrix plus rank-k structured signal.

    Rows have population covariance I + sum_k (l_k - 1) u_k u_k^T.  The
    stream is consumed in a fixed order: first the N*p noise entries, then
    (only if directions were not supplied) p entries per spike direction.
    With an empty strengths list the output equals :func:`gen_noise`.
    """
    if cfg.spike is None:
        raise ValueError("gen_spiked requires cfg.spike")
    stream = SplitMix64(cfg.seed)
    noise = stream.normal(cfg.n_samples * cfg.n_features).reshape(cfg.n_samples, cfg.n_features)
    strengths = np.asarray(cfg.spike.strengths)
    if strengths.size == 0:
        return FeatureMatrix(noise)
    if cfg.spike.directions is not None:
        dirs = cfg.spike.directions
        if dirs.shape[0] != cfg.n_features:
            raise ValueError("direction dimension does not match n_features")
    else:
        dirs = _orthonormal_directions(stream, cfg.n_features, strengths.size)
    # X = W (I + U diag(sqrt(l)-1) U^T) has population covariance I + U diag(l-1) U^T
    coeffs = np.sqrt(strengths) - 1.0
    data = noise + ((noise @ dirs) * coeffs) @ dirs.T
    return FeatureMatrix(data)


def bbp_oracle(strength: float, aspect_ratio: float) -> float | None:
    """Asymptotic location of the detached sample eigenvalue for one spike.

    A population spike of strength l > 1 + sqrt(y) produces a sample
    eigenvalue at l * (1 + y / (l - 1)); at or below that threshold the
    spike is undetectable and None is returned.
    """
    if strength <= 1.0:
        raise ValueError("strength must exceed 1")
    if aspect_ratio <= 0.0:
        raise ValueError("aspect_ratio must be positive")
    if strength <= 1.0 + np.sqrt(aspect_ratio):
        return None
    return float(strength * (1.0 + aspect_ratio / (strength - 1.0)))


def _trial_config(cfg: EnsembleConfig, index: int) -> EnsembleConfig:
    return EnsembleConfig(
        n_samples=cfg.n_samples,
        n_features=cfg.n_features,
        spike=cfg.spike,
        seed=derive_seed(cfg.seed, index),
        n_trials=1,
    )


def run_trial(cfg: EnsembleConfig, index: int, edge_tolerance: float = 0.0) -> SpectralReport:
    """Generate and analyze the matrix of one derived-seed trial."""
    sub = _trial_config(cfg, index)
    fm = gen_noise(sub) if cfg.spike is None else gen_spiked(sub)
    return spectral_report(fm, edge_tolerance=edge_tolerance)


def run_ensemble(cfg: EnsembleConfig, edge_tolerance: float = 0.0, workers: int = 1) -> list:
    """Analyze ``cfg.n_trials`` independent matrices.

    Trial i uses the derived seed master XOR splitmix64(0) output i, so the
    result list is independent of scheduling; with ``workers > 1`` trials
    run on a thread pool (the heavy numpy calls release the GIL) and are
    still returned in trial order.
    """
    indices = range(cfg.n_trials)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda i: run_trial(cfg, i, edge_tolerance), indices))
    return [run_trial(cfg, i, edge_tolerance) for i in indices]
