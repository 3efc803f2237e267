"""Spectral statistics of feature matrices.

Standardization, sample covariance, eigenvalue extraction,
Marchenko-Pastur support bounds, and the spectral anomaly score (the
summed excess of eigenvalues above the upper MP edge).  All functions are
pure and safe for concurrent use.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import ContractViolationError, DataIntegrityError

_EIG_CLAMP = 1e-10


@dataclass(frozen=True)
class FeatureMatrix:
    """N x p matrix of per-sample feature vectors (rows are samples)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise DataIntegrityError(f"feature matrix must be 2-D, got shape {arr.shape}")
        n, p = arr.shape
        if n < 2 or p < 1:
            raise DataIntegrityError(f"need at least 2 samples and 1 feature, got {n}x{p}")
        if not np.all(np.isfinite(arr)):
            raise DataIntegrityError("feature matrix contains NaN or Inf entries")
        object.__setattr__(self, "data", arr)

    @property
    def n_samples(self) -> int:
        return self.data.shape[0]

    @property
    def n_features(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class MPParams:
    """Marchenko-Pastur support for aspect ratio y = p / N.

    ``lambda_minus = (1 - sqrt(y))**2`` and ``lambda_plus = (1 + sqrt(y))**2``.
    When y > 1 the spectrum carries a point mass ``zero_mass = 1 - 1/y`` at 0
    (the rank deficiency of the sample covariance).
    """

    aspect_ratio: float
    lambda_minus: float
    lambda_plus: float
    zero_mass: float


@dataclass(frozen=True)
class SpectralReport:
    """Full spectral diagnosis of one feature matrix.

    ``eigenvalues`` are sorted descending.  ``outliers`` lists
    (index, eigenvalue) pairs for eigenvalues above the upper MP edge, and
    ``sas`` is the summed excess of those eigenvalues over ``lambda_plus``.
    """

    eigenvalues: np.ndarray
    mp: MPParams
    outliers: tuple
    sas: float
    n_samples: int
    n_features: int
    warnings: tuple = field(default=())


def constant_columns(data: np.ndarray) -> list:
    """Indices of columns with zero variance."""
    return list(np.flatnonzero(np.ptp(data, axis=0) == 0.0))


def standardize(fm: FeatureMatrix) -> FeatureMatrix:
    """Center each column and scale it to unit variance (divisor N).

    The population divisor N makes trace of the sample covariance equal p
    exactly, which keeps the Marchenko-Pastur null calibration exact.
    Constant columns cannot be scaled and are set to all zeros; callers
    that want to surface that should check :func:`constant_columns`.
    """
    data = fm.data
    mean = data.mean(axis=0)
    sd = data.std(axis=0)  # numpy default ddof=0: population convention
    centered = data - mean
    out = np.divide(centered, sd, out=np.zeros_like(centered), where=sd > 0)
    return FeatureMatrix(out)


def sample_covariance(fm: FeatureMatrix) -> np.ndarray:
    """(1/N) F^T F for an already standardized matrix F (divisor N)."""
    data = fm.data
    return data.T @ data / fm.n_samples


def eigenvalues_sym(matrix: np.ndarray) -> np.ndarray:
    """Eigenvalues of a symmetric matrix, sorted descending.

    Rejects matrices that are asymmetric beyond 1e-8 and verifies the
    eigenvalue sum against the trace (to 1e-8 * p).  Tiny negative values
    from the eigensolver (|lambda| < 1e-10) are clamped to zero.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ContractViolationError(f"expected a square matrix, got shape {matrix.shape}")
    asym = np.max(np.abs(matrix - matrix.T)) if matrix.size else 0.0
    if asym > 1e-8:
        raise ContractViolationError(f"matrix is asymmetric (max |S - S^T| = {asym:.3e})")
    vals = np.linalg.eigvalsh(matrix)
    p = matrix.shape[0]
    trace_gap = abs(vals.sum() - np.trace(matrix))
    if trace_gap > 1e-8 * p:
        raise ContractViolationError(f"eigenvalue sum deviates from trace by {trace_gap:.3e}")
    vals = np.where((vals < 0) & (vals > -_EIG_CLAMP), 0.0, vals)
    return np.sort(vals)[::-1]


def mp_bounds(n_samples: int, n_features: int) -> MPParams:
    """MP support edges for an N x p matrix: (1 +/- sqrt(p/N))**2."""
    if n_samples < 1 or n_features < 1:
        raise ValueError("n_samples and n_features must be positive")
    y = n_features / n_samples
    root = np.sqrt(y)
    return MPParams(
        aspect_ratio=y,
        lambda_minus=(1.0 - root) ** 2,
        lambda_plus=(1.0 + root) ** 2,
        zero_mass=max(0.0, 1.0 - 1.0 / y),
    )


def mp_cdf(x: float, mp: MPParams) -> float:
    """CDF of the Marchenko-Pastur law (variance 1, ratio y) at ``x``.

    The continuous part has density sqrt((l+ - x)(x - l-)) / (2 pi y x) on
    [l-, l+]; for y > 1 a point mass of 1 - 1/y sits at zero.  The density
    integral is evaluated by adaptive quadrature after the substitution
    x = c + r sin(theta) (c, r the center/half-width of the support), which
    removes the square-root endpoint singularities.
    """
    if x < 0:
        return 0.0
    if x >= mp.lambda_plus:
        return 1.0
    if x < mp.lambda_minus:
        return mp.zero_mass
    y = mp.aspect_ratio
    center = 0.5 * (mp.lambda_plus + mp.lambda_minus)
    radius = 0.5 * (mp.lambda_plus - mp.lambda_minus)
    if radius == 0.0:
        return mp.zero_mass

    def integrand(theta):
        return radius**2 * np.cos(theta) ** 2 / (2.0 * np.pi * y * (center + radius * np.sin(theta)))

    upper = np.arcsin(np.clip((x - center) / radius, -1.0, 1.0))
    mass, _ = quad(integrand, -np.pi / 2.0, upper, epsabs=1e-10, epsrel=1e-9, limit=200)
    return float(min(1.0, mp.zero_mass + mass))


def spectral_report(fm: FeatureMatrix, edge_tolerance: float = 0.0) -> SpectralReport:
    """Standardize, take the covariance spectrum, and score MP-edge outliers.

    Eigenvalues above ``lambda_plus * (1 + edge_tolerance)`` count as
    outliers; the score sums their excess over ``lambda_plus`` itself.
    The default tolerance 0 applies the strict rule with no finite-size
    edge buffer.
    """
    warn = tuple(f"column {j} is constant; standardized to zeros" for j in constant_columns(fm.data))
    standardized = standardize(fm)
    cov = sample_covariance(standardized)
    vals = eigenvalues_sym(cov)
    mp = mp_bounds(fm.n_samples, fm.n_features)
    cut = mp.lambda_plus * (1.0 + edge_tolerance)
    outliers = tuple((int(i), float(vals[i])) for i in np.flatnonzero(vals > cut))
    sas = float(sum(v - mp.lambda_plus for _, v in outliers))
    return SpectralReport(
        eigenvalues=vals,
        mp=mp,
        outliers=outliers,
        sas=sas,
        n_samples=fm.n_samples,
        n_features=fm.n_features,
        warnings=warn,
    )
