"""End-to-end diagnosis: purify, extract patch features, score, classify.

The feature provider is pluggable: anything callable as
``provider(image, mask) -> FeatureMatrix`` works.  The bundled provider
tiles the purified image into square patches and projects each flattened
patch with a fixed seeded random map, standing in for a frozen pretrained
encoder while preserving the N x p noise-versus-signal structure the
spectral analysis needs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .classifier import ClassifierModel, Diagnosis, diagnose
from .errors import ShapeMismatchError, TooSmallRegionError
from .rng import SplitMix64
from .spectral import FeatureMatrix, SpectralReport, spectral_report


def purify(image: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Zero everything outside the mask (pointwise product)."""
    image = np.asarray(image, dtype=np.float64)
    mask = np.asarray(mask, dtype=np.float64)
    if image.shape != mask.shape:
        raise ShapeMismatchError(f"image {image.shape} vs mask {mask.shape}")
    return image * mask


def _projection_matrix(p_out: int, patch_dim: int, seed: int) -> np.ndarray:
    """Seeded random projection with orthonormalized rows.

    Rows are Gaussian draws made exactly orthonormal (Gram-Schmidt, scaled
    by sqrt(patch_dim) so entries keep variance about 1/patch_dim).  Exact
    row orthogonality keeps projected i.i.d. noise i.i.d., so the
    Marchenko-Pastur null stays calibrated; a raw Gaussian map would leak
    its own Wishart spectrum into every feature covariance.
    """
    if p_out > patch_dim:
        raise ValueError(f"p_out ({p_out}) cannot exceed patch dimension ({patch_dim})")
    stream = SplitMix64(seed)
    rows = np.empty((p_out, patch_dim))
    for i in range(p_out):
        v = stream.normal(patch_dim)
        for j in range(i):
            v -= (v @ rows[j]) * rows[j]
        norm = np.linalg.norm(v)
        if norm < 1e-12:
            raise ValueError("degenerate projection draw")
        rows[i] = v / norm
    return rows


def patch_features(
    image: np.ndarray,
    mask: np.ndarray,
    patch_size: int = 16,
    p_out: int = 64,
    seed: int = 0,
) -> FeatureMatrix:
    """Project each mask-covered patch of the purified image to p_out dims.

    The image is tiled into non-overlapping patch_size x patch_size
    patches (dimensions must divide evenly); patches with any mask overlap
    are kept, flattened, and multiplied by the fixed seeded projection.
    Fewer than two kept patches raises :class:`TooSmallRegionError`.
    """
    image = np.asarray(image, dtype=np.float64)
    mask = np.asarray(mask, dtype=np.float64)
    if image.shape != mask.shape:
        raise ShapeMismatchError(f"image {image.shape} vs mask {mask.shape}")
    h, w = image.shape
    s = patch_size
    if h % s or w % s:
        raise ShapeMismatchError(f"image {h}x{w} not divisible by patch size {s}")
    focused = purify(image, mask)
    patches = focused.reshape(h // s, s, w // s, s).swapaxes(1, 2).reshape(-1, s * s)
    coverage = mask.reshape(h // s, s, w // s, s).swapaxes(1, 2).reshape(-1, s * s).sum(axis=1)
    kept = patches[coverage > 0]
    if kept.shape[0] < 2:
        raise TooSmallRegionError(
            f"mask covers {kept.shape[0]} patch(es); need at least 2 for spectral analysis"
        )
    proj = _projection_matrix(p_out, s * s, seed)
    return FeatureMatrix(kept @ proj.T)


@dataclass(frozen=True)
class PatchProjectionProvider:
    """The default feature provider: fixed-seed random patch projection."""

    patch_size: int = 16
    p_out: int = 64
    seed: int = 0

    def __call__(self, image: np.ndarray, mask: np.ndarray) -> FeatureMatrix:
        return patch_features(image, mask, self.patch_size, self.p_out, self.seed)


class ImageDiagnosis(NamedTuple):
    label: int
    probability: float
    sas: float
    report: SpectralReport


def diagnose_image(image, mask, provider, clf: ClassifierModel, edge_tolerance: float = 0.0) -> ImageDiagnosis:
    """Purify, featurize, score the spectrum, and classify one image.

    The full spectral report is returned alongside the label so callers
    can surface the outlier eigenvalues behind a positive call.
    """
    features = provider(image, mask)
    report = spectral_report(features, edge_tolerance=edge_tolerance)
    result: Diagnosis = diagnose(clf, report)
    return ImageDiagnosis(
        label=result.label, probability=result.probability, sas=result.sas, report=report
    )


def gen_diag_case(
    height: int = 128,
    width: int = 128,
    diseased: bool = False,
    seed: int = 0,
    noise_sd: float = 0.1,
    signal_strength: float = 0.6,
    stripe_period: int = 4,
    patch_size: int = 16,
):
    """Synthetic diagnosis case: (image, region mask) pair.

    The region of interest is a random ellipse.  Healthy tissue is pure
    pixel noise around mid-gray.  A diseased case adds a low-rank stripe
    texture: one fixed unit-norm stripe tile, scaled per patch by an
    independent Gaussian amplitude, so the patch matrix gains exactly one
    structured direction on top of the noise.
    """
    stream = SplitMix64(seed)
    u = stream.uniform(4)
    yy, xx = np.mgrid[0:height, 0:width]
    cy = height * (0.45 + 0.1 * u[0])
    cx = width * (0.45 + 0.1 * u[1])
    ry = height * (0.22 + 0.13 * u[2])
    rx = width * (0.22 + 0.13 * u[3])
    mask = ((((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2) <= 1.0).astype(np.float64)

    image = 0.5 + noise_sd * stream.normal(height * width).reshape(height, width)
    if diseased:
        tile = np.sin(2.0 * np.pi * np.arange(patch_size) / stripe_period)
        tile = np.tile(tile, (patch_size, 1))
        tile /= np.linalg.norm(tile)
        amps = stream.normal((height // patch_size) * (width // patch_size))
        stripes = np.kron(amps.reshape(height // patch_size, width // patch_size), tile)
        image = image + signal_strength * stripes * (mask > 0)
    return np.clip(image, 0.0, 1.0), mask
