"""spectradx: spectral anomaly scoring and flow-based mask refinement.

Library layout:

- ``spectral``: standardization, covariance spectra, Marchenko-Pastur
  bounds/CDF, and the spectral anomaly score.
- ``simulate``: seeded noise and spiked-covariance ensembles plus the
  detached-eigenvalue oracle.
- ``attention``: cross-attention and channel fusion primitives.
- ``flow`` / ``velocity`` / ``corpus``: probability paths, the Euler
  refiner, the trainable per-pixel velocity model, and the synthetic
  mask corpus.
- ``classifier``: focal-loss logistic diagnosis over the scalar score.
- ``metrics``: Dice/IoU, confusion metrics, ROC and PR curves.
- ``pipeline``: purify -> features -> spectrum -> diagnosis composition.
- ``io``: CSV / SPDX-binary / PGM / JSON artifact formats.
- ``cli``: the ``spectradx`` command-line front end.
"""

from .attention import AttentionInput, attention_weights, channel_fuse, cross_attention
from .classifier import (
    ClassifierModel,
    ClassifierTrainConfig,
    Diagnosis,
    LabeledScore,
    diagnose,
    focal_loss,
    predict_prob,
    select_threshold,
    train_classifier,
)
from .corpus import CorpusPair, CorruptionConfig, DEFAULT_CORRUPTION, class_text_embedding, gen_mask_corpus
from .errors import (
    ContractViolationError,
    DataIntegrityError,
    FlowDivergenceError,
    FormatError,
    ShapeMismatchError,
    SpectraDxError,
    TooSmallRegionError,
)
from .flow import (
    ConditioningFeatures,
    FlowState,
    binarize,
    euler_refine,
    probability_path,
    seg_loss,
    seg_loss_grad,
    target_velocity,
)
from .metrics import (
    ClassificationMetrics,
    ConfusionCounts,
    Curve,
    classification_metrics,
    dice_iou,
    mann_whitney_auc,
    pr_curve,
    roc_curve,
)
from .pipeline import (
    ImageDiagnosis,
    PatchProjectionProvider,
    diagnose_image,
    gen_diag_case,
    patch_features,
    purify,
)
from .rng import GENERATOR_NAME, SplitMix64, derive_seed
from .simulate import EnsembleConfig, SpikeSpec, bbp_oracle, gen_noise, gen_spiked, run_ensemble
from .spectral import (
    FeatureMatrix,
    MPParams,
    SpectralReport,
    eigenvalues_sym,
    mp_bounds,
    mp_cdf,
    sample_covariance,
    spectral_report,
    standardize,
)
from .velocity import (
    FlowTrainConfig,
    TrainResult,
    VectorFieldModel,
    cfm_loss,
    cfm_loss_grad,
    init_model,
    param_count,
    train_flow,
    zeros_model,
)

__version__ = "0.1.0"
