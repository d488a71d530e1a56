"""Convolutional sparse coding with a Cauchy shrinkage operator.

Learns unit-norm filter banks and sparse feature maps from grayscale
images by alternating proximal-gradient steps. The Cauchy penalty's
closed-form proximal operator shrinks coefficients toward zero without
the exact-zero locking of soft/hard thresholding, which are included as
baselines.
"""

from .checkpoint import (
    CHECKPOINT_FORMAT_VERSION,
    Checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from .errors import (
    CheckpointVersionError,
    ConvergenceConditionError,
    FilterDegenerateError,
    ImageFormatError,
    NumericDivergenceError,
    ShapeError,
)
from .estimation import GammaEstimate, estimate_gamma, negative_log_likelihood
from .experiments import ExperimentSpec, run_experiment
from .images import (
    load_dataset,
    load_idx,
    load_image,
    load_pgm,
    load_png,
    preprocess_zero_mean,
    write_pgm,
)
from .metrics import coefficient_histogram, psnr, sparsity_fractions
from .penalties import (
    CauchyPenalty,
    HardPenalty,
    SoftPenalty,
    apply_prox,
    cauchy_pdf,
    cauchy_penalty,
    prox_cauchy,
    prox_curve,
    prox_hard,
    prox_soft,
)
from .tensor_ops import (
    conv_full,
    corr_valid,
    corr_valid_bank,
    fidelity_and_gradients,
    forward,
    map_shape,
)
from .training import (
    FeatureMaps,
    FilterBank,
    IterationStats,
    TrainConfig,
    TrainReport,
    encode,
    f_step,
    reconstruct,
    total_cost,
    train,
    z_step,
)

__version__ = "0.1.0"

__all__ = [
    "CHECKPOINT_FORMAT_VERSION",
    "CauchyPenalty",
    "Checkpoint",
    "CheckpointVersionError",
    "ConvergenceConditionError",
    "ExperimentSpec",
    "FeatureMaps",
    "FilterBank",
    "FilterDegenerateError",
    "GammaEstimate",
    "HardPenalty",
    "ImageFormatError",
    "IterationStats",
    "NumericDivergenceError",
    "ShapeError",
    "SoftPenalty",
    "TrainConfig",
    "TrainReport",
    "apply_prox",
    "cauchy_pdf",
    "cauchy_penalty",
    "coefficient_histogram",
    "conv_full",
    "corr_valid",
    "corr_valid_bank",
    "encode",
    "estimate_gamma",
    "f_step",
    "fidelity_and_gradients",
    "forward",
    "load_checkpoint",
    "load_dataset",
    "load_idx",
    "load_image",
    "load_pgm",
    "load_png",
    "map_shape",
    "negative_log_likelihood",
    "preprocess_zero_mean",
    "prox_cauchy",
    "prox_curve",
    "prox_hard",
    "prox_soft",
    "psnr",
    "reconstruct",
    "run_experiment",
    "save_checkpoint",
    "sparsity_fractions",
    "total_cost",
    "train",
    "write_pgm",
    "z_step",
]
