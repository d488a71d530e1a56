"""Maximum-likelihood estimation of the Cauchy scale from observed data.

The location is fixed at zero (the sparsity assumption); only the scale
gamma is fit, by minimizing the epsilon-guarded negative log-likelihood
with a golden-section search on log(gamma).
"""

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["GammaEstimate", "estimate_gamma", "negative_log_likelihood"]

GAMMA_FLOOR = 1e-8
DEFAULT_EPSILON = 1e-12

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_MAX_ITERATIONS = 200
_LOG_TOLERANCE = 1e-8


@dataclass(frozen=True)
class GammaEstimate:
    gamma: float
    neg_log_likelihood: float
    sample_count: int
    degenerate: bool = False


def negative_log_likelihood(gamma, samples, epsilon=DEFAULT_EPSILON):
    """-sum(log(pdf(x; gamma) + epsilon)) over the samples, delta = 0."""
    samples = np.asarray(samples, dtype=np.float64)
    pdf = gamma / (np.pi * (gamma * gamma + samples * samples))
    return float(-np.sum(np.log(pdf + epsilon)))


def estimate_gamma(samples, epsilon=DEFAULT_EPSILON):
    """Fit the Cauchy scale to ``samples`` by bracketed 1D minimization.

    The bracket is [1e-6*s, 10*s] on a log axis, where s is the median
    absolute sample value (falling back to the mean absolute value when the
    median is zero). All-zero data has no interior optimum and returns the
    gamma floor with the degenerate flag set.
    """
    samples = np.asarray(samples, dtype=np.float64).ravel()
    if samples.size < 2:
        raise ValueError(f"need at least 2 samples, got {samples.size}")
    if not np.all(np.isfinite(samples)):
        raise ValueError("samples contain non-finite values")

    abs_samples = np.abs(samples)
    if not np.any(abs_samples > 0):
        return GammaEstimate(
            gamma=GAMMA_FLOOR,
            neg_log_likelihood=negative_log_likelihood(GAMMA_FLOOR, samples, epsilon),
            sample_count=samples.size,
            degenerate=True,
        )

    scale = float(np.median(abs_samples))
    if scale == 0.0:
        scale = float(np.mean(abs_samples))

    lo = math.log(1e-6 * scale)
    hi = math.log(10.0 * scale)
    objective = lambda t: negative_log_likelihood(math.exp(t), samples, epsilon)

    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = objective(c), objective(d)
    for _ in range(_MAX_ITERATIONS):
        if b - a <= _LOG_TOLERANCE:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = objective(d)

    t_best = c if fc < fd else d
    gamma = max(math.exp(t_best), GAMMA_FLOOR)
    return GammaEstimate(
        gamma=gamma,
        neg_log_likelihood=negative_log_likelihood(gamma, samples, epsilon),
        sample_count=samples.size,
        degenerate=False,
    )
