"""Reconstruction quality and sparsity metrics."""

import numpy as np

from .errors import ShapeError

__all__ = ["PSNR_CAP_DB", "psnr", "sparsity_fractions", "coefficient_histogram"]

# reported for exact reconstructions, where the true PSNR is unbounded
PSNR_CAP_DB = 99.0


def psnr(reference, estimate, peak):
    """Peak signal-to-noise ratio 10*log10(peak**2 / MSE), in dB."""
    reference = np.asarray(reference, dtype=np.float64)
    estimate = np.asarray(estimate, dtype=np.float64)
    if reference.shape != estimate.shape:
        raise ShapeError(
            f"shape mismatch: {reference.shape} vs {estimate.shape}"
        )
    if peak <= 0:
        raise ValueError(f"peak must be positive, got {peak}")
    mse = float(np.mean((reference - estimate) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return float(10.0 * np.log10(peak * peak / mse))


def sparsity_fractions(maps, tolerance=1e-3):
    """(nonzero fraction, fraction with |z| <= tolerance) over all entries."""
    if tolerance < 0:
        raise ValueError(f"tolerance must be non-negative, got {tolerance}")
    values = np.asarray(maps, dtype=np.float64)
    total = values.size
    nonzero = float(np.count_nonzero(values)) / total
    near_zero = float(np.count_nonzero(np.abs(values) <= tolerance)) / total
    return nonzero, near_zero


def coefficient_histogram(maps, bins, value_range):
    """Equal-width histogram of coefficient values as (bin center, count).

    Values outside ``value_range`` are clamped into the edge bins, so the
    counts always sum to the total number of coefficients.
    """
    lo, hi = value_range
    if not lo < hi:
        raise ValueError(f"invalid range [{lo}, {hi}]")
    if bins < 1:
        raise ValueError(f"need at least 1 bin, got {bins}")
    values = np.asarray(maps, dtype=np.float64).ravel()
    width = (hi - lo) / bins
    indices = np.floor((values - lo) / width).astype(np.int64)
    indices = np.clip(indices, 0, bins - 1)
    counts = np.bincount(indices, minlength=bins)
    centers = lo + (np.arange(bins) + 0.5) * width
    return [(float(c), int(n)) for c, n in zip(centers, counts)]
