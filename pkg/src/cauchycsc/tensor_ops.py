"""Deterministic 2D array arithmetic for the convolutional generative model.

All grids are float64 numpy arrays. An image of shape (P_r, P_c) is modeled
as the sum over k of the full zero-padded convolution of a small filter
(M_r, M_c) with a feature map (Q_r, Q_c), where P = M + Q - 1 per dimension,
so the reconstruction has exactly the image extent.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal

from .errors import ShapeError

__all__ = [
    "as_grid",
    "map_shape",
    "conv_full",
    "corr_valid",
    "corr_valid_bank",
    "forward",
    "fidelity_and_gradients",
]


def as_grid(a, name="grid"):
    """Validate and return ``a`` as a finite 2D float64 array."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2D, got ndim={arr.ndim}")
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def map_shape(image_shape, filter_shape):
    """Feature-map extent (Q_r, Q_c) so that filter * map is image-sized."""
    qr = image_shape[0] - filter_shape[0] + 1
    qc = image_shape[1] - filter_shape[1] + 1
    if qr < 1 or qc < 1:
        raise ShapeError(
            f"filter {tuple(filter_shape)} does not fit image {tuple(image_shape)}"
        )
    return (qr, qc)


def conv_full(a, b):
    """Full zero-padded linear convolution of two grids.

    Output shape is (a_r + b_r - 1, a_c + b_c - 1); commutative in its
    arguments up to floating-point summation order.
    """
    a = as_grid(a, "a")
    b = as_grid(b, "b")
    # scipy's direct 2D convolution is much faster with the larger array first
    if a.size >= b.size:
        return signal.convolve2d(a, b, mode="full")
    return signal.convolve2d(b, a, mode="full")


def corr_valid(a, b):
    """Cross-correlation of ``a`` with ``b`` at fully-overlapping positions.

    Output shape is (a_r - b_r + 1, a_c - b_c + 1). This is the adjoint of
    ``conv_full``: <conv_full(f, z), r> == <z, corr_valid(r, f)>.
    """
    a = as_grid(a, "a")
    b = as_grid(b, "b")
    if b.shape[0] > a.shape[0] or b.shape[1] > a.shape[1]:
        raise ShapeError(f"kernel {b.shape} larger than grid {a.shape}")
    return signal.correlate2d(a, b, mode="valid")


def corr_valid_bank(a, bank):
    """``corr_valid(a, bank[k])`` for every k, as one (K, out_r, out_c) array.

    Implemented as a single windowed matrix product; matches the per-k
    scipy path to within summation-order tolerance.
    """
    a = np.asarray(a, dtype=np.float64)
    bank = np.asarray(bank, dtype=np.float64)
    kr, kc = bank.shape[1], bank.shape[2]
    if kr > a.shape[0] or kc > a.shape[1]:
        raise ShapeError(f"bank kernels {(kr, kc)} larger than grid {a.shape}")
    out_r, out_c = a.shape[0] - kr + 1, a.shape[1] - kc + 1
    windows = sliding_window_view(a, (kr, kc)).reshape(out_r * out_c, kr * kc)
    flat = windows @ bank.reshape(bank.shape[0], kr * kc).T
    return np.ascontiguousarray(flat.T.reshape(bank.shape[0], out_r, out_c))


def forward(filters, maps):
    """Reconstruction sum_k conv_full(filters[k], maps[k]).

    ``filters`` has shape (K, M_r, M_c) and ``maps`` (K, Q_r, Q_c); the
    result has shape (M_r + Q_r - 1, M_c + Q_c - 1).
    """
    filters = np.asarray(filters, dtype=np.float64)
    maps = np.asarray(maps, dtype=np.float64)
    if filters.ndim != 3 or maps.ndim != 3:
        raise ShapeError("filters and maps must be (K, rows, cols) stacks")
    if filters.shape[0] != maps.shape[0]:
        raise ShapeError(
            f"K mismatch: {filters.shape[0]} filters vs {maps.shape[0]} maps"
        )
    k, mr, mc = filters.shape
    qr, qc = maps.shape[1], maps.shape[2]
    out = np.zeros((mr + qr - 1, mc + qc - 1))
    # accumulate one filter tap at a time: a (K,) x (K, Q_r, Q_c) contraction
    for i in range(mr):
        for j in range(mc):
            out[i : i + qr, j : j + qc] += np.tensordot(
                filters[:, i, j], maps, axes=(0, 0)
            )
    return out


def fidelity_and_gradients(y, filters, maps):
    """Squared-error data fidelity and its gradients.

    Returns ``(cost, grad_maps, grad_filters)`` for
    cost = sum((y - sum_k f_k * z_k)**2), with
    grad_maps[k] = -2 * corr_valid(residual, filters[k]) and
    grad_filters[k] = -2 * corr_valid(residual, maps[k]).
    """
    y = as_grid(y, "y")
    estimate = forward(filters, maps)
    if estimate.shape != y.shape:
        raise ShapeError(
            f"reconstruction shape {estimate.shape} != image shape {y.shape}"
        )
    residual = y - estimate
    cost = float(np.sum(residual * residual))
    grad_maps = -2.0 * corr_valid_bank(residual, filters)
    grad_filters = -2.0 * corr_valid_bank(residual, maps)
    return cost, grad_maps, grad_filters
