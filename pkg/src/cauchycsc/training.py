"""Alternating-minimization learning of filter banks and sparse feature maps.

Each outer iteration runs a z-step (gradient descent on the data fidelity
followed by the penalty's elementwise prox) and an f-step (projected
gradient descent keeping every filter at unit norm). Both steps halve
their learning rate and roll back whenever a candidate update raises the
regularized cost, so the committed cost sequence never increases.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConvergenceConditionError,
    FilterDegenerateError,
    NumericDivergenceError,
    ShapeError,
)
from .estimation import estimate_gamma
from .metrics import psnr, sparsity_fractions
from .penalties import CauchyPenalty
from .tensor_ops import as_grid, corr_valid_bank, forward, map_shape

__all__ = [
    "FilterBank",
    "FeatureMaps",
    "TrainConfig",
    "IterationStats",
    "TrainReport",
    "total_cost",
    "z_step",
    "f_step",
    "train",
    "encode",
    "reconstruct",
]

DEFAULT_BASELINE_ETA = 1e-2


@dataclass(frozen=True)
class FilterBank:
    """A stack of K small filters, each kept at unit Euclidean norm."""

    data: np.ndarray  # (K, M_rows, M_cols)

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3:
            raise ShapeError(f"filters must be (K, rows, cols), got {arr.shape}")
        object.__setattr__(self, "data", arr)

    @classmethod
    def random(cls, k, filter_shape, rng):
        """Standard-normal filters from ``rng``, unit-normalized."""
        raw = rng.standard_normal((k, filter_shape[0], filter_shape[1]))
        return cls(_normalize_filters(raw))

    @property
    def k(self):
        return self.data.shape[0]

    @property
    def filter_shape(self):
        return self.data.shape[1:]

    def norms(self):
        return np.sqrt(np.sum(self.data**2, axis=(1, 2)))


@dataclass(frozen=True)
class FeatureMaps:
    """A stack of K coefficient grids paired with a filter bank."""

    data: np.ndarray  # (K, Q_rows, Q_cols)

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3:
            raise ShapeError(f"maps must be (K, rows, cols), got {arr.shape}")
        object.__setattr__(self, "data", arr)

    @classmethod
    def zeros(cls, k, shape):
        return cls(np.zeros((k, shape[0], shape[1])))

    @property
    def k(self):
        return self.data.shape[0]

    @property
    def map_shape(self):
        return self.data.shape[1:]


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for one training run.

    ``penalty=None`` selects the Cauchy penalty with the scale estimated
    from the training pixels and weight ``lam``. ``eta_z=None`` resolves to
    the largest step satisfying the convergence bound (8*gamma**2) for the
    Cauchy penalty and to a small default for the baselines.
    """

    penalty: object = None
    k: int = 25
    filter_shape: tuple = (5, 5)
    max_outer_iterations: int = 100
    z_inner_iterations: int = 10
    f_inner_iterations: int = 10
    eta_z: float = None
    eta_f: float = None
    lam: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be positive, got {self.k}")
        if min(self.filter_shape) < 1 or len(self.filter_shape) != 2:
            raise ValueError(f"bad filter shape {self.filter_shape}")
        for name in ("max_outer_iterations", "z_inner_iterations", "f_inner_iterations"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.lam < 0:
            raise ValueError(f"lam must be non-negative, got {self.lam}")
        for name in ("eta_z", "eta_f"):
            eta = getattr(self, name)
            if eta is not None and eta <= 0:
                raise ValueError(f"{name} must be positive, got {eta}")
        if isinstance(self.penalty, CauchyPenalty) and self.eta_z is not None:
            bound = 8.0 * self.penalty.gamma**2
            if self.eta_z > bound:
                raise ConvergenceConditionError(
                    f"eta_z={self.eta_z} exceeds 8*gamma**2={bound}"
                )


@dataclass(frozen=True)
class IterationStats:
    iteration: int
    cost: float
    fidelity: float
    penalty: float
    psnr: float
    nonzero_fraction: float
    eta_z: float
    eta_f: float


@dataclass
class TrainReport:
    iterations: list
    filters: FilterBank
    maps: list  # one FeatureMaps per dataset image
    gamma_used: float = None
    seed: int = 0
    peak: float = 255.0

    @property
    def final(self):
        return self.iterations[-1]


def _filters_array(filters):
    return filters.data if isinstance(filters, FilterBank) else np.asarray(
        filters, dtype=np.float64
    )


def _maps_array(maps):
    return maps.data if isinstance(maps, FeatureMaps) else np.asarray(
        maps, dtype=np.float64
    )


def _normalize_filters(filters):
    norms = np.sqrt(np.sum(filters**2, axis=(1, 2)))
    if np.any(norms == 0.0):
        raise FilterDegenerateError(int(np.argmin(norms)))
    return filters / norms[:, None, None]


def total_cost(y, filters, maps, penalty):
    """Regularized cost split into (total, fidelity, penalty value)."""
    y = as_grid(y, "y")
    filters = _filters_array(filters)
    maps = _maps_array(maps)
    residual = y - forward(filters, maps)
    if residual.shape != y.shape:
        raise ShapeError("reconstruction does not match image shape")
    fidelity = float(np.sum(residual * residual))
    penalty_value = penalty.value(maps)
    return fidelity + penalty_value, fidelity, penalty_value


def _dataset_cost(ys, filters, maps_list, penalty):
    estimates = [forward(filters, m) for m in maps_list]
    fidelity = sum(float(np.sum((y - e) ** 2)) for y, e in zip(ys, estimates))
    penalty_value = sum(penalty.value(m) for m in maps_list)
    return fidelity + penalty_value, fidelity, penalty_value, estimates


def _z_step_arrays(ys, filters, maps_list, penalty, eta_z, iterations):
    cost, _, _, estimates = _dataset_cost(ys, filters, maps_list, penalty)
    trace = []
    for _ in range(iterations):
        effective = penalty.with_step(eta_z)
        candidates = []
        for y, maps, estimate in zip(ys, maps_list, estimates):
            gradient = -2.0 * corr_valid_bank(y - estimate, filters)
            candidates.append(effective.prox(maps - eta_z * gradient))
        new_cost, _, _, new_estimates = _dataset_cost(ys, filters, candidates, penalty)
        if not np.isfinite(new_cost):
            raise NumericDivergenceError(
                f"non-finite cost {new_cost} in z-step", trace
            )
        if new_cost > cost:
            eta_z *= 0.5
        else:
            maps_list, estimates, cost = candidates, new_estimates, new_cost
        trace.append(cost)
    return maps_list, eta_z, trace


def _f_step_arrays(ys, filters, maps_list, eta_f, iterations, penalty=None):
    penalty_value = (
        sum(penalty.value(m) for m in maps_list) if penalty is not None else 0.0
    )
    estimates = [forward(filters, m) for m in maps_list]
    fidelity = sum(float(np.sum((y - e) ** 2)) for y, e in zip(ys, estimates))
    cost = fidelity + penalty_value
    trace = []
    for _ in range(iterations):
        gradient = np.zeros_like(filters)
        for y, maps, estimate in zip(ys, maps_list, estimates):
            gradient += -2.0 * corr_valid_bank(y - estimate, maps)
        candidate = _normalize_filters(filters - eta_f * gradient)
        new_estimates = [forward(candidate, m) for m in maps_list]
        new_fidelity = sum(
            float(np.sum((y - e) ** 2)) for y, e in zip(ys, new_estimates)
        )
        new_cost = new_fidelity + penalty_value
        if not np.isfinite(new_cost):
            raise NumericDivergenceError(
                f"non-finite cost {new_cost} in f-step", trace
            )
        if new_cost > cost:
            eta_f *= 0.5
        else:
            filters, estimates, cost = candidate, new_estimates, new_cost
        trace.append(cost)
    return filters, eta_f, trace


def z_step(y, filters, maps, penalty, eta_z, iterations):
    """Feature-map update: gradient step, prox, commit-or-halve.

    For the Cauchy penalty the prox weight of each inner iteration is
    eta_z*lam; the soft/hard thresholds are applied as configured (their
    tuned lam already absorbs the learning rate).
    """
    y = as_grid(y, "y")
    maps_list, eta_z, trace = _z_step_arrays(
        [y], _filters_array(filters), [_maps_array(maps)], penalty, eta_z, iterations
    )
    return FeatureMaps(maps_list[0]), eta_z, trace


def f_step(y, filters, maps, eta_f, iterations, penalty=None):
    """Filter update: gradient step, unit-norm projection, commit-or-halve.

    The penalty term is constant while the maps are frozen, so commit
    decisions are identical with or without ``penalty``; passing it only
    offsets the returned cost trace to the full regularized cost.
    """
    y = as_grid(y, "y")
    filters_arr, eta_f, trace = _f_step_arrays(
        [y], _filters_array(filters), [_maps_array(maps)], eta_f, iterations, penalty
    )
    return FilterBank(filters_arr), eta_f, trace


def _resolve_penalty(config, ys):
    penalty = config.penalty
    if penalty is None:
        pooled = np.concatenate([y.ravel() for y in ys])
        penalty = CauchyPenalty(estimate_gamma(pooled).gamma, config.lam)
    if isinstance(penalty, CauchyPenalty):
        bound = 8.0 * penalty.gamma**2
        eta_z = bound if config.eta_z is None else config.eta_z
        if eta_z > bound:
            raise ConvergenceConditionError(
                f"eta_z={eta_z} exceeds 8*gamma**2={bound} for estimated gamma"
            )
        gamma_used = penalty.gamma
    else:
        eta_z = DEFAULT_BASELINE_ETA if config.eta_z is None else config.eta_z
        gamma_used = None
    eta_f = DEFAULT_BASELINE_ETA if config.eta_f is None else config.eta_f
    return penalty, gamma_used, eta_z, eta_f


def train(dataset, config, peak=255.0):
    """Learn shared filters and per-image feature maps from ``dataset``.

    Feature maps start at zero and filters at seeded random unit vectors.
    Every outer iteration runs the z-step then the f-step; per-iteration
    metrics are averaged over the dataset. Deterministic for a fixed seed
    in single-threaded use.
    """
    ys = [as_grid(y, f"dataset[{i}]") for i, y in enumerate(dataset)]
    if not ys:
        raise ValueError("dataset must contain at least one image")
    if any(y.shape != ys[0].shape for y in ys):
        raise ValueError("all dataset images must share one shape")

    penalty, gamma_used, eta_z, eta_f = _resolve_penalty(config, ys)
    q_shape = map_shape(ys[0].shape, config.filter_shape)
    rng = np.random.default_rng(config.seed)
    filters = FilterBank.random(config.k, config.filter_shape, rng).data
    maps_list = [np.zeros((config.k,) + q_shape) for _ in ys]

    stats = []
    for iteration in range(config.max_outer_iterations):
        maps_list, eta_z, _ = _z_step_arrays(
            ys, filters, maps_list, penalty, eta_z, config.z_inner_iterations
        )
        filters, eta_f, _ = _f_step_arrays(
            ys, filters, maps_list, eta_f, config.f_inner_iterations, penalty
        )
        cost, fidelity, penalty_value, estimates = _dataset_cost(
            ys, filters, maps_list, penalty
        )
        mean_psnr = float(
            np.mean([psnr(y, e, peak) for y, e in zip(ys, estimates)])
        )
        nonzero, _ = sparsity_fractions(np.concatenate([m.ravel() for m in maps_list]))
        stats.append(
            IterationStats(
                iteration=iteration,
                cost=cost,
                fidelity=fidelity,
                penalty=penalty_value,
                psnr=mean_psnr,
                nonzero_fraction=nonzero,
                eta_z=eta_z,
                eta_f=eta_f,
            )
        )

    return TrainReport(
        iterations=stats,
        filters=FilterBank(filters),
        maps=[FeatureMaps(m) for m in maps_list],
        gamma_used=gamma_used,
        seed=config.seed,
        peak=peak,
    )


def encode(y, filters, config):
    """Sparse-code ``y`` against frozen unit-norm filters.

    Runs max_outer_iterations * z_inner_iterations prox-gradient inner
    iterations from zero-initialized maps and returns them.
    """
    y = as_grid(y, "y")
    filters_arr = _filters_array(filters)
    penalty, _, eta_z, _ = _resolve_penalty(config, [y])
    q_shape = map_shape(y.shape, filters_arr.shape[1:])
    maps0 = np.zeros((filters_arr.shape[0],) + q_shape)
    iterations = config.max_outer_iterations * config.z_inner_iterations
    maps_list, _, _ = _z_step_arrays(
        [y], filters_arr, [maps0], penalty, eta_z, iterations
    )
    return FeatureMaps(maps_list[0])


def reconstruct(filters, maps):
    """Image synthesized from a filter bank and its feature maps."""
    return forward(_filters_array(filters), _maps_array(maps))
