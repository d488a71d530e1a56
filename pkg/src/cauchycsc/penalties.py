"""Sparsity penalties and their proximal (thresholding) operators.

Three penalties are supported: the Cauchy negative log-prior solved in
closed form via Cardano's method, plus the classic soft (l1) and hard (l0)
thresholding baselines. All operators act elementwise and accept scalars
or arrays.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConvergenceConditionError

__all__ = [
    "CauchyPenalty",
    "SoftPenalty",
    "HardPenalty",
    "cauchy_pdf",
    "cauchy_penalty",
    "prox_cauchy",
    "prox_soft",
    "prox_hard",
    "apply_prox",
    "prox_curve",
]

# relative slack for clamping a cancellation-negative discriminant to zero
# at the convex/non-convex boundary lam == 8*gamma**2
_DISC_GUARD = 1e-14


def cauchy_pdf(x, gamma, delta=0.0):
    """Cauchy density gamma / (pi * (gamma**2 + (x - delta)**2))."""
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    x = np.asarray(x, dtype=np.float64)
    out = gamma / (np.pi * (gamma**2 + (x - delta) ** 2))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CauchyPenalty:
    """Cauchy negative log-prior with scale ``gamma`` and weight ``lam``.

    The plain constructor is unchecked: it accepts any positive gamma and
    non-negative lam and records whether the step-size bound
    lam <= 8*gamma**2 holds via :attr:`convergence_safe`. Use
    :meth:`checked` to reject violating parameters outright.
    """

    gamma: float
    lam: float = 1.0

    name = "cauchy"

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.lam < 0:
            raise ValueError(f"lam must be non-negative, got {self.lam}")

    @classmethod
    def checked(cls, gamma, lam=1.0):
        params = cls(gamma, lam)
        if not params.convergence_safe:
            raise ConvergenceConditionError(
                f"lam={lam} exceeds 8*gamma**2={8 * gamma**2}"
            )
        return params

    @property
    def convergence_safe(self):
        return self.lam <= 8.0 * self.gamma**2

    def with_step(self, eta):
        """The prox weight for one proximal step of rate ``eta`` is eta*lam."""
        return replace(self, lam=eta * self.lam)

    def prox(self, x):
        return prox_cauchy(x, self)

    def value(self, z):
        """Penalty term summed over all entries of ``z``."""
        return float(np.sum(cauchy_penalty(z, self)))


@dataclass(frozen=True)
class SoftPenalty:
    """l1 penalty lam*|z|, solved by soft thresholding at lam/2."""

    lam: float

    name = "soft"

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lam must be non-negative, got {self.lam}")

    def with_step(self, eta):
        # the tuned lam already incorporates the learning rate
        return self

    def prox(self, x):
        return prox_soft(x, self.lam)

    def value(self, z):
        return float(self.lam * np.sum(np.abs(z)))


@dataclass(frozen=True)
class HardPenalty:
    """l0 penalty lam*[z != 0], solved by hard thresholding at lam."""

    lam: float

    name = "hard"

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lam must be non-negative, got {self.lam}")

    def with_step(self, eta):
        return self

    def prox(self, x):
        return prox_hard(x, self.lam)

    def value(self, z):
        return float(self.lam * np.count_nonzero(z))


Penalty = CauchyPenalty | SoftPenalty | HardPenalty


def cauchy_penalty(z, params):
    """-lam * log(gamma / (pi * (gamma**2 + z**2))), elementwise."""
    z = np.asarray(z, dtype=np.float64)
    out = params.lam * np.log(np.pi * (params.gamma**2 + z * z) / params.gamma)
    return float(out) if out.ndim == 0 else out


def _prox_objective(z, x, params):
    return (z - x) ** 2 + params.lam * np.log(
        np.pi * (params.gamma**2 + z * z) / params.gamma
    )


def _best_of_three_roots(x, p, q, params):
    """Trigonometric roots of the depressed cubic, objective-minimizing pick.

    Used where the discriminant is negative (three real stationary points,
    possible only outside the convergence condition or from cancellation at
    its boundary).
    """
    m = 2.0 * np.sqrt(-p / 3.0)
    arg = np.clip(3.0 * q / (p * m), -1.0, 1.0)
    theta = np.arccos(arg) / 3.0
    offsets = np.array([0.0, 2.0 * np.pi / 3.0, 4.0 * np.pi / 3.0])
    roots = x / 3.0 + m * np.cos(theta - offsets[:, None])
    objectives = _prox_objective(roots, x, params)
    return roots[np.argmin(objectives, axis=0), np.arange(x.size)]


def prox_cauchy(x, params):
    """Proximal operator of the Cauchy penalty, via Cardano's closed form.

    Returns the real root z of z**3 - x*z**2 + (gamma**2 + lam)*z
    - gamma**2*x = 0 that minimizes (z - x)**2 + lam*phi(z). Under
    lam <= 8*gamma**2 the objective is convex, the root is unique and the
    Cardano formula applies directly; otherwise the three candidate roots
    are compared on the objective.
    """
    x_in = x
    x = np.asarray(x, dtype=np.float64)
    scalar = x.ndim == 0
    x = np.atleast_1d(x).astype(np.float64)
    g2 = params.gamma**2
    lam = params.lam

    p = lam + g2 - x * x / 3.0
    q = -(2.0 / 27.0) * x**3 + (lam - 2.0 * g2) * x / 3.0
    disc = 0.25 * q * q + p**3 / 27.0
    guard = _DISC_GUARD * np.maximum(1.0, np.maximum(q * q, np.abs(p) ** 3))
    disc = np.where((disc < 0.0) & (disc >= -guard), 0.0, disc)

    z = np.empty_like(x)
    cardano = disc >= 0.0
    if np.any(cardano):
        sq = np.sqrt(disc[cardano])
        half_q = 0.5 * q[cardano]
        t = np.cbrt(-half_q + sq) + np.cbrt(-half_q - sq)
        z[cardano] = x[cardano] / 3.0 + t
    multi = ~cardano
    if np.any(multi):
        flat = multi.ravel()
        z.ravel()[flat] = _best_of_three_roots(
            x.ravel()[flat], p.ravel()[flat], q.ravel()[flat], params
        )

    # the exact minimizer lies between 0 and x; clip off rounding overshoot
    z = np.clip(z, np.minimum(0.0, x), np.maximum(0.0, x))
    if scalar:
        return float(z[0])
    return z.reshape(np.shape(x_in))


def prox_soft(x, lam):
    """Soft thresholding: shift by lam/2 toward zero, zero inside the band."""
    if lam < 0:
        raise ValueError(f"lam must be non-negative, got {lam}")
    x = np.asarray(x, dtype=np.float64)
    half = 0.5 * lam
    out = np.where(x > half, x - half, np.where(x < -half, x + half, 0.0))
    return float(out) if out.ndim == 0 else out


def prox_hard(x, lam):
    """Hard thresholding: keep |x| > lam, zero out |x| <= lam."""
    if lam < 0:
        raise ValueError(f"lam must be non-negative, got {lam}")
    x = np.asarray(x, dtype=np.float64)
    out = np.where(np.abs(x) > lam, x, 0.0)
    return float(out) if out.ndim == 0 else out


def apply_prox(values, kind):
    """Apply ``kind``'s prox independently to every entry of a grid."""
    values = np.asarray(values, dtype=np.float64)
    return kind.prox(values)


def prox_curve(kind, x_min, x_max, steps):
    """Uniformly sampled (x, prox(x)) pairs for plotting the threshold curve."""
    if not x_min < x_max:
        raise ValueError(f"need x_min < x_max, got [{x_min}, {x_max}]")
    if steps < 2:
        raise ValueError(f"need at least 2 steps, got {steps}")
    xs = np.linspace(x_min, x_max, steps)
    ys = kind.prox(xs)
    return [(float(a), float(b)) for a, b in zip(xs, ys)]
