"""Independent reference implementations used to derive expected values.

Everything here is deliberately naive: quadruple loops for convolution,
grid-plus-ternary search for proximal operators, fsum-based summation for
likelihoods. Production code must agree with these, never the reverse.
"""

import math

import numpy as np


def naive_conv_full(a, b):
    """Zero-padded full convolution by explicit summation."""
    ah, aw = a.shape
    bh, bw = b.shape
    out = np.zeros((ah + bh - 1, aw + bw - 1))
    for i in range(ah):
        for j in range(aw):
            for u in range(bh):
                for v in range(bw):
                    out[i + u, j + v] += a[i, j] * b[u, v]
    return out


def naive_corr_valid(a, b):
    """Cross-correlation at fully-overlapping offsets by explicit summation."""
    ah, aw = a.shape
    bh, bw = b.shape
    out = np.zeros((ah - bh + 1, aw - bw + 1))
    for i in range(out.shape[0]):
        for j in range(out.shape[1]):
            acc = 0.0
            for u in range(bh):
                for v in range(bw):
                    acc += a[i + u, j + v] * b[u, v]
            out[i, j] = acc
    return out


def naive_forward(filters, maps):
    total = None
    for f, z in zip(filters, maps):
        term = naive_conv_full(f, z)
        total = term if total is None else total + term
    return total


def cauchy_prox_objective(z, x, gamma, lam):
    """(z - x)^2 + lam * (-log(gamma / (pi * (gamma^2 + z^2))))."""
    return (z - x) ** 2 + lam * np.log(np.pi * (gamma**2 + z * z) / gamma)


def prox_oracle(x, gamma, lam, coarse=2001, refine=200):
    """Grid search over [min(0,x), max(0,x)] refined by ternary search.

    Vectorized over same-length 1-D inputs. The bracket one grid step around
    the coarse argmin contains the minimizer, and the objective is unimodal
    on that bracket, so ternary search converges to it.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    gamma = np.broadcast_to(np.asarray(gamma, dtype=np.float64), x.shape).copy()
    lam = np.broadcast_to(np.asarray(lam, dtype=np.float64), x.shape).copy()
    lo = np.minimum(0.0, x)
    hi = np.maximum(0.0, x)

    a = np.empty_like(x)
    b = np.empty_like(x)
    ticks = np.linspace(0.0, 1.0, coarse)
    for start in range(0, x.size, 1024):
        sl = slice(start, min(start + 1024, x.size))
        grid = lo[sl, None] + (hi[sl] - lo[sl])[:, None] * ticks
        obj = cauchy_prox_objective(grid, x[sl, None], gamma[sl, None], lam[sl, None])
        idx = np.argmin(obj, axis=1)
        step = (hi[sl] - lo[sl]) / (coarse - 1)
        rows = np.arange(grid.shape[0])
        a[sl] = np.maximum(lo[sl], grid[rows, idx] - step)
        b[sl] = np.minimum(hi[sl], grid[rows, idx] + step)

    for _ in range(refine):
        m1 = a + (b - a) / 3.0
        m2 = b - (b - a) / 3.0
        left = cauchy_prox_objective(m1, x, gamma, lam) <= cauchy_prox_objective(
            m2, x, gamma, lam
        )
        b = np.where(left, m2, b)
        a = np.where(left, a, m1)
    return 0.5 * (a + b)


def prox_oracle_dense(x, gamma, lam, lo=-6.0, hi=6.0, step=1e-6):
    """Literal dense-grid minimization; slow, used for single spot values."""
    best_z, best_v = 0.0, math.inf
    edges = np.arange(lo, hi + step, step)
    for start in range(0, edges.size, 1_000_000):
        z = edges[start : start + 1_000_000]
        v = cauchy_prox_objective(z, x, gamma, lam)
        i = int(np.argmin(v))
        if v[i] < best_v:
            best_v, best_z = float(v[i]), float(z[i])
    return best_z


def cubic_residual_scaled(z, x, gamma, lam):
    """|z^3 - x z^2 + (gamma^2+lam) z - gamma^2 x| / (1 + |x|^3)."""
    residual = np.abs(
        z**3 - x * z * z + (gamma**2 + lam) * z - gamma**2 * x
    )
    return residual / (1.0 + np.abs(x) ** 3)


def two_pass_mse(a, b):
    """MSE via per-element Python accumulation with fsum."""
    diffs = [
        (float(a[i, j]) - float(b[i, j])) ** 2
        for i in range(a.shape[0])
        for j in range(a.shape[1])
    ]
    return math.fsum(diffs) / len(diffs)


def naive_histogram(values, bins, lo, hi):
    """Counting loop with floor indexing and edge clamping."""
    counts = [0] * bins
    width = (hi - lo) / bins
    for v in values:
        idx = int(math.floor((v - lo) / width))
        idx = min(max(idx, 0), bins - 1)
        counts[idx] += 1
    centers = [lo + (i + 0.5) * width for i in range(bins)]
    return list(zip(centers, counts))


def cauchy_nll(gamma, samples, epsilon=1e-12):
    """-sum log(pdf + eps) by fsum, the estimation objective."""
    terms = [
        -math.log(gamma / (math.pi * (gamma * gamma + float(x) * float(x))) + epsilon)
        for x in samples
    ]
    return math.fsum(terms)


def cauchy_draws(rng, gamma, count):
    """Standard inverse-CDF sampling: gamma * tan(pi * (u - 1/2))."""
    u = rng.uniform(0.0, 1.0, size=count)
    return gamma * np.tan(np.pi * (u - 0.5))
