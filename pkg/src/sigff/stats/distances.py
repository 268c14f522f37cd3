"""Distances between empirical laws."""

from __future__ import annotations

import numpy as np

from ..errors import DomainError

__all__ = ["distance", "kolmogorov", "levy_prokhorov_1d", "dominance_distance"]


def _as1d(s):
    x = np.asarray(s, dtype=float).ravel()
    if x.size == 0:
        raise DomainError("empty sample")
    return np.sort(x)


def kolmogorov(s1, s2) -> float:
    """sup_x |F1(x) - F2(x)| for the two empirical distribution functions."""
    a, b = _as1d(s1), _as1d(s2)
    pts = np.concatenate([a, b])
    f1 = np.searchsorted(a, pts, side="right") / len(a)
    f2 = np.searchsorted(b, pts, side="right") / len(b)
    return float(np.max(np.abs(f1 - f2)))


def _matched_mass(a, b, delta):
    """Largest coupling mass between sorted equal-weight samples with |x - y| <= delta."""
    wa = np.full(len(a), 1.0 / len(a))
    wb = np.full(len(b), 1.0 / len(b))
    j = 0
    total = 0.0
    for i in range(len(a)):
        while j < len(b) and b[j] < a[i] - delta:
            j += 1
        while wa[i] > 1e-15 and j < len(b) and b[j] <= a[i] + delta:
            m = min(wa[i], wb[j])
            wa[i] -= m
            wb[j] -= m
            total += m
            if wb[j] <= 1e-15:
                j += 1
    return total


def levy_prokhorov_1d(s1, s2, tol: float = 1e-10) -> float:
    """Levy-Prokhorov distance of two 1D empirical laws.

    Uses the coupling characterization: the distance is at most ``delta``
    exactly when some coupling puts mass at most ``delta`` on
    ``|X - Y| > delta``.  The maximal matchable mass is found greedily on the
    sorted samples, and ``delta`` by bisection on ``[0, 1]``.
    """
    a, b = _as1d(s1), _as1d(s2)

    def ok(d):
        return 1.0 - _matched_mass(a, b, d) <= d + 1e-12

    if ok(0.0):
        return 0.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _orthant_mass(x, grid, chunk=2048):
    # fraction of rows of x strictly above each grid point in every coordinate
    out = np.empty(len(grid))
    for s in range(0, len(grid), chunk):
        g = grid[s : s + chunk]
        out[s : s + chunk] = (x[None, :, :] > g[:, None, :]).all(axis=2).mean(axis=1)
    return out


def dominance_distance(s1, s2, tol: float = 1e-6, max_grid: int = 5_000) -> float:
    """Smallest delta with mu1(X > x) <= mu2(Y > x - delta) + delta on the grid.

    ``X > x`` is the open upper orthant.  NaN entries stand for minus
    infinity.  The grid is the product of the pooled per-coordinate sample
    values, thinned to quantiles when it would exceed ``max_grid`` points.
    A value of 0 means the second law dominates the first on the grid.
    """
    x = np.asarray(s1, dtype=float)
    y = np.asarray(s2, dtype=float)
    x = x[:, None] if x.ndim == 1 else x
    y = y[:, None] if y.ndim == 1 else y
    if len(x) == 0 or len(y) == 0:
        raise DomainError("empty sample")
    if x.shape[1] != y.shape[1]:
        raise DomainError(f"dimension mismatch {x.shape[1]} vs {y.shape[1]}")
    x = np.where(np.isnan(x), -np.inf, x)
    y = np.where(np.isnan(y), -np.inf, y)
    p = x.shape[1]
    per = max(2, int(max_grid ** (1.0 / p)))
    axes = []
    for k in range(p):
        vals = np.unique(np.concatenate([x[:, k], y[:, k]]))
        vals = vals[np.isfinite(vals)]
        if len(vals) > per:
            vals = np.quantile(vals, np.linspace(0, 1, per))
        axes.append(np.concatenate([[-np.inf], vals]))
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, p)
    lhs = _orthant_mass(x, grid)

    def ok(d):
        return bool(np.all(lhs <= _orthant_mass(y, grid - d) + d + 1e-12))

    if ok(0.0):
        return 0.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


_KINDS = {
    "kolmogorov": kolmogorov,
    "levy_prokhorov_1d": levy_prokhorov_1d,
    "dominance": dominance_distance,
}


def distance(s1, s2, kind: str = "kolmogorov") -> float:
    try:
        fn = _KINDS[kind]
    except KeyError:
        raise DomainError(f"unknown distance {kind!r}; choose from {sorted(_KINDS)}") from None
    return fn(s1, s2)
