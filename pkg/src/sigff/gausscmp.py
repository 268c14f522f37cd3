"""Numerical checks of Gaussian comparison inequalities on small instances.

For centred Gaussian vectors with equal variances, raising the covariances
raises the probability that every coordinate of a group stays below its
threshold, and raises ``E f`` for test functions whose mixed second
derivatives are nonnegative where the covariances differ.  Expectations are
computed with scrambled Sobol points, the same points for both vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm, qmc

from .errors import DomainError, PreconditionError
from .sampler import RngStream, factorize

__all__ = [
    "ComparisonInstance",
    "ComparisonReport",
    "check_vector_slepian",
    "check_kahane_functional",
    "sigmoid_product",
    "random_instance",
    "MAX_DIM",
]

MAX_DIM = 4
DIAG_TOL = 1e-12


@dataclass(frozen=True)
class ComparisonInstance:
    """Two covariance matrices on the same index set, disjoint groups and thresholds."""

    cov_x: np.ndarray
    cov_y: np.ndarray
    sets: tuple
    x: np.ndarray

    def __post_init__(self):
        cx = np.asarray(self.cov_x, dtype=float)
        cy = np.asarray(self.cov_y, dtype=float)
        object.__setattr__(self, "cov_x", cx)
        object.__setattr__(self, "cov_y", cy)
        object.__setattr__(self, "sets", tuple(tuple(int(i) for i in T) for T in self.sets))
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float).ravel())
        n = cx.shape[0]
        if cx.shape != (n, n) or cy.shape != (n, n):
            raise DomainError(f"covariances must both be square of the same size, got {cx.shape} and {cy.shape}")
        if n > MAX_DIM:
            raise DomainError(f"dimension {n} exceeds the cap {MAX_DIM}")
        seen: set = set()
        for T in self.sets:
            for i in T:
                if not 0 <= i < n:
                    raise DomainError(f"index {i} outside [0, {n})")
                if i in seen:
                    raise DomainError(f"index {i} appears in two groups")
                seen.add(i)
        if len(self.x) != len(self.sets):
            raise DomainError(f"{len(self.sets)} groups but {len(self.x)} thresholds")

    @property
    def dim(self) -> int:
        return self.cov_x.shape[0]

    def orientation(self) -> bool:
        """True when cov_y dominates cov_x entrywise, False for the reverse.

        Raises :class:`PreconditionError` on unequal variances or mixed
        ordering, naming the first offending entry.
        """
        d = self.cov_y - self.cov_x
        for i in range(self.dim):
            if abs(d[i, i]) > DIAG_TOL:
                raise PreconditionError(
                    f"variances differ at index {i}: {self.cov_x[i, i]:.6g} vs {self.cov_y[i, i]:.6g}"
                )
        up = down = None
        for i in range(self.dim):
            for j in range(i + 1, self.dim):
                if d[i, j] > DIAG_TOL and up is None:
                    up = (i, j)
                if d[i, j] < -DIAG_TOL and down is None:
                    down = (i, j)
        if up is not None and down is not None:
            raise PreconditionError(
                f"covariances are not ordered: entry {up} increases from X to Y but entry {down} decreases"
            )
        return down is None


@dataclass(frozen=True)
class ComparisonReport:
    """``lhs`` belongs to the less correlated vector, ``rhs`` to the more correlated one."""

    lhs: np.ndarray
    rhs: np.ndarray
    se_lhs: np.ndarray
    se_rhs: np.ndarray
    y_dominates: bool
    points: int

    @property
    def combined_se(self) -> np.ndarray:
        return np.sqrt(self.se_lhs**2 + self.se_rhs**2)

    @property
    def passed(self) -> bool:
        return bool(np.all(self.lhs <= self.rhs + 3.0 * self.combined_se))

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"


def _normals(dim, stream: RngStream, budget, randomizations):
    per = max(budget // randomizations, 2)
    m = int(math.ceil(math.log2(per)))
    out = []
    for k in range(randomizations):
        seed = int(stream.child("qmc", k).integers(0, 2**63 - 1))
        u = qmc.Sobol(d=dim, scramble=True, seed=seed).random_base2(m)
        out.append(norm.ppf(u))
    return np.stack(out)


def _mean_columns(vals):
    vals = np.asarray(vals, dtype=float)
    return (vals[:, None] if vals.ndim == 1 else vals).mean(axis=0)


def _expectations(inst: ComparisonInstance, f, stream, budget, randomizations):
    z = _normals(inst.dim, stream, budget, randomizations)
    fx = factorize(inst.cov_x)[0]
    fy = factorize(inst.cov_y)[0]
    ex = np.stack([_mean_columns(f(zk @ fx.T)) for zk in z])
    ey = np.stack([_mean_columns(f(zk @ fy.T)) for zk in z])
    r = randomizations
    return ex.mean(0), ey.mean(0), ex.std(0, ddof=1) / math.sqrt(r), ey.std(0, ddof=1) / math.sqrt(r), z.shape[1] * r


def _report(inst, f, stream, budget, randomizations):
    y_up = inst.orientation()
    mx, my, sx, sy, pts = _expectations(inst, f, stream, budget, randomizations)
    if y_up:
        return ComparisonReport(mx, my, sx, sy, True, pts)
    return ComparisonReport(my, mx, sy, sx, False, pts)


def _orthant(inst: ComparisonInstance):
    def f(v):
        ok = np.ones(len(v), dtype=bool)
        for T, xt in zip(inst.sets, inst.x):
            if T:
                ok &= v[:, list(T)].max(axis=1) <= xt
        return ok.astype(float)

    return f


def check_vector_slepian(
    inst: ComparisonInstance, stream: RngStream, budget: int = 1 << 16, randomizations: int = 16
) -> ComparisonReport:
    """Compare P(max over each group <= its threshold) for the two vectors."""
    return _report(inst, _orthant(inst), stream, budget, randomizations)


def check_kahane_functional(
    inst: ComparisonInstance, f, stream: RngStream, budget: int = 1 << 16, randomizations: int = 16
) -> ComparisonReport:
    """Compare ``E f`` componentwise; ``f`` maps ``(m, n)`` points to ``(m,)`` or ``(m, k)``.

    ``f`` must have nonnegative mixed partials in every pair whose
    covariance differs; :func:`sigmoid_product` builds such functions.
    """
    return _report(inst, f, stream, budget, randomizations)


def sigmoid_product(sets, x, sharpness: float = 8.0, joint: bool = False):
    """Products of decreasing logistic functions, one component per group.

    Component ``k`` is ``prod_{i in sets[k]} s(sharpness (x_k - v_i))`` with
    ``s`` the logistic function; as ``sharpness`` grows it tends to the
    indicator that the group stays below ``x_k``.  ``joint=True`` multiplies
    all components into one.
    """
    sets = [list(T) for T in sets]
    x = np.asarray(x, dtype=float)

    def f(v):
        comps = []
        for T, xt in zip(sets, x):
            g = 0.5 * (1.0 + np.tanh(0.5 * sharpness * (xt - v[:, T])))
            comps.append(g.prod(axis=1))
        out = np.stack(comps, axis=1)
        return out.prod(axis=1) if joint else out

    return f


def _random_correlation(rng, n):
    A = rng.normal(size=(n, n + 1))
    C = A @ A.T
    d = np.sqrt(np.diag(C))
    return C / np.outer(d, d)


def random_instance(stream: RngStream, max_dim: int = 3) -> ComparisonInstance:
    """Random admissible pair: cov_y mixes cov_x with the fully correlated matrix.

    Both are rescaled by the same random variances, so the diagonals agree
    and every off-diagonal entry of cov_y is at least that of cov_x.
    """
    rng = stream.generator
    n = int(rng.integers(2, max_dim + 1))
    C = _random_correlation(rng, n)
    lam = rng.uniform(0.05, 0.95)
    Cy = (1 - lam) * C + lam * np.ones((n, n))
    s = rng.uniform(0.5, 2.0, size=n)
    cx = C * np.outer(s, s)
    cy = Cy * np.outer(s, s)
    np.fill_diagonal(cy, np.diag(cx))
    perm = rng.permutation(n)
    k = int(rng.integers(1, n + 1))
    cuts = np.sort(rng.choice(np.arange(1, n), size=k - 1, replace=False)) if k > 1 else []
    sets = tuple(tuple(int(i) for i in g) for g in np.split(perm, cuts))
    x = rng.normal(0.5, 1.0, size=k)
    return ComparisonInstance(cx, cy, sets, x)
