"""Frequencies of the geometric events around the maximum."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from ..errors import ConfigurationError, DomainError
from ..extremal import m_centering
from ..fields.dgff import FieldSample
from ..fields.inhomogeneous import InhomogeneousOperator, sample_inhomogeneous
from ..fields.local import binding_row
from .common import Proportion, wilson

__all__ = [
    "separation_frequency",
    "separation_hits",
    "localization_frequency",
    "localization_outcomes",
    "LevelSetReport",
    "level_set_first_moment",
    "level_set_bound_check",
]


def _batch(heights):
    h = heights.heights if isinstance(heights, FieldSample) else np.asarray(heights)
    return h[None] if h.ndim == 2 else h


def separation_hits(heights, r: int, c: float = 1.0, threshold: float | None = None) -> np.ndarray:
    """Per replica: do two vertices ``u, v`` with ``r <= |u - v|_2 <= N / r`` both
    reach ``m_N - c log log r`` (or ``threshold`` when given)?"""
    h = _batch(heights)
    N = h.shape[-1]
    if r < 2:
        raise DomainError(f"r must be >= 2, got {r}")
    if N / r < r:
        raise DomainError(f"N/r = {N / r:g} is below r = {r}")
    level = m_centering(N) - c * math.log(math.log(r)) if threshold is None else threshold
    lo2, hi2 = r * r, (N / r) ** 2
    out = np.zeros(len(h), dtype=bool)
    for k, field in enumerate(h):
        pts = np.argwhere(field >= level)
        if len(pts) < 2:
            continue
        d2 = pdist(pts, "sqeuclidean")
        out[k] = bool(np.any((d2 >= lo2) & (d2 <= hi2)))
    return out


def separation_frequency(heights, r: int, c: float = 1.0, threshold: float | None = None) -> Proportion:
    """Fraction of replicas with two high points at intermediate distance (see :func:`separation_hits`)."""
    hits = separation_hits(heights, r, c, threshold)
    return wilson(int(hits.sum()), len(hits))


def localization_outcomes(
    sample: FieldSample,
    op: InhomogeneousOperator,
    M: int,
    gamma: float,
    t: float,
    width: float | None = None,
) -> np.ndarray:
    """Per replica: -1 without a high vertex, 1 if the binding field misses its
    window at every high vertex, 0 otherwise.

    High vertices are those with ``psi_v >= m_N - t`` whose l1 ball of radius
    ``M`` fits in V_N.  At such ``v`` the binding field ``Phi_v`` should sit
    within ``log(M)**gamma`` of ``2 log N I(1 - log M / log N)``; ``width``
    overrides that half-width.
    """
    if sample.underlying is None:
        raise ConfigurationError("localization needs the underlying DGFF of each replica")
    if not 0.0 < gamma < 0.5:
        raise DomainError(f"gamma={gamma} outside (0, 1/2)")
    N = op.spec.N
    if 2 * M + 1 > N:
        raise DomainError(f"ball of radius {M} does not fit in V_{N}")
    centre = 2.0 * math.log(N) * op.profile.I(1.0 - math.log(M) / math.log(N))
    half = math.log(M) ** gamma if width is None else width
    psi = _batch(sample.heights)
    phi = _batch(sample.underlying).reshape(len(psi), -1)
    level = m_centering(N) - t
    inner = np.zeros((N, N), dtype=bool)
    inner[M : N - M, M : N - M] = True
    rows: dict = {}
    out = np.full(len(psi), -1, dtype=int)
    for k in range(len(psi)):
        high = np.argwhere((psi[k] >= level) & inner)
        if len(high) == 0:
            continue
        out[k] = 1
        for v in map(tuple, high.tolist()):
            if v not in rows:
                rows[v] = binding_row(op, v, M)
            if abs(rows[v] @ phi[k] - centre) <= half:
                out[k] = 0
                break
    return out


def localization_frequency(
    sample: FieldSample,
    op: InhomogeneousOperator,
    M: int,
    gamma: float,
    t: float,
    width: float | None = None,
) -> Proportion:
    """Fraction of replicas with a high vertex whose binding field misses its
    window at every high vertex; replicas without a high vertex are left out."""
    res = localization_outcomes(sample, op, M, gamma, t, width)
    return wilson(int((res == 1).sum()), int((res >= 0).sum()))


@dataclass(frozen=True)
class LevelSetReport:
    """Empirical tail of the level-set size against the first-moment bound."""

    N: int
    y: float
    kappa_z: float
    max_var: float
    first_moment: float
    bound: float
    empirical: float
    se: float
    reference: float
    replicas: int

    @property
    def passed(self) -> bool:
        return self.empirical <= self.bound + 3.0 * self.se

    @property
    def implied_constant(self) -> float:
        """Ratio of the probability bound to ``exp(2y - kappa z)``."""
        return self.bound / self.reference


def level_set_first_moment(N: int, max_var: float, y: float) -> float:
    """Gaussian-tail bound on the expected number of vertices above ``m_N - y``."""
    u = m_centering(N) - y
    if u <= 0:
        raise DomainError(f"level m_N - y = {u:g} must be positive")
    return N * N * math.sqrt(max_var) / (u * math.sqrt(2 * math.pi)) * math.exp(-u * u / (2 * max_var))


def level_set_bound_check(
    op: InhomogeneousOperator,
    y: float,
    kappa: float,
    z: float,
    replicas: int,
    stream,
    batch: int = 500,
) -> LevelSetReport:
    """Compare P(|level set| > e^{kappa z}) with the first-moment bound.

    Markov's inequality turns the expected count into the probability bound
    ``min(1, E|set| e^{-kappa z})``.  ``max_var`` is the exact largest
    variance of the field.
    """
    if z <= 1:
        raise DomainError(f"z={z} must exceed 1")
    N = op.spec.N
    max_var = float(op.variances.max())
    first = level_set_first_moment(N, max_var, y)
    cut = math.exp(kappa * z)
    level = m_centering(N) - y
    hits = 0
    done = 0
    while done < replicas:
        k = min(batch, replicas - done)
        fs = sample_inhomogeneous(op.spec, op.profile, stream.child("batch", done), size=k, operator=op)
        hits += int(np.sum((fs.heights >= level).sum(axis=(1, 2)) > cut))
        done += k
    p = hits / replicas
    return LevelSetReport(
        N,
        y,
        kappa * z,
        max_var,
        first,
        min(1.0, first / cut),
        p,
        math.sqrt(p * (1 - p) / replicas),
        math.exp(2 * y - kappa * z),
        replicas,
    )
