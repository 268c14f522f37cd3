"""Cluster shape profiles and count diagnostics for point processes."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, StatisticalError
from ..extremal import ClusteredSample
from ..fields.cluster import ClusterDraws
from ..lattice import Region

__all__ = ["ClusterProfile", "cluster_profile", "CountReport", "poisson_diagnostics"]

MIN_CLUSTERS = 100


@dataclass(frozen=True)
class ClusterProfile:
    """Per-offset mean gap and its log-distance regression."""

    offsets: np.ndarray
    mean: np.ndarray
    se: np.ndarray
    count: np.ndarray
    slope: float
    slope_se: float
    intercept: float

    def at(self, w) -> float:
        k = np.flatnonzero((self.offsets == np.asarray(w)).all(axis=1))
        if len(k) == 0:
            raise DomainError(f"offset {tuple(w)} is not in the window")
        return float(self.mean[k[0]])


def cluster_profile(draws, window: float | None = None, min_samples: int = MIN_CLUSTERS) -> ClusterProfile:
    """Mean gap per offset, then least squares of the mean against log |w|_2.

    The regression uses offsets with ``2 <= |w|_2 <= window`` (default: the
    largest l1 radius in the sample).  Accepts :class:`ClusterDraws`,
    :class:`ClusteredSample` (NaN gaps are skipped) or a list of the latter.
    """
    if isinstance(draws, ClusterDraws):
        offsets, theta = draws.offsets, draws.theta
    elif isinstance(draws, ClusteredSample):
        offsets, theta = draws.offsets, draws.theta
    else:
        parts = list(draws)
        if not parts:
            raise StatisticalError("no cluster samples")
        offsets = parts[0].offsets
        theta = np.concatenate([p.theta for p in parts])
    count = np.sum(~np.isnan(theta), axis=0)
    if len(theta) < min_samples or count.min() < min_samples:
        raise StatisticalError(f"only {int(count.min())} cluster samples at some offset, need {min_samples}")
    mean = np.nanmean(theta, axis=0)
    se = np.nanstd(theta, axis=0, ddof=1) / np.sqrt(count)
    se[0] = 0.0
    norms = np.hypot(offsets[:, 0], offsets[:, 1])
    top = np.abs(offsets).sum(axis=1).max() if window is None else window
    use = (norms >= 2.0) & (norms <= top)
    if use.sum() < 2:
        raise StatisticalError("fewer than two offsets in the regression range")
    X = np.log(norms[use])
    coef = np.polyfit(X, mean[use], 1)
    resid = mean[use] - np.polyval(coef, X)
    dof = max(use.sum() - 2, 1)
    s2 = float(resid @ resid) / dof
    slope_se = math.sqrt(s2 / np.sum((X - X.mean()) ** 2))
    return ClusterProfile(offsets, mean, se, count, float(coef[0]), slope_se, float(coef[1]))


@dataclass(frozen=True)
class CountReport:
    """Counts of atoms per region and height band across replicas."""

    labels: tuple
    counts: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    dispersion: np.ndarray
    dispersion_se: np.ndarray
    correlation: np.ndarray


def poisson_diagnostics(processes, regions, band) -> CountReport:
    """Region counts of atoms with height in ``[band[0], band[1])``.

    Regions must be disjoint; a region given by its open scaled rectangle
    matches atoms by position ``x = v / N``, one given by vertices matches
    the lattice point itself.  The index of dispersion is variance over mean;
    its standard error is the Poisson reference ``sqrt(2 / (R - 1))``.
    """
    for i, a in enumerate(regions):
        for b in regions[i + 1 :]:
            if not a.disjoint(b):
                raise DomainError(f"regions {a.label!r} and {b.label!r} overlap")
    lo, hi = band
    R = len(processes)
    counts = np.zeros((R, len(regions)), dtype=int)
    for k, pp in enumerate(processes):
        inband = (pp.heights >= lo) & (pp.heights < hi)
        if not inband.any():
            continue
        verts = pp.vertices[inband]
        for i, reg in enumerate(regions):
            counts[k, i] = int(_member(reg, verts, pp.N).sum())
    mean = counts.mean(axis=0)
    var = counts.var(axis=0, ddof=1) if R > 1 else np.zeros(len(regions))
    with np.errstate(invalid="ignore", divide="ignore"):
        disp = np.where(mean > 0, var / mean, np.nan)
        corr = np.corrcoef(counts.T) if len(regions) > 1 else np.ones((1, 1))
    corr = np.atleast_2d(corr)
    se = np.full(len(regions), math.sqrt(2.0 / (R - 1)) if R > 1 else np.nan)
    return CountReport(tuple(r.label for r in regions), counts, mean, var, disp, se, corr)


def _member(reg: Region, verts: np.ndarray, N: int) -> np.ndarray:
    if reg.vertices is not None:
        return np.array([tuple(v) in reg.vertices for v in verts.tolist()], dtype=bool)
    a1, b1, a2, b2 = reg.rect
    x = verts / N
    return (x[:, 0] > a1) & (x[:, 0] < b1) & (x[:, 1] > a2) & (x[:, 1] < b2)
