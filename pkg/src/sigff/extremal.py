"""Centering sequences, local maxima and extremal point processes."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DomainError
from .fields.profile import VarianceProfile
from .lattice import GridSpec, Region, l1_offsets

__all__ = [
    "m_centering",
    "m_kt",
    "local_max_mask",
    "local_maxima",
    "PointProcessSample",
    "ClusteredSample",
    "extremal_process",
    "full_process",
    "superpose",
    "level_set",
    "level_set_mask",
    "joint_region_maxima",
    "pairing",
]


def m_centering(N: float) -> float:
    """2 log N - (1/4) log log N."""
    if N <= 2:
        raise DomainError(f"centering needs N >= 3, got {N}")
    return 2.0 * math.log(N) - 0.25 * math.log(math.log(N))


def m_kt(N: int, k: float, t: float, profile: VarianceProfile, lbar: float = 0.0) -> float:
    """Centering between dyadic levels k <= t <= n = log2 N."""
    n = math.log2(N)
    if not 0.0 <= k <= t <= n:
        raise DomainError(f"need 0 <= k <= t <= n = {n}, got k={k}, t={t}")
    if not 0.0 <= lbar < n:
        raise DomainError(f"lbar={lbar} outside [0, n)")
    lead = 2.0 * math.log(N) * profile.integral(k / n, t / n)
    return lead - min(t, n - lbar) * math.log(n) / (4.0 * (n - lbar))


def _diamond(r: int) -> np.ndarray:
    x = np.arange(-r, r + 1)
    return (np.abs(x)[:, None] + np.abs(x)[None, :]) <= r


def local_max_mask(heights: np.ndarray, r: int) -> np.ndarray:
    """True where a vertex is maximal on its l1 ball of radius r (clipped to V_N)."""
    if r < 1:
        raise DomainError(f"radius must be >= 1, got {r}")
    fp = _diamond(r)
    if heights.ndim == 3:
        fp = fp[None]
    mx = ndimage.maximum_filter(heights, footprint=fp, mode="constant", cval=-np.inf)
    return heights >= mx


def local_maxima(heights: np.ndarray, r: int) -> list:
    """``[((x1, x2), height), ...]`` for one field."""
    mask = local_max_mask(heights, r)
    return [((int(a), int(b)), float(heights[a, b])) for a, b in np.argwhere(mask)]


def _clipped(vertices: np.ndarray, N: int, r: int) -> np.ndarray:
    return (vertices.min(axis=1) < r) | (vertices.max(axis=1) > N - 1 - r)


@dataclass(frozen=True)
class PointProcessSample:
    """Atoms ``(x, h)`` of one replica; ``x = v / N`` and ``h = height - centering``."""

    N: int
    r: int
    centering: float
    vertices: np.ndarray
    heights: np.ndarray
    clipped: np.ndarray

    @property
    def positions(self) -> np.ndarray:
        return self.vertices / self.N

    def __len__(self):
        return len(self.heights)


@dataclass(frozen=True)
class ClusteredSample:
    """Point process plus the gap ``theta[i, k] = psi_v - psi_{v + offsets[k]}`` around each atom.

    Offsets falling outside V_N carry NaN and mark the atom as clipped.
    """

    process: PointProcessSample
    offsets: np.ndarray
    theta: np.ndarray


def extremal_process(heights: np.ndarray, r: int, centering: float | None = None) -> PointProcessSample:
    N = heights.shape[-1]
    m = m_centering(N) if centering is None else centering
    verts = np.argwhere(local_max_mask(heights, r))
    h = heights[verts[:, 0], verts[:, 1]] - m
    return PointProcessSample(N, r, m, verts, h, _clipped(verts, N, r))


def full_process(heights: np.ndarray, r: int, j: int, centering: float | None = None) -> ClusteredSample:
    if not 0 <= j <= r:
        raise DomainError(f"window j={j} must lie in [0, r={r}]")
    pp = extremal_process(heights, r, centering)
    N = heights.shape[-1]
    offs = l1_offsets(j)
    pts = pp.vertices[:, None, :] + offs[None, :, :]
    inside = ((pts >= 0) & (pts < N)).all(axis=2)
    safe = np.clip(pts, 0, N - 1)
    vals = heights[safe[..., 0], safe[..., 1]]
    base = heights[pp.vertices[:, 0], pp.vertices[:, 1]]
    theta = np.where(inside, base[:, None] - vals, np.nan)
    clipped = pp.clipped | ~inside.all(axis=1)
    pp = PointProcessSample(pp.N, pp.r, pp.centering, pp.vertices, pp.heights, clipped)
    return ClusteredSample(pp, offs, theta)


def superpose(cs: ClusteredSample) -> PointProcessSample:
    """Atoms ``(x_i, h_i - theta_i(w))`` for every window offset inside V_N."""
    pp = cs.process
    ok = ~np.isnan(cs.theta)
    idx = np.nonzero(ok)[0]
    h = (pp.heights[:, None] - cs.theta)[ok]
    return PointProcessSample(pp.N, pp.r, pp.centering, pp.vertices[idx], h, pp.clipped[idx])


def level_set_mask(heights: np.ndarray, y: float) -> np.ndarray:
    return heights >= m_centering(heights.shape[-1]) - y


def level_set(heights: np.ndarray, y: float) -> frozenset:
    """Vertices with height at least m_N - y."""
    return frozenset(map(tuple, np.argwhere(level_set_mask(heights, y)).tolist()))


def joint_region_maxima(heights: np.ndarray, regions, centering: float | None = None) -> np.ndarray:
    """Centred maximum per region; NaN marks a region with no lattice point.

    Works on one field ``(N, N)`` (result ``(p,)``) or a batch (``(R, p)``).
    """
    N = heights.shape[-1]
    spec = GridSpec(N)
    for i, a in enumerate(regions):
        for b in regions[i + 1 :]:
            if not a.disjoint(b):
                raise DomainError(f"regions {a.label!r} and {b.label!r} overlap")
    m = m_centering(N) if centering is None else centering
    batch = heights[None] if heights.ndim == 2 else heights
    flat = batch.reshape(len(batch), -1)
    out = np.full((len(batch), len(regions)), np.nan)
    for i, reg in enumerate(regions):
        mask = reg.mask(spec).ravel()
        if mask.any():
            out[:, i] = flat[:, mask].max(axis=1) - m
    return out[0] if heights.ndim == 2 else out


def pairing(pp: PointProcessSample, f) -> float:
    """<eta, f> = sum over atoms of f(x, h); ``f`` is vectorized in (x, h)."""
    if len(pp) == 0:
        return 0.0
    return float(np.sum(f(pp.positions, pp.heights)))
