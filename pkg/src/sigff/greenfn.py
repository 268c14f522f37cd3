"""Green function of simple random walk killed on leaving a region.

All kernels use the field normalization

    G(v, w) = (pi/2) * E_v[number of visits to w before leaving the region],

so that the diagonal of the Green function on V_N grows like log N.

Two routes are provided.  ``green_table`` solves the killed-walk equations
densely for an arbitrary finite region and is the reference.  For
rectangles the walk generator diagonalizes in a product sine basis, which
gives single rows (``rect_visits_row``) and whole squares
(``square_green``) much faster; the tests tie the two routes together.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft
import scipy.linalg

from .errors import AccuracyError, DomainError, NumericError, ResourceError

__all__ = [
    "SCALE",
    "GreenTable",
    "HarmonicWeights",
    "green_table",
    "harmonic_measure",
    "rect_visits_row",
    "rect_exit_weights",
    "square_green",
    "square_eigenvalues",
    "rect_eigenvalues",
    "potential_kernel",
    "potential_kernel_table",
    "DENSE_CAP",
]

SCALE = math.pi / 2.0
DENSE_CAP = 4096

_STEPS = ((1, 0), (-1, 0), (0, 1), (0, -1))


def _as_vertex_list(region):
    if isinstance(region, np.ndarray) and region.dtype == bool:
        pts = [tuple(p) for p in np.argwhere(region).tolist()]
    else:
        pts = sorted({(int(a), int(b)) for a, b in region})
    return pts


@dataclass(frozen=True)
class GreenTable:
    """Dense Green function on a region; rows and columns follow ``vertices``."""

    vertices: tuple
    matrix: np.ndarray

    def index(self, v) -> int:
        return self._lookup()[tuple(v)]

    def _lookup(self):
        cache = self.__dict__.get("_idx")
        if cache is None:
            cache = {v: i for i, v in enumerate(self.vertices)}
            object.__setattr__(self, "_idx", cache)
        return cache

    def __call__(self, v, w) -> float:
        idx = self._lookup()
        return float(self.matrix[idx[tuple(v)], idx[tuple(w)]])

    def save(self, path):
        np.savez(path, vertices=np.array(self.vertices, dtype=np.int64), matrix=self.matrix)

    @classmethod
    def load(cls, path):
        with np.load(path) as data:
            verts = tuple(map(tuple, data["vertices"].tolist()))
            return cls(verts, data["matrix"].copy())


@dataclass(frozen=True)
class HarmonicWeights:
    """Exit distribution of the walk from ``source`` onto the outer boundary."""

    source: tuple
    weights: dict

    def total(self) -> float:
        return math.fsum(self.weights.values())


def _laplacian(pts):
    idx = {v: i for i, v in enumerate(pts)}
    n = len(pts)
    A = 4.0 * np.eye(n)
    for i, (a, b) in enumerate(pts):
        for da, db in _STEPS:
            j = idx.get((a + da, b + db))
            if j is not None:
                A[i, j] = -1.0
    return A, idx


def green_table(region, cap: int = DENSE_CAP) -> GreenTable:
    """Dense Green function of the walk killed on leaving ``region``.

    Parameters
    ----------
    region : iterable of vertices or boolean mask
    cap : int
        Largest number of vertices accepted for the dense solve.
    """
    pts = _as_vertex_list(region)
    if not pts:
        raise DomainError("empty region")
    if len(pts) > cap:
        raise ResourceError(f"region has {len(pts)} vertices, dense cap is {cap}")
    A, _ = _laplacian(pts)
    # (I - P)^{-1} = 4 (4I - Adj)^{-1}
    try:
        c = scipy.linalg.cho_factor(A, lower=True)
        inv = scipy.linalg.cho_solve(c, np.eye(len(pts)))
    except scipy.linalg.LinAlgError as exc:
        raise NumericError(f"killed-walk system is singular: {exc}") from exc
    G = 4.0 * SCALE * inv
    G = 0.5 * (G + G.T)
    return GreenTable(tuple(pts), G)


def harmonic_measure(interior, source) -> HarmonicWeights:
    """Hitting distribution on the outer boundary of ``interior`` from ``source``."""
    pts = _as_vertex_list(interior)
    source = (int(source[0]), int(source[1]))
    inside = set(pts)
    if source not in inside:
        adjacent = any((source[0] + a, source[1] + b) in inside for a, b in _STEPS)
        if not adjacent and inside:
            raise DomainError(f"source {source} is neither in nor next to the region")
        return HarmonicWeights(source, {source: 1.0})
    A, idx = _laplacian(pts)
    rhs = np.zeros(len(pts))
    rhs[idx[source]] = 1.0
    g = 4.0 * scipy.linalg.solve(A, rhs, assume_a="pos")
    weights: dict = {}
    for i, (a, b) in enumerate(pts):
        for da, db in _STEPS:
            z = (a + da, b + db)
            if z not in inside:
                weights[z] = weights.get(z, 0.0) + 0.25 * g[i]
    return HarmonicWeights(source, weights)


@lru_cache(maxsize=64)
def _sine_basis(m: int):
    k = np.arange(1, m + 1)
    x = np.arange(m)
    E = math.sqrt(2.0 / (m + 1)) * np.sin(np.pi * np.outer(x + 1, k) / (m + 1))
    c = np.cos(np.pi * k / (m + 1))
    return E, c


def rect_visits_row(m1: int, m2: int, s1: int, s2: int) -> np.ndarray:
    """Expected visits to each vertex of an ``m1 x m2`` rectangle from ``(s1, s2)``.

    The walk is killed on leaving the rectangle.  Unscaled (no pi/2).
    """
    E1, c1 = _sine_basis(m1)
    E2, c2 = _sine_basis(m2)
    denom = 1.0 - 0.5 * (c1[:, None] + c2[None, :])
    coef = np.outer(E1[s1], E2[s2]) / denom
    return E1 @ coef @ E2.T


@lru_cache(maxsize=200000)
def rect_exit_weights(m1: int, m2: int, s1: int, s2: int):
    """Exit distribution from ``(s1, s2)`` of the ``m1 x m2`` rectangle.

    Returns ``(offsets, weights)`` with ``offsets`` relative to the lower-left
    free vertex; boundary points have a coordinate equal to -1 or m.
    """
    g = rect_visits_row(m1, m2, s1, s2)
    offs = []
    wts = []
    for y in range(m2):
        offs += [(-1, y), (m1, y)]
        wts += [g[0, y], g[m1 - 1, y]]
    for x in range(m1):
        offs += [(x, -1), (x, m2)]
        wts += [g[x, 0], g[x, m2 - 1]]
    w = 0.25 * np.array(wts)
    return np.array(offs, dtype=int), w


def rect_eigenvalues(m1: int, m2: int) -> np.ndarray:
    """Eigenvalues of the Dirichlet graph Laplacian 4I - Adj on an ``m1 x m2`` box, DST-I ordering."""
    c1 = np.cos(np.pi * np.arange(1, m1 + 1) / (m1 + 1))
    c2 = np.cos(np.pi * np.arange(1, m2 + 1) / (m2 + 1))
    return 4.0 - 2.0 * (c1[:, None] + c2[None, :])


def square_eigenvalues(N: int) -> np.ndarray:
    return rect_eigenvalues(N, N)


def square_green(N: int) -> np.ndarray:
    """Full Green matrix of V_N, rows indexed by flat vertex ``x1 * N + x2``."""
    if N * N > DENSE_CAP * 4:
        raise ResourceError(f"N={N} exceeds the dense Green cap")
    lam = square_eigenvalues(N)
    eye = np.eye(N * N).reshape(N * N, N, N)
    spec = scipy.fft.dstn(eye, type=1, axes=(1, 2), norm="ortho")
    spec /= lam
    G = scipy.fft.idstn(spec, type=1, axes=(1, 2), norm="ortho").reshape(N * N, N * N)
    G *= 4.0 * SCALE
    return 0.5 * (G + G.T)


@lru_cache(maxsize=16)
def _centered_row(m: int) -> np.ndarray:
    n = (1 << m) + 1
    c = 1 << (m - 1)
    return SCALE * rect_visits_row(n, n, c, c), c


def potential_kernel_table(rmax: int = 16, tol: float = 1e-6, mmax: int = 10):
    """Potential kernel on offsets with sup-norm at most ``rmax``.

    Returns an ``(2 rmax + 1, 2 rmax + 1)`` array ``a`` with ``a[rmax + w1,
    rmax + w2]`` the kernel at ``w``.  Green differences on centred boxes of
    side 2^m + 1 are extrapolated in m (error taken proportional to the
    inverse fourth power of the side, as observed for this symmetric
    geometry) until successive estimates agree within ``tol``.
    """
    m = max(3, int(math.ceil(math.log2(2 * rmax + 2))))
    prev = None
    prev_raw = None
    prev_n = None
    history = []
    while m <= mmax:
        row, c = _centered_row(m)
        n = (1 << m) + 1
        win = row[c - rmax : c + rmax + 1, c - rmax : c + rmax + 1]
        raw = row[c, c] - win
        if prev_raw is not None:
            q = (n / prev_n) ** 4
            est = (q * raw - prev_raw) / (q - 1.0)
            if prev is not None:
                err = float(np.max(np.abs(est - prev)))
                history.append(err)
                if err < tol:
                    return est
            prev = est
        prev_raw, prev_n = raw, n
        m += 1
    achieved = history[-1] if history else float("inf")
    raise AccuracyError(
        f"potential kernel did not reach tol={tol} with boxes up to 2^{mmax}+1 "
        f"(achieved {achieved:.3g})",
        achieved=achieved,
    )


def potential_kernel(w, tol: float = 1e-6, cap: int = 16) -> float:
    w1, w2 = int(w[0]), int(w[1])
    r = max(abs(w1), abs(w2))
    if r > cap:
        raise DomainError(f"offset {w} exceeds the cap {cap}")
    table = potential_kernel_table(cap, tol)
    return float(table[cap + w1, cap + w2])
