"""Geometry of the square grid V_N = [0, N)^2.

Vertices are integer pairs ``(x1, x2)``; a field on V_N is an ``(N, N)``
array indexed as ``field[x1, x2]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError

__all__ = [
    "GridSpec",
    "Region",
    "Box",
    "half_width",
    "box_bounds",
    "box_around",
    "l1_neighborhood",
    "l1_offsets",
    "dyadic_boxes_containing",
    "interior_mask",
    "interior_region",
    "is_power_of_two",
]


def is_power_of_two(k: int) -> bool:
    return k >= 1 and (k & (k - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Side length of the box V_N = [0, N)^2."""

    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise DomainError(f"grid side must be an integer >= 2, got {self.N}")

    @property
    def size(self) -> int:
        return self.N * self.N

    @property
    def log2(self) -> int:
        """n = log2 N for dyadic bookkeeping (requires a power of two)."""
        if not is_power_of_two(self.N):
            raise ConfigurationError(f"N={self.N} is not a power of two")
        return self.N.bit_length() - 1

    def contains(self, v) -> bool:
        return 0 <= v[0] < self.N and 0 <= v[1] < self.N

    def check(self, v):
        if not self.contains(v):
            raise DomainError(f"vertex {tuple(v)} outside V_{self.N}")

    def flat(self, v) -> int:
        return int(v[0]) * self.N + int(v[1])

    def center(self):
        return (self.N // 2, self.N // 2)


@dataclass(frozen=True)
class Box:
    """Axis-aligned square with lower-left ``corner`` and ``side`` vertices per axis."""

    corner: tuple
    side: int

    def contains(self, v) -> bool:
        return all(self.corner[i] <= v[i] < self.corner[i] + self.side for i in range(2))


@dataclass(frozen=True)
class Region:
    """A labelled set of vertices.

    Either ``vertices`` (lattice units) or ``rect`` is given. ``rect`` is an
    open rectangle ``(a1, b1, a2, b2)`` in scaled coordinates, selecting
    the vertices with ``a1 < v1/N < b1`` and ``a2 < v2/N < b2``.
    """

    label: str
    vertices: frozenset | None = None
    rect: tuple | None = None

    def __post_init__(self):
        if (self.vertices is None) == (self.rect is None):
            raise ConfigurationError("a region needs exactly one of vertices or rect")

    @property
    def scaled(self) -> bool:
        return self.rect is not None

    def mask(self, spec: GridSpec) -> np.ndarray:
        N = spec.N
        if self.rect is not None:
            a1, b1, a2, b2 = self.rect
            x = np.arange(N) / N
            m1 = (x > a1) & (x < b1)
            m2 = (x > a2) & (x < b2)
            return m1[:, None] & m2[None, :]
        out = np.zeros((N, N), dtype=bool)
        for v in self.vertices:
            spec.check(v)
            out[v[0], v[1]] = True
        return out

    def disjoint(self, other: "Region") -> bool:
        if self.rect is not None and other.rect is not None:
            a, b = self.rect, other.rect
            return a[1] <= b[0] or b[1] <= a[0] or a[3] <= b[2] or b[3] <= a[2]
        if self.vertices is not None and other.vertices is not None:
            return not (self.vertices & other.vertices)
        raise ConfigurationError("cannot compare scaled and lattice regions without a grid")


def half_width(N: int, lam: float) -> int:
    """Half-width of [v]_lam: N^(1-lam)/2 rounded to nearest, ties up."""
    return int(math.floor(N ** (1.0 - lam) / 2.0 + 0.5))


def box_bounds(v, lam: float, spec: GridSpec):
    """Inclusive bounds ``(lo1, hi1, lo2, hi2)`` of [v]_lam clipped to V_N."""
    spec.check(v)
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"scale {lam} outside [0, 1]")
    N = spec.N
    if lam == 0.0:
        return (0, N - 1, 0, N - 1)
    if lam == 1.0:
        return (v[0], v[0], v[1], v[1])
    h = half_width(N, lam)
    return (max(v[0] - h, 0), min(v[0] + h, N - 1), max(v[1] - h, 0), min(v[1] + h, N - 1))


def box_around(v, lam: float, spec: GridSpec) -> frozenset:
    lo1, hi1, lo2, hi2 = box_bounds(v, lam, spec)
    return frozenset((a, b) for a in range(lo1, hi1 + 1) for b in range(lo2, hi2 + 1))


def l1_offsets(r: int) -> np.ndarray:
    """Offsets w with |w|_1 <= r as an ``(k, 2)`` integer array, origin first."""
    if r < 0 or int(r) != r:
        raise DomainError(f"radius must be a nonnegative integer, got {r}")
    pts = [(0, 0)]
    for a in range(-r, r + 1):
        for b in range(-r, r + 1):
            if (a, b) != (0, 0) and abs(a) + abs(b) <= r:
                pts.append((a, b))
    return np.array(pts, dtype=int)


def l1_neighborhood(v, r: int) -> frozenset:
    return frozenset((v[0] + a, v[1] + b) for a, b in l1_offsets(r))


def dyadic_boxes_containing(v, j: int, spec: GridSpec) -> list:
    """Boxes of side 2^j whose lower-left corner lies in V_N and which contain v."""
    spec.check(v)
    side = 1 << j
    if side > spec.N:
        raise DomainError(f"box side 2^{j} exceeds N={spec.N}")
    r1 = range(max(v[0] - side + 1, 0), v[0] + 1)
    r2 = range(max(v[1] - side + 1, 0), v[1] + 1)
    return [Box((a, b), side) for a in r1 for b in r2]


def _check_tiling(N: int, *sides):
    for s in sides:
        if not is_power_of_two(s) or N % s:
            raise ConfigurationError(f"{s} is not a power of two dividing N={N}")


def _shrunk_axis(N: int, side: int, delta: float) -> np.ndarray:
    # distance to the outer boundary of the tile, per coordinate
    x = np.arange(N)
    off = x % side
    dist = np.minimum(off + 1, side - off)
    return dist >= delta * side


def interior_mask(spec: GridSpec, K: int, L: int, Kp: int, Lp: int, delta: float) -> np.ndarray:
    """Boolean mask of V*_{N,delta}.

    A vertex qualifies if, for each tiling of V_N by boxes of side N/L,
    N/(KL), L and KL, it keeps distance at least ``delta * side`` from the
    outer boundary of its tile.
    """
    N = spec.N
    for k in (K, L, Kp, Lp):
        if not is_power_of_two(k):
            raise ConfigurationError(f"{k} is not a power of two")
    if N % (K * L) or N % (Kp * Lp):
        raise ConfigurationError(f"N={N} is not divisible by KL={K * L} and K'L'={Kp * Lp}")
    if not 0.0 < delta < 0.5:
        raise DomainError(f"delta={delta} outside (0, 1/2)")
    sides = (N // L, N // (K * L), L, K * L)
    _check_tiling(N, *sides)
    ok = np.ones(N, dtype=bool)
    for s in sides:
        ok &= _shrunk_axis(N, s, delta)
    return ok[:, None] & ok[None, :]


def interior_region(spec: GridSpec, K: int, L: int, Kp: int, Lp: int, delta: float) -> frozenset:
    m = interior_mask(spec, K, L, Kp, Lp, delta)
    return frozenset(map(tuple, np.argwhere(m).tolist()))
