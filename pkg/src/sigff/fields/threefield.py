"""Coarse + branching + bottom approximation of the inhomogeneous field.

Notation: ``K, L, Kp, Lp`` are powers of two, ``N / (K L)`` is the side of
the coarse boxes and ``Kp Lp`` the side of the bottom boxes.  Dyadic levels
use ``n = log2 N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, NumericError
from ..greenfn import square_green
from ..lattice import GridSpec, is_power_of_two
from ..sampler import RngStream
from .dgff import FieldSample, dgff_draws
from .inhomogeneous import InhomogeneousOperator, inhomogeneous_operator
from .profile import VarianceProfile

__all__ = [
    "Geometry",
    "Calibration",
    "sample_component",
    "middle_variance",
    "calibrate_three_field",
    "sample_three_field",
    "three_field_variance",
]


@dataclass(frozen=True)
class Geometry:
    spec: GridSpec
    K: int
    L: int
    Kp: int
    Lp: int

    def __post_init__(self):
        N = self.spec.N
        for name in ("K", "L", "Kp", "Lp"):
            if not is_power_of_two(getattr(self, name)):
                raise ConfigurationError(f"{name}={getattr(self, name)} is not a power of two")
        if not is_power_of_two(N):
            raise ConfigurationError(f"N={N} is not a power of two")
        if N % (self.K * self.L) or N % (self.Kp * self.Lp):
            raise ConfigurationError(
                f"N={N} must be divisible by KL={self.K * self.L} and K'L'={self.Kp * self.Lp}"
            )
        if self.K * self.L < 2:
            raise ConfigurationError("KL must be at least 2")

    @property
    def coarse_side(self) -> int:
        return self.spec.N // (self.K * self.L)

    @property
    def fine_side(self) -> int:
        return self.Kp * self.Lp

    @property
    def levels(self) -> range:
        n = self.spec.log2
        lo = int(math.log2(self.Kp * self.Lp))
        hi = n - int(math.log2(self.K * self.L))
        return range(lo, hi + 1)


def _level_weight(geom: Geometry, profile: VarianceProfile, j: int) -> float:
    n = geom.spec.log2
    # int_{n-j-1}^{n-j} sigma(s/n) ds = n * int_{(n-j-1)/n}^{(n-j)/n} sigma(u) du
    return 2.0**-j * math.sqrt(math.log(2.0)) * n * profile.sigma_integral((n - j - 1) / n, (n - j) / n)


def middle_variance(geom: Geometry, profile: VarianceProfile, corner) -> float:
    """Exact Var of the branching field at a bottom-box corner (direct sum)."""
    total = []
    for j in geom.levels:
        b = 1 << j
        count = (min(corner[0], b - 1) + 1) * (min(corner[1], b - 1) + 1)
        total.append(count * _level_weight(geom, profile, j) ** 2)
    return math.fsum(total)


def _coarse(geom, profile, stream, count):
    KL = geom.K * geom.L
    z = math.sqrt(profile.sigma2_start) * dgff_draws(KL, stream, count)
    s = geom.coarse_side
    return np.repeat(np.repeat(z, s, axis=1), s, axis=2)


def _middle(geom, profile, stream, count):
    N = geom.spec.N
    s = geom.coarse_side
    f = geom.fine_side
    KL = geom.K * geom.L
    # values at bottom-box corners, one entry per bottom box
    out = np.zeros((count, N // f, N // f))
    for j in geom.levels:
        b = 1 << j
        w = _level_weight(geom, profile, j)
        for i1 in range(KL):
            for i2 in range(KL):
                a1, a2 = i1 * s, i2 * s
                # candidate corners for boxes containing a corner in this coarse box
                c1 = max(a1 - b + 1, 0)
                c2 = max(a2 - b + 1, 0)
                e1, e2 = a1 + s - 1, a2 + s - 1
                g = stream.child("level", j, "box", i1, i2).normal((count, e1 - c1 + 1, e2 - c2 + 1))
                cs = np.zeros((count, g.shape[1] + 1, g.shape[2] + 1))
                cs[:, 1:, 1:] = g.cumsum(1).cumsum(2)
                for x1 in range(a1, a1 + s, f):
                    lo1, hi1 = max(x1 - b + 1, 0) - c1, x1 - c1 + 1
                    for x2 in range(a2, a2 + s, f):
                        lo2, hi2 = max(x2 - b + 1, 0) - c2, x2 - c2 + 1
                        box = cs[:, hi1, hi2] - cs[:, lo1, hi2] - cs[:, hi1, lo2] + cs[:, lo1, lo2]
                        out[:, x1 // f, x2 // f] += w * box
    # when bottom boxes are larger than coarse boxes there is no admissible
    # level and the branching field vanishes
    return np.repeat(np.repeat(out, f, axis=1), f, axis=2)


def _bottom(geom, profile, stream, count):
    N = geom.spec.N
    f = geom.fine_side
    nb = N // f
    d = math.sqrt(profile.sigma2_end) * dgff_draws(f, stream, count * nb * nb)
    d = d.reshape(count, nb, nb, f, f).transpose(0, 1, 3, 2, 4)
    return d.reshape(count, N, N)


_KINDS = {"coarse": _coarse, "middle": _middle, "bottom": _bottom}


def sample_component(
    kind: str,
    spec: GridSpec,
    K: int,
    L: int,
    Kp: int,
    Lp: int,
    profile: VarianceProfile,
    stream: RngStream,
    size: int | None = None,
) -> FieldSample:
    """One of the three approximating fields: ``coarse``, ``middle`` or ``bottom``."""
    if kind not in _KINDS:
        raise ConfigurationError(f"unknown component {kind!r}")
    geom = Geometry(spec, K, L, Kp, Lp)
    h = _KINDS[kind](geom, profile, stream, 1 if size is None else size)
    return FieldSample(spec, h[0] if size is None else h, None, kind)


@dataclass(frozen=True)
class Calibration:
    """Variance-matching constants for the three-field approximation.

    ``a`` is indexed by the residue ``v mod K'L'``; ``representative`` is the
    lower-left corner of the bottom box used for matching.
    """

    geometry: Geometry
    profile: VarianceProfile
    profile_digest: str
    a: np.ndarray
    alpha: float
    representative: tuple
    var_psi: np.ndarray
    var_components: np.ndarray

    @property
    def spec(self) -> GridSpec:
        return self.geometry.spec

    def residual(self) -> np.ndarray:
        """Var(S) - Var(psi) - 4 alpha on the representative box."""
        return self.var_components + self.a**2 - self.var_psi - 4.0 * self.alpha


def _component_variance(geom: Geometry, profile: VarianceProfile) -> np.ndarray:
    N = geom.spec.N
    KL = geom.K * geom.L
    f = geom.fine_side
    s = geom.coarse_side
    gc = np.diag(square_green(KL)).reshape(KL, KL)
    gb = np.diag(square_green(f)).reshape(f, f)
    var = profile.sigma2_start * np.repeat(np.repeat(gc, s, 0), s, 1)
    var = var + profile.sigma2_end * np.tile(gb, (N // f, N // f))
    mid = np.array(
        [[middle_variance(geom, profile, (x1, x2)) for x2 in range(0, N, f)] for x1 in range(0, N, f)]
    )
    return var + np.repeat(np.repeat(mid, f, 0), f, 1)


def calibrate_three_field(
    spec: GridSpec,
    K: int,
    L: int,
    Kp: int,
    Lp: int,
    profile: VarianceProfile,
    operator: InhomogeneousOperator | None = None,
) -> Calibration:
    """Choose alpha and a(v mod K'L') so that Var(S) = Var(psi) + 4 alpha on a central bottom box."""
    geom = Geometry(spec, K, L, Kp, Lp)
    if operator is None:
        operator = inhomogeneous_operator(spec, profile)
    N = spec.N
    f = geom.fine_side
    c = ((N - f) // 2 // f) * f
    rep = (c, c)
    var_psi = operator.variances[c : c + f, c : c + f]
    var_comp = _component_variance(geom, profile)[c : c + f, c : c + f]
    gap = var_comp - var_psi
    alpha = 0.25 * max(float(gap.max()), 0.0)
    a2 = var_psi + 4.0 * alpha - var_comp
    if a2.min() < -1e-12:
        raise NumericError(f"negative a^2 = {a2.min():.3e} after choosing alpha")
    a = np.sqrt(np.clip(a2, 0.0, None))
    return Calibration(geom, profile, profile.digest(), a, alpha, rep, var_psi, var_comp)


def three_field_variance(calib: Calibration) -> np.ndarray:
    """Exact Var(S_v) for every vertex."""
    geom = calib.geometry
    N = geom.spec.N
    f = geom.fine_side
    return _component_variance(geom, calib.profile) + np.tile(calib.a**2, (N // f, N // f))


def sample_three_field(
    calib: Calibration,
    stream: RngStream,
    size: int | None = None,
    spec: GridSpec | None = None,
    parts: bool = False,
):
    """S = coarse + middle + bottom + a(v mod K'L') Theta_box.

    With ``parts=True`` the four summands are returned in a dict as well.
    """
    geom = calib.geometry
    if spec is not None and spec != geom.spec:
        raise ConfigurationError(f"calibration was built for N={geom.spec.N}, not N={spec.N}")
    count = 1 if size is None else size
    N = geom.spec.N
    f = geom.fine_side
    comps = {
        kind: _KINDS[kind](geom, calib.profile, stream.child(kind), count) for kind in ("coarse", "middle", "bottom")
    }
    theta = stream.child("theta").normal((count, N // f, N // f))
    comps["theta"] = np.repeat(np.repeat(theta, f, 1), f, 2) * np.tile(calib.a, (N // f, N // f))
    total = comps["coarse"] + comps["middle"] + comps["bottom"] + comps["theta"]
    sample = FieldSample(geom.spec, total[0] if size is None else total, None, "three-field")
    if parts:
        return sample, comps
    return sample
