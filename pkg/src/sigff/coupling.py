"""Independent-box model for the joint law of region maxima.

Each of the ``R = (KL)^2`` coarse boxes carries a Bernoulli indicator, a
shifted exponential height and the value of a coarse Gaussian field.  The
maximum over the boxes of a region approximates the centred region maximum
of the field, and its joint distribution function is predicted by a Laplace
functional of the coarse field.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import CalibrationWarning, ConfigurationError, DomainError, StatisticalError
from .extremal import m_kt
from .fields.profile import VarianceProfile
from .greenfn import square_green
from .lattice import Region, is_power_of_two
from .sampler import GaussianLaw, RngStream

__all__ = [
    "CouplingParams",
    "CouplingSample",
    "region_boxes",
    "sample_coupling",
    "coupling_cdf",
    "compute_D",
    "BetaEstimate",
    "estimate_beta_star",
    "laplace_prediction",
]


@dataclass(frozen=True)
class CouplingParams:
    """Parameters of the box model.

    ``exponent`` selects the factor in front of ``log(KL)`` inside the
    coarse functional: ``"single"`` uses ``1 + sigma^2(0)``, which is what
    the box model itself implies, ``"double"`` uses ``2 (1 + sigma^2(0))``.
    """

    K: int
    L: int
    Kp: int
    Lp: int
    gamma: float
    beta_star: float
    profile: VarianceProfile
    exponent: str = "single"

    def __post_init__(self):
        for name in ("K", "L", "Kp", "Lp"):
            if not is_power_of_two(getattr(self, name)):
                raise ConfigurationError(f"{name}={getattr(self, name)} is not a power of two")
        if self.K * self.L < 2:
            raise ConfigurationError("KL must be at least 2")
        if not 0.0 < self.gamma < 0.5:
            raise ConfigurationError(f"gamma={self.gamma} outside (0, 1/2)")
        if self.beta_star < 0:
            raise ConfigurationError(f"beta*={self.beta_star} is negative")
        if self.exponent not in ("single", "double"):
            raise ConfigurationError(f"exponent must be 'single' or 'double', not {self.exponent!r}")
        if not self.profile.sigma2_start < 1.0:
            raise ConfigurationError(f"sigma^2(0) = {self.profile.sigma2_start} must be below 1")
        p = self.success_probability
        if p > 1.0:
            raise ConfigurationError(
                f"Bernoulli probability {p:.4g} exceeds 1 (kbar={self.kbar:.4g}, "
                f"sigma(0)={math.sqrt(self.profile.sigma2_start):.4g}, beta*={self.beta_star})"
            )

    @property
    def KL(self) -> int:
        return self.K * self.L

    @property
    def R(self) -> int:
        return self.KL**2

    @property
    def kbar(self) -> float:
        return math.log(self.KL)

    @property
    def success_probability(self) -> float:
        s2 = self.profile.sigma2_start
        return self.beta_star * math.exp(2 * self.kbar**self.gamma + 2 * self.kbar * (s2 - 1.0))

    @property
    def D_factor(self) -> float:
        f = 1.0 + self.profile.sigma2_start
        return f if self.exponent == "single" else 2.0 * f

    def coarse_covariance(self) -> np.ndarray:
        """Covariance of the coarse box values: sigma^2(0) times the Green matrix of V_KL."""
        return self.profile.sigma2_start * square_green(self.KL)


def region_boxes(region: Region, KL: int) -> np.ndarray:
    """Indices ``i1 * KL + i2`` of the coarse boxes whose closure lies inside the region.

    Uses the continuum boxes ``[i1/KL, (i1+1)/KL] x [i2/KL, (i2+1)/KL]``
    for a scaled rectangle and requires the open rectangle to contain them
    up to its boundary.
    """
    if region.rect is None:
        raise DomainError("box index sets need a scaled rectangle region")
    a1, b1, a2, b2 = region.rect
    i = np.arange(KL)
    ok1 = (i / KL >= a1) & ((i + 1) / KL <= b1)
    ok2 = (i / KL >= a2) & ((i + 1) / KL <= b2)
    return (i[ok1][:, None] * KL + i[ok2][None, :]).ravel()


@dataclass(frozen=True)
class CouplingSample:
    """Region maxima of the box model.

    ``values[k, i]`` is NaN exactly when ``empty[k, i]``: no box of region
    ``i`` was switched on, and the maximum is minus infinity.
    """

    values: np.ndarray
    empty: np.ndarray
    Z: np.ndarray
    rho: np.ndarray
    Y: np.ndarray


def _index_sets(regions, KL):
    out = []
    for T in regions:
        idx = region_boxes(T, KL) if isinstance(T, Region) else np.asarray(T, dtype=int).ravel()
        if idx.size and (idx.min() < 0 or idx.max() >= KL * KL):
            raise DomainError(f"box index outside [0, {KL * KL})")
        out.append(idx)
    return out


def sample_coupling(
    params: CouplingParams, regions, stream: RngStream, size: int = 1, force_on: bool = False
) -> CouplingSample:
    """Draw ``size`` vectors of region maxima.

    ``regions`` holds box index sets or scaled-rectangle regions.
    ``force_on`` switches every box on (a test hook for the convolution law).
    """
    R = params.R
    kb = params.kbar
    s2 = params.profile.sigma2_start
    sets = _index_sets(regions, params.KL)
    rho = np.ones((size, R), dtype=bool) if force_on else stream.child("rho").uniform((size, R)) < params.success_probability
    Y = -(kb**params.gamma) + stream.child("Y").exponential(0.5, (size, R))
    Z = GaussianLaw.centred(params.coarse_covariance())
    z = Z.mean + stream.child("Z").normal((size, R)) @ Z.factor.T
    box = Y + 2 * kb * (1 - s2) + z - 2 * kb
    box = np.where(rho, box, -np.inf)
    vals = np.stack([box[:, T].max(axis=1) if len(T) else np.full(size, -np.inf) for T in sets], axis=1)
    empty = np.isneginf(vals)
    return CouplingSample(np.where(empty, np.nan, vals), empty, z, rho, Y)


def coupling_cdf(sample: CouplingSample, x) -> float:
    """Empirical P(G_i <= x_i for all i); an empty region counts as below any threshold."""
    x = np.asarray(x, dtype=float)
    below = sample.empty | (np.nan_to_num(sample.values, nan=-np.inf) <= x[None, :])
    return float(below.all(axis=1).mean())


def compute_D(Z, regions, params: CouplingParams) -> np.ndarray:
    """D(A_i) = sum over boxes j of region i of exp(-2 (factor log KL - Z_j))."""
    Z = np.asarray(Z, dtype=float)
    sets = _index_sets(regions, params.KL)
    w = np.exp(-2.0 * (params.D_factor * params.kbar - Z))
    out = np.stack([w[..., T].sum(axis=-1) for T in sets], axis=-1)
    return out


def laplace_prediction(D, beta_star: float, x) -> float:
    """Mean over coarse samples of exp(-beta* sum_i D_i e^{-2 x_i})."""
    D = np.atleast_2d(np.asarray(D, dtype=float))
    x = np.asarray(x, dtype=float)
    if D.shape[1] != x.shape[0]:
        raise DomainError(f"{D.shape[1]} regions but {x.shape[0]} thresholds")
    return float(np.mean(np.exp(-beta_star * (D * np.exp(-2.0 * x)[None, :]).sum(axis=1))))


@dataclass(frozen=True)
class BetaEstimate:
    value: float
    se: float
    z_grid: tuple
    per_z: np.ndarray
    per_z_se: np.ndarray
    slope: float
    slope_se: float

    @property
    def plateau(self) -> bool:
        return abs(self.slope) <= 3.0 * self.slope_se


def estimate_beta_star(maxima, params: CouplingParams, N: int, z_grid=(1.0, 1.5, 2.0)) -> BetaEstimate:
    """Estimate the box constant from maxima of the fine field over single boxes.

    ``maxima`` are raw box maxima; they are centred by
    ``m_N(kbar, n) - kbar^gamma``.  At each ``z`` the exceedance frequency is
    rescaled to a constant; the estimate is the mean over ``z`` and a
    :class:`CalibrationWarning` is issued when the per-``z`` values trend
    (slope beyond 3 SE).
    """
    m = np.asarray(maxima, dtype=float).ravel()
    if m.size == 0:
        raise StatisticalError("no box maxima")
    kb = params.kbar
    s2 = params.profile.sigma2_start
    n = math.log2(N)
    centre = m_kt(N, kb, n, params.profile) - kb**params.gamma
    scale = math.exp(2 * math.log(2) * kb * (1 - s2) - 2 * kb**params.gamma)
    z = np.asarray(z_grid, dtype=float)
    p = np.array([(m >= centre + zz).mean() for zz in z])
    per = scale * np.exp(2 * z) * p
    per_se = scale * np.exp(2 * z) * np.sqrt(p * (1 - p) / m.size)
    value = float(per.mean())
    se = float(math.sqrt(np.sum(per_se**2)) / len(z))
    if len(z) > 1:
        slope = float(np.polyfit(z, per, 1)[0])
        zc = z - z.mean()
        slope_se = float(math.sqrt(np.sum(zc**2 * per_se**2)) / np.sum(zc**2))
    else:
        slope, slope_se = 0.0, float("inf")
    est = BetaEstimate(value, se, tuple(z_grid), per, per_se, slope, slope_se)
    if not est.plateau:
        warnings.warn(
            f"no plateau in beta* over z: slope {slope:.3g} with SE {slope_se:.3g}", CalibrationWarning, stacklevel=2
        )
    return est
