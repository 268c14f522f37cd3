"""The scale-inhomogeneous field as a linear image of a DGFF.

For a step profile with breakpoints ``l_0 < ... < l_M`` and values
``sigma_i^2``,

    psi_v = sum_i sigma_i (phi_v(l_i) - phi_v(l_{i-1})),

where ``phi_v(l)`` is the conditional expectation of ``phi_v`` given the
field outside the open box of half-width ``half_width(N, l)`` around ``v``.
That conditional expectation is the harmonic average of ``phi`` over the
exit distribution of the box, and ``phi_v(0) = 0``, ``phi_v(1) = phi_v``.
Collecting terms gives ``psi = L phi`` with

    L = sigma_M I + sum_{i<M} (sigma_i - sigma_{i+1}) H_{l_i}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..errors import ConfigurationError, ResourceError
from ..greenfn import rect_exit_weights, square_green
from ..lattice import GridSpec, half_width
from ..sampler import RngStream
from .dgff import DGFF_CAP, FieldSample, dgff_draws
from .profile import VarianceProfile

__all__ = [
    "InhomogeneousOperator",
    "harmonic_operator",
    "inhomogeneous_operator",
    "sample_inhomogeneous",
]


def _free_bounds(v, h, N):
    lo = [max(v[i] - h + 1, 0) for i in range(2)]
    hi = [min(v[i] + h - 1, N - 1) for i in range(2)]
    return lo, hi


def harmonic_operator(spec: GridSpec, lam: float) -> sp.csr_matrix:
    """Sparse matrix of phi -> phi(lam) on V_N (rows and columns flat vertices)."""
    N = spec.N
    if lam <= 0.0:
        return sp.csr_matrix((N * N, N * N))
    if lam >= 1.0:
        return sp.identity(N * N, format="csr")
    h = half_width(N, lam)
    rows, cols, vals = [], [], []
    for x1 in range(N):
        for x2 in range(N):
            lo, hi = _free_bounds((x1, x2), h, N)
            m1, m2 = hi[0] - lo[0] + 1, hi[1] - lo[1] + 1
            offs, w = rect_exit_weights(m1, m2, x1 - lo[0], x2 - lo[1])
            z1 = offs[:, 0] + lo[0]
            z2 = offs[:, 1] + lo[1]
            keep = (z1 >= 0) & (z1 < N) & (z2 >= 0) & (z2 < N)
            rows.append(np.full(int(keep.sum()), x1 * N + x2))
            cols.append(z1[keep] * N + z2[keep])
            vals.append(w[keep])
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N * N, N * N)
    )


@dataclass
class InhomogeneousOperator:
    """``psi = L phi`` together with lazily computed exact covariances."""

    spec: GridSpec
    profile: VarianceProfile
    L: sp.csr_matrix
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def green(self) -> np.ndarray:
        if "G" not in self._cache:
            self._cache["G"] = square_green(self.spec.N)
        return self._cache["G"]

    @property
    def covariance(self) -> np.ndarray:
        """Exact covariance L G L^T, flat-vertex indexed."""
        if "cov" not in self._cache:
            LG = self.L @ self.green
            C = (self.L @ LG.T).T
            self._cache["cov"] = 0.5 * (C + C.T)
        return self._cache["cov"]

    @property
    def variances(self) -> np.ndarray:
        """Exact Var(psi_v) as an ``(N, N)`` array."""
        if "var" not in self._cache:
            if "cov" in self._cache:
                d = np.diag(self._cache["cov"]).copy()
            else:
                LG = self.L @ self.green
                d = np.asarray(self.L.multiply(LG).sum(axis=1)).ravel()
            N = self.spec.N
            self._cache["var"] = d.reshape(N, N)
        return self._cache["var"]

    def apply(self, phi: np.ndarray) -> np.ndarray:
        """Map one field ``(N, N)`` or a batch ``(R, N, N)`` through L."""
        N = self.spec.N
        flat = phi.reshape(-1, N * N)
        out = (self.L @ flat.T).T
        return out.reshape(phi.shape)

    @property
    def is_identity(self) -> bool:
        return self.profile.sigma2 == (1.0,)


def inhomogeneous_operator(
    spec: GridSpec, profile: VarianceProfile, cap: int = DGFF_CAP
) -> InhomogeneousOperator:
    if spec.N > cap:
        raise ResourceError(f"N={spec.N} exceeds the operator cap {cap}")
    sig = [math.sqrt(s) for s in profile.sigma2]
    n = spec.N * spec.N
    L = sig[-1] * sp.identity(n, format="csr")
    for i, lam in enumerate(profile.breakpoints[1:-1]):
        coef = sig[i] - sig[i + 1]
        if coef != 0.0:
            L = L + coef * harmonic_operator(spec, lam)
    return InhomogeneousOperator(spec, profile, sp.csr_matrix(L))


def sample_inhomogeneous(
    spec: GridSpec,
    profile: VarianceProfile,
    stream: RngStream,
    size: int | None = None,
    operator: InhomogeneousOperator | None = None,
) -> FieldSample:
    """Draw phi and return psi = L phi with phi kept as ``underlying``."""
    if operator is None:
        operator = inhomogeneous_operator(spec, profile)
    elif operator.spec != spec or operator.profile != profile:
        raise ConfigurationError("operator was built for a different grid or profile")
    phi = dgff_draws(spec.N, stream, 1 if size is None else size)
    psi = operator.apply(phi)
    if size is None:
        phi, psi = phi[0], psi[0]
    return FieldSample(spec, psi, phi, "inhomogeneous")
