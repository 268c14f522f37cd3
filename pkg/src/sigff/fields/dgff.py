"""Exact sampling of the discrete Gaussian free field on squares.

The Dirichlet Laplacian on V_N is diagonal in the product sine basis, so a
draw is white noise scaled by the inverse square-root eigenvalues and
transformed back with an orthonormal type-I DST.  The law is exactly the
one with covariance ``green_table(V_N)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft
import scipy.linalg

from ..errors import DomainError, ResourceError
from ..greenfn import SCALE, rect_eigenvalues, square_eigenvalues
from ..lattice import GridSpec
from ..sampler import RngStream

__all__ = ["FieldSample", "sample_dgff", "dgff_draws", "gibbs_markov_resample", "DGFF_CAP"]

DGFF_CAP = 64


@dataclass(frozen=True)
class FieldSample:
    """Heights of a field on V_N.

    ``heights`` has shape ``(N, N)`` for one realization or ``(R, N, N)`` for
    ``R`` replicas.  ``underlying`` holds the DGFF that the field is a linear
    image of, when there is one.
    """

    spec: GridSpec
    heights: np.ndarray
    underlying: np.ndarray | None = None
    tag: str = ""

    def __post_init__(self):
        N = self.spec.N
        if self.heights.shape[-2:] != (N, N):
            raise DomainError(f"heights shape {self.heights.shape} does not fit N={N}")
        if self.underlying is not None and self.underlying.shape != self.heights.shape:
            raise DomainError("underlying field has a different shape")

    @property
    def batched(self) -> bool:
        return self.heights.ndim == 3

    @property
    def replicas(self) -> int:
        return self.heights.shape[0] if self.batched else 1

    def replica(self, i: int) -> "FieldSample":
        if not self.batched:
            if i != 0:
                raise IndexError(i)
            return self
        u = None if self.underlying is None else self.underlying[i]
        return FieldSample(self.spec, self.heights[i], u, self.tag)

    def as_batch(self) -> np.ndarray:
        return self.heights if self.batched else self.heights[None]


def dgff_draws(side: int, stream: RngStream, count: int) -> np.ndarray:
    """``count`` independent DGFF draws on V_side, shape ``(count, side, side)``."""
    scale = np.sqrt(4.0 * SCALE / square_eigenvalues(side))
    z = stream.normal((count, side, side))
    return scipy.fft.idstn(z * scale, type=1, axes=(1, 2), norm="ortho")


def sample_dgff(spec: GridSpec, stream: RngStream, size: int | None = None, cap: int = DGFF_CAP):
    """DGFF on V_N with zero boundary outside V_N."""
    if spec.N > cap:
        raise ResourceError(
            f"N={spec.N} exceeds the exact-mode cap {cap}; use a hierarchical sampler "
            "or raise the cap explicitly"
        )
    draws = dgff_draws(spec.N, stream, 1 if size is None else size)
    h = draws[0] if size is None else draws
    return FieldSample(spec, h, None, "dgff")


def _box_laplacian(m1, m2):
    from scipy.sparse import diags, identity, kron

    def path(m):
        return diags([-np.ones(m - 1), 2 * np.ones(m), -np.ones(m - 1)], [-1, 0, 1])

    return (kron(path(m1), identity(m2)) + kron(identity(m1), path(m2))).toarray()


def gibbs_markov_resample(heights: np.ndarray, bounds, stream: RngStream) -> np.ndarray:
    """Redraw the field inside the rectangle ``bounds`` given everything outside.

    ``bounds = (lo1, hi1, lo2, hi2)`` inclusive.  The new values are the
    harmonic extension of the outside plus an independent DGFF on the box.
    Works on a single field or a batch.
    """
    lo1, hi1, lo2, hi2 = bounds
    N = heights.shape[-1]
    if not (0 <= lo1 <= hi1 < N and 0 <= lo2 <= hi2 < N):
        raise DomainError(f"box {bounds} is not inside V_{N}")
    batch = heights[None] if heights.ndim == 2 else heights
    out = batch.copy()
    m1, m2 = hi1 - lo1 + 1, hi2 - lo2 + 1
    # boundary data enters the Dirichlet problem through the right-hand side
    pad = np.zeros((batch.shape[0], N + 2, N + 2))
    pad[:, 1:-1, 1:-1] = batch
    rhs = np.zeros((batch.shape[0], m1, m2))
    P = pad[:, lo1 : hi1 + 3, lo2 : hi2 + 3].copy()
    P[:, 1:-1, 1:-1] = 0.0
    rhs += P[:, :-2, 1:-1] + P[:, 2:, 1:-1] + P[:, 1:-1, :-2] + P[:, 1:-1, 2:]
    A = _box_laplacian(m1, m2)
    harm = scipy.linalg.solve(A, rhs.reshape(len(rhs), -1).T, assume_a="pos").T
    scale = np.sqrt(4.0 * SCALE / rect_eigenvalues(m1, m2))
    z = stream.normal((batch.shape[0], m1, m2))
    fresh = scipy.fft.idstn(z * scale, type=1, axes=(1, 2), norm="ortho")
    out[:, lo1 : hi1 + 1, lo2 : hi2 + 1] = harm.reshape(-1, m1, m2) + fresh
    return out[0] if heights.ndim == 2 else out
