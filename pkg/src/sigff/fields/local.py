"""Split of the field near a vertex into a binding part and a local part.

With ``Lam`` the l1 ball of radius ``M`` around ``v``, the Gibbs-Markov
property writes ``phi = h + phi_Lam``: ``h`` is ``phi`` outside ``Lam`` and
its harmonic extension inside, ``phi_Lam`` is an independent DGFF on
``Lam``.  Applying ``psi = L phi`` gives

    psi = L h + L phi_Lam = Phi + psi_local,

where ``Phi`` depends only on the field outside ``Lam`` and ``psi_local`` is
independent of it.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from ..errors import DomainError
from ..greenfn import SCALE, green_table
from ..lattice import l1_offsets
from .inhomogeneous import InhomogeneousOperator

__all__ = ["LocalDecomposition", "decompose_around", "binding_row", "ball_harmonic"]


@lru_cache(maxsize=32)
def ball_harmonic(M: int):
    """Exit distribution of the l1 ball of radius ``M`` from each of its vertices.

    Returns ``(offsets, boundary, H)``: ball offsets (origin first), offsets of
    the outer boundary, and ``H[i, k]`` the probability that the walk from
    ``offsets[i]`` leaves through ``boundary[k]``.
    """
    offs = l1_offsets(M)
    index = {tuple(o): i for i, o in enumerate(offs.tolist())}
    n = len(offs)
    A = 4.0 * np.eye(n)
    bnd: dict = {}
    B_rows, B_cols = [], []
    for i, (a, b) in enumerate(offs.tolist()):
        for da, db in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            z = (a + da, b + db)
            j = index.get(z)
            if j is not None:
                A[i, j] = -1.0
            else:
                k = bnd.setdefault(z, len(bnd))
                B_rows.append(i)
                B_cols.append(k)
    B = np.zeros((n, len(bnd)))
    np.add.at(B, (B_rows, B_cols), 1.0)
    H = scipy.linalg.solve(A, B, assume_a="pos")
    boundary = np.array(sorted(bnd, key=bnd.get), dtype=int)
    return offs, boundary, H


def _ball_indices(N, v, M):
    offs, boundary, H = ball_harmonic(M)
    pts = offs + np.asarray(v)
    if pts.min() < 0 or pts.max() >= N:
        raise DomainError(f"window of radius {M} around {tuple(v)} leaves V_{N}")
    bpts = boundary + np.asarray(v)
    keep = (bpts >= 0).all(1) & (bpts < N).all(1)
    return pts[:, 0] * N + pts[:, 1], bpts[keep, 0] * N + bpts[keep, 1], H[:, keep]


def binding_row(op: InhomogeneousOperator, v, M: int) -> np.ndarray:
    """Vector ``c`` with ``Phi_v = c . phi`` (flat-indexed DGFF)."""
    N = op.spec.N
    ball, bnd, H = _ball_indices(N, v, M)
    row = np.asarray(op.L[v[0] * N + v[1]].todense()).ravel()
    inside = row[ball].copy()
    row[ball] = 0.0
    np.add.at(row, bnd, inside @ H)
    return row


@dataclass(frozen=True)
class LocalDecomposition:
    """Exact covariances of the two parts on the window (rows follow ``offsets``)."""

    center: tuple
    offsets: np.ndarray
    functional: np.ndarray
    cov_binding: np.ndarray
    cov_local: np.ndarray
    local_operator: np.ndarray
    local_green: np.ndarray

    def binding(self, phi: np.ndarray) -> np.ndarray:
        """Phi on the window for a realized DGFF ``(N, N)`` or batch ``(R, N, N)``."""
        flat = phi.reshape(-1, self.functional.shape[1])
        out = flat @ self.functional.T
        return out[0] if phi.ndim == 2 else out


def decompose_around(op: InhomogeneousOperator, v, M: int) -> LocalDecomposition:
    N = op.spec.N
    ball, bnd, H = _ball_indices(N, v, M)
    Lw = op.L[ball].toarray()
    F = Lw.copy()
    inside = Lw[:, ball]
    F[:, ball] = 0.0
    F[:, bnd] += inside @ H
    G = op.green
    cov_binding = F @ G @ F.T
    offs = l1_offsets(M)
    Glam = green_table([tuple(p) for p in (offs + np.asarray(v)).tolist()])
    order = [Glam.index(tuple(p)) for p in (offs + np.asarray(v)).tolist()]
    Gl = Glam.matrix[np.ix_(order, order)]
    cov_local = inside @ Gl @ inside.T
    return LocalDecomposition(
        tuple(v), offs, F, 0.5 * (cov_binding + cov_binding.T), 0.5 * (cov_local + cov_local.T), inside, Gl
    )
