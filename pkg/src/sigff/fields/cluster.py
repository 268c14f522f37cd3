"""Rejection samplers for the shape of the field around a local maximum."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, DomainError, SamplingError
from ..greenfn import green_table, potential_kernel_table
from ..lattice import l1_offsets
from ..sampler import GaussianLaw, RngStream, factorize

__all__ = ["ClusterDraws", "sample_cluster_law", "pinned_covariance", "CLUSTER_CAP"]

CLUSTER_CAP = 8


@dataclass(frozen=True)
class ClusterDraws:
    """Accepted shapes ``theta[i, k]`` at ``offsets[k]`` (origin first, so ``theta[:, 0] == 0``)."""

    offsets: np.ndarray
    theta: np.ndarray
    proposals: int
    accepted: int
    mode: str

    @property
    def acceptance_rate(self) -> float:
        """Accepted fraction over every proposal made, including surplus acceptances."""
        return self.accepted / self.proposals if self.proposals else 0.0


def pinned_covariance(offsets: np.ndarray):
    """Covariance a(x) + a(y) - a(x - y) of the field pinned to zero at the origin."""
    rmax = int(np.abs(offsets).max()) if len(offsets) else 0
    table = potential_kernel_table(max(2 * rmax, 1))
    c = table.shape[0] // 2
    ax = table[c + offsets[:, 0], c + offsets[:, 1]]
    d = offsets[:, None, :] - offsets[None, :, :]
    axy = table[c + d[..., 0], c + d[..., 1]]
    return ax, ax[:, None] + ax[None, :] - axy


def _run(propose, accept, count, budget, batch, mode):
    kept = []
    used = 0
    n_ok = 0
    while n_ok < count and used < budget:
        k = min(batch, budget - used)
        x = propose(k)
        ok = accept(x)
        used += k
        kept.append(x[ok])
        n_ok += int(ok.sum())
    if n_ok < count:
        rate = n_ok / used if used else 0.0
        raise SamplingError(
            f"{mode}: {n_ok} of {count} samples accepted after {used} proposals "
            f"(acceptance rate {rate:.3g})",
            acceptance_rate=rate,
        )
    return np.concatenate(kept)[:count], used, n_ok


def sample_cluster_law(
    r: int,
    sigma1: float,
    stream: RngStream,
    count: int = 1,
    t: float = 0.0,
    mode: str = "pinned-limit",
    M: int | None = None,
    budget: int = 100_000,
    cap: int = CLUSTER_CAP,
    strict: bool = True,
) -> ClusterDraws:
    """Draw ``count`` cluster shapes on the l1 window of radius ``r``.

    ``pinned-limit``: the field pinned to zero at the origin, shifted by
    ``2 sigma1 a(x)``, conditioned to be nonnegative on the window.

    ``finite-M``: ``sigma1`` times a DGFF on the l1 ball of radius ``M``
    (default: the smallest power of two above ``r``), conditioned on the
    origin taking the value ``2 sigma1^2 log M + t`` and being the maximum
    of the ball; the shape is the gap to the origin value.
    """
    if not 1 <= r <= cap:
        raise DomainError(f"window radius {r} outside [1, {cap}]")
    if strict and sigma1 <= 1.0:
        raise ConfigurationError(f"sigma(1) = {sigma1} must exceed 1 in strict mode")
    offsets = l1_offsets(r)
    rest = offsets[1:]
    batch = max(256, 2 * count)

    if mode == "pinned-limit":
        a, C = pinned_covariance(rest)
        law = GaussianLaw(2.0 * sigma1 * a, C)
        F = law.factor

        def propose(k):
            return law.mean + stream.normal((k, len(rest))) @ F.T

        def accept(x):
            return (x >= 0.0).all(axis=1)

        x, used, n_ok = _run(propose, accept, count, budget, batch, mode)
        theta = np.concatenate([np.zeros((count, 1)), x], axis=1)
        return ClusterDraws(offsets, theta, used, n_ok, mode)

    if mode == "finite-M":
        if M is None:
            M = 1 << (int(r).bit_length())
        if M < r:
            raise DomainError(f"ball radius M={M} is smaller than the window r={r}")
        ball = l1_offsets(M)
        gt = green_table([tuple(p) for p in ball.tolist()])
        order = [gt.index(tuple(p)) for p in ball.tolist()]
        G = gt.matrix[np.ix_(order, order)]
        top = (2.0 * sigma1**2 * math.log(M) + t) / sigma1
        g0 = G[1:, 0] / G[0, 0]
        cond_mean = top * g0
        cond_cov = G[1:, 1:] - np.outer(G[1:, 0], G[0, 1:]) / G[0, 0]
        F = factorize(0.5 * (cond_cov + cond_cov.T))[0]
        where = {tuple(o): i for i, o in enumerate(ball.tolist())}
        win = np.array([where[tuple(o)] - 1 for o in rest.tolist()], dtype=int)

        def propose(k):
            return cond_mean + stream.normal((k, len(ball) - 1)) @ F.T

        def accept(x):
            return (x <= top).all(axis=1)

        x, used, n_ok = _run(propose, accept, count, budget, batch, mode)
        theta = np.concatenate([np.zeros((count, 1)), sigma1 * (top - x[:, win])], axis=1)
        return ClusterDraws(offsets, theta, used, n_ok, mode)

    raise ConfigurationError(f"unknown cluster mode {mode!r}")
