"""Perturbations of a sampled field: box noise, independent copies, smoothing."""

from __future__ import annotations

import math

import numpy as np

from ..errors import ConfigurationError, DomainError
from ..sampler import RngStream
from .dgff import FieldSample

__all__ = ["box_noise", "perturbed_field", "star_field", "smoothing_transform", "smoothing_covariance"]


def box_noise(N: int, side: int, stream: RngStream, count: int) -> np.ndarray:
    """One standard Gaussian per box of the given side, spread over its vertices.

    Boxes tile ``V_{floor(N/side) side}``; the leftover strip along the top and
    right edges joins the last box of its row or column.
    """
    if not 1 <= side <= N:
        raise DomainError(f"box side {side} outside [1, {N}]")
    nb = N // side
    g = stream.normal((count, nb, nb))
    idx = np.minimum(np.arange(N) // side, nb - 1)
    return g[:, idx][:, :, idx]


def perturbed_field(base: FieldSample, s1: float, s2: float, r1: int, r2: int, stream: RngStream) -> FieldSample:
    """psi_v + s1 g_{B(v, r1)} + s2 g_{B(v, N / r2)}."""
    N = base.spec.N
    if not (1 <= r1 <= N and 1 <= r2 <= N):
        raise DomainError(f"need 1 <= r1, r2 <= N, got {r1}, {r2}")
    h = base.as_batch()
    out = h.copy()
    if s1:
        out = out + s1 * box_noise(N, r1, stream.child("r1"), h.shape[0])
    if s2:
        out = out + s2 * box_noise(N, N // r2, stream.child("r2"), h.shape[0])
    heights = out if base.batched else out[0]
    return FieldSample(base.spec, heights, None, base.tag + "+box-noise")


def star_field(base: FieldSample, independent: FieldSample, norm2: float) -> FieldSample:
    """psi + sqrt(norm2 / log N) psi_tilde for an independent copy psi_tilde."""
    if base.spec != independent.spec or base.heights.shape != independent.heights.shape:
        raise ConfigurationError("fields must live on the same grid with the same batch shape")
    if norm2 < 0:
        raise DomainError("norm2 must be nonnegative")
    c = math.sqrt(norm2 / math.log(base.spec.N))
    return FieldSample(base.spec, base.heights + c * independent.heights, None, base.tag + "+star")


def _weights(N: int, t: float):
    if t < 0 or t >= math.log(N):
        raise DomainError(f"need 0 <= t < log N = {math.log(N):.4f}, got {t}")
    u = t / math.log(N)
    return math.sqrt(1.0 - u), math.sqrt(u)


def smoothing_transform(first: FieldSample, second: FieldSample, t: float) -> FieldSample:
    """sqrt(1 - t/log N) first + sqrt(t/log N) second."""
    if first.spec != second.spec or first.heights.shape != second.heights.shape:
        raise ConfigurationError("fields must live on the same grid with the same batch shape")
    a, b = _weights(first.spec.N, t)
    if b == 0.0:
        return first
    return FieldSample(first.spec, a * first.heights + b * second.heights, None, first.tag + "+smoothed")


def smoothing_covariance(cov: np.ndarray, N: int, t: float) -> np.ndarray:
    """Covariance of the smoothed field when both inputs have covariance ``cov``."""
    a, b = _weights(N, t)
    return a * a * cov + b * b * cov
