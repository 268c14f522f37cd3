"""Seeded random streams and a small multivariate Gaussian toolkit."""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DomainError, NumericError

__all__ = ["RngStream", "GaussianLaw", "gaussian_sample", "condition_gaussian", "factorize"]

log = logging.getLogger(__name__)

JITTER = 1e-10


class RngStream:
    """Counter-based generator keyed by a root seed and a derivation path.

    The key is a hash of the seed and every path label, so a stream is fully
    determined by ``(seed, path)`` and does not depend on which other streams
    were created before it.

    >>> a = RngStream(7, ("tail", "block", 0))
    >>> b = RngStream(7, ("tail", "block", 0))
    >>> bool(a.normal() == b.normal())
    True
    """

    def __init__(self, seed: int, path=()):
        if not 0 <= int(seed) < 2**64:
            raise DomainError(f"seed must fit in 64 bits, got {seed}")
        self.seed = int(seed)
        self.path = tuple(path)
        h = hashlib.sha256(repr((self.seed, self.path)).encode()).digest()
        key = np.frombuffer(h[:16], dtype="<u8").copy()
        self.generator = np.random.Generator(np.random.Philox(key=key))

    def child(self, *labels) -> "RngStream":
        return RngStream(self.seed, self.path + tuple(labels))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, path={self.path!r})"

    # thin passthroughs keep call sites short
    def normal(self, size=None):
        return self.generator.standard_normal(size)

    def uniform(self, size=None):
        return self.generator.random(size)

    def exponential(self, scale=1.0, size=None):
        return self.generator.exponential(scale, size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size)


def factorize(cov: np.ndarray):
    """Return ``(F, jitter)`` with ``F @ F.T`` equal to ``cov`` (plus ``jitter`` on the diagonal).

    Cholesky is tried first, then Cholesky with a diagonal jitter of
    ``1e-10 * trace / dim``, then a clipped eigendecomposition when the
    matrix is PSD up to rounding.
    """
    cov = np.asarray(cov, dtype=float)
    n = cov.shape[0]
    if n == 0 or not np.any(cov):
        return np.zeros_like(cov), 0.0
    try:
        return np.linalg.cholesky(cov), 0.0
    except np.linalg.LinAlgError:
        pass
    jitter = JITTER * float(np.trace(cov)) / n
    try:
        F = np.linalg.cholesky(cov + jitter * np.eye(n))
        log.info("cholesky needed diagonal jitter %.3g", jitter)
        return F, jitter
    except np.linalg.LinAlgError:
        pass
    w, U = scipy.linalg.eigh(cov)
    scale = max(abs(w[-1]), 1e-300)
    if w[0] < -1e-9 * scale:
        raise NumericError(
            f"covariance is not PSD: smallest eigenvalue {w[0]:.3e}, "
            f"largest {w[-1]:.3e}, condition {abs(w[-1] / w[0]):.3e}"
        )
    log.info("using eigendecomposition for a singular covariance")
    return U * np.sqrt(np.clip(w, 0.0, None)), 0.0


@dataclass(frozen=True)
class GaussianLaw:
    """Mean vector and covariance matrix; the factor is computed once on demand."""

    mean: np.ndarray
    cov: np.ndarray
    _factor: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise DomainError(f"covariance shape {cov.shape} does not match mean {mean.shape}")
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(cov).max())):
            raise DomainError("covariance is not symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @classmethod
    def centred(cls, cov):
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        return cls(np.zeros(cov.shape[0]), cov)

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def factor(self) -> np.ndarray:
        if not self._factor:
            self._factor.append(factorize(self.cov)[0])
        return self._factor[0]


def gaussian_sample(law: GaussianLaw, stream: RngStream, size: int | None = None) -> np.ndarray:
    """One draw (or ``size`` draws stacked along axis 0) from ``law``."""
    F = law.factor
    if size is None:
        return law.mean + F @ stream.normal(law.dim)
    z = stream.normal((size, law.dim))
    return law.mean + z @ F.T


def condition_gaussian(law: GaussianLaw, observed: dict) -> GaussianLaw:
    """Conditional law given ``observed`` coordinates.

    The result keeps the full dimension: observed coordinates get their
    observed value as mean and zero variance, so repeated conditioning
    composes.
    """
    if not observed:
        return law
    idx = np.array(sorted(observed), dtype=int)
    if idx.min() < 0 or idx.max() >= law.dim:
        raise DomainError(f"observed index out of range for dimension {law.dim}")
    vals = np.array([observed[i] for i in idx], dtype=float)
    free = np.setdiff1d(np.arange(law.dim), idx)
    S = law.cov
    S_oo = S[np.ix_(idx, idx)]
    S_fo = S[np.ix_(free, idx)]
    try:
        c = scipy.linalg.cho_factor(S_oo, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise NumericError(f"observed block is singular: {exc}") from exc
    K = scipy.linalg.cho_solve(c, S_fo.T).T
    mean = law.mean.copy()
    mean[free] = law.mean[free] + K @ (vals - law.mean[idx])
    mean[idx] = vals
    cov = np.zeros_like(S)
    cf = S[np.ix_(free, free)] - K @ S_fo.T
    cov[np.ix_(free, free)] = 0.5 * (cf + cf.T)
    return GaussianLaw(mean, cov)
