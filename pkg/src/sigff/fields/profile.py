"""Piecewise-constant variance profiles over scales."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, DomainError

__all__ = ["VarianceProfile"]


@dataclass(frozen=True)
class VarianceProfile:
    """Step function sigma^2 on [0, 1].

    Parameters
    ----------
    breakpoints : sequence of float
        ``0 = l_0 < l_1 < ... < l_M = 1``.
    sigma2 : sequence of float
        Value of sigma^2 on ``[l_{i-1}, l_i)``; ``len(sigma2) == M``.
    override : bool
        Skip the strict regime checks (I(x) < x on (0, 1), sigma(0) < 1 <
        sigma(1)).  The normalization I(1) = 1 is always enforced.
    """

    breakpoints: tuple
    sigma2: tuple
    override: bool = False

    def __post_init__(self):
        bp = tuple(float(x) for x in self.breakpoints)
        s2 = tuple(float(x) for x in self.sigma2)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "sigma2", s2)
        if len(bp) != len(s2) + 1 or len(s2) < 1:
            raise ConfigurationError("need one more breakpoint than sigma^2 values")
        if bp[0] != 0.0 or bp[-1] != 1.0 or any(b <= a for a, b in zip(bp, bp[1:])):
            raise ConfigurationError(f"breakpoints must increase from 0 to 1, got {bp}")
        if any(s < 0 or not math.isfinite(s) for s in s2):
            raise ConfigurationError("sigma^2 values must be finite and nonnegative")
        total = math.fsum(s * (b - a) for s, a, b in zip(s2, bp, bp[1:]))
        if abs(total - 1.0) > 1e-12:
            raise ConfigurationError(f"profile integrates to {total}, not 1")
        if not self.override:
            problem = self.strict_violation()
            if problem:
                raise ConfigurationError(f"profile fails strict validation: {problem}")

    @classmethod
    def homogeneous(cls) -> "VarianceProfile":
        return cls((0.0, 1.0), (1.0,), override=True)

    @classmethod
    def two_scale(cls, low: float = 0.5, high: float = 1.5, split: float = 0.5, override=False):
        return cls((0.0, split, 1.0), (low, high), override=override)

    def strict_violation(self) -> str | None:
        """Describe the first violated regime condition, or None."""
        if self.sigma2[0] >= 1.0:
            return f"sigma^2(0) = {self.sigma2[0]} is not < 1"
        if self.sigma2[-1] <= 1.0:
            return f"sigma^2(1) = {self.sigma2[-1]} is not > 1"
        # I(x) - x is piecewise linear, so interior breakpoints decide; the
        # grid is a cheap second look
        pts = list(self.breakpoints[1:-1]) + list(np.linspace(0, 1, 1001)[1:-1])
        for x in pts:
            if self.integral(0.0, x) >= x:
                return f"I({x:.4g}) = {self.integral(0.0, x):.6g} is not < {x:.4g}"
        return None

    @property
    def sigma2_start(self) -> float:
        return self.sigma2[0]

    @property
    def sigma2_end(self) -> float:
        return self.sigma2[-1]

    def _piece(self, x: float) -> int:
        i = int(np.searchsorted(self.breakpoints, x, side="right")) - 1
        return min(max(i, 0), len(self.sigma2) - 1)

    def sigma2_at(self, x: float) -> float:
        if not 0.0 <= x <= 1.0:
            raise DomainError(f"scale {x} outside [0, 1]")
        return self.sigma2[self._piece(x)]

    def _integrate(self, a, b, vals):
        if not 0.0 <= a <= b <= 1.0:
            raise DomainError(f"need 0 <= a <= b <= 1, got ({a}, {b})")
        total = []
        for v, lo, hi in zip(vals, self.breakpoints, self.breakpoints[1:]):
            left, right = max(a, lo), min(b, hi)
            if right > left:
                total.append(v * (right - left))
        return math.fsum(total)

    def integral(self, a: float, b: float) -> float:
        """Integral of sigma^2 over [a, b]."""
        return self._integrate(a, b, self.sigma2)

    def sigma_integral(self, a: float, b: float) -> float:
        """Integral of sigma = sqrt(sigma^2) over [a, b]."""
        return self._integrate(a, b, [math.sqrt(s) for s in self.sigma2])

    def I(self, x: float) -> float:
        return self.integral(0.0, x)

    def digest(self) -> str:
        text = repr((self.breakpoints, self.sigma2))
        return hashlib.sha256(text.encode()).hexdigest()[:16]
