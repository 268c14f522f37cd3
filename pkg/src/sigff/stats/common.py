"""Small result containers shared by the estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import stats as _st

__all__ = ["Proportion", "Estimate", "wilson"]


@dataclass(frozen=True)
class Proportion:
    """Observed frequency with a Wilson score interval."""

    value: float
    lo: float
    hi: float
    n: int
    hits: int

    @property
    def se(self) -> float:
        if self.n == 0:
            return float("nan")
        return math.sqrt(max(self.value * (1 - self.value), 0.0) / self.n)


def wilson(hits: int, n: int, level: float = 0.95) -> Proportion:
    if n == 0:
        return Proportion(float("nan"), 0.0, 1.0, 0, 0)
    z = _st.norm.ppf(0.5 + level / 2)
    p = hits / n
    d = 1 + z * z / n
    c = (p + z * z / (2 * n)) / d
    h = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / d
    return Proportion(p, max(0.0, c - h), min(1.0, c + h), n, hits)


@dataclass(frozen=True)
class Estimate:
    value: float
    se: float
    lo: float
    hi: float
