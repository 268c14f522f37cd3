"""Exponential tail-rate estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from ..errors import DomainError, StatisticalError

__all__ = ["RateFit", "tail_rate_fit"]

MIN_SAMPLES = 30


@dataclass(frozen=True)
class RateFit:
    rate: float
    se: float
    window: tuple
    n: int
    method: str


def _survival_slope(x, w, grid):
    tot = w.sum()
    surv = np.array([w[x >= y].sum() / tot for y in grid])
    ok = surv > 0
    if ok.sum() < 2:
        raise StatisticalError("fewer than two grid points with positive survival")
    return -np.polyfit(grid[ok], np.log(surv[ok]), 1)[0]


def _trunc_mean(lam, width):
    # mean of an exponential with rate lam truncated to [0, width]; lam may be <= 0
    if abs(lam * width) < 1e-8:
        return width / 2 - lam * width * width / 12
    return 1.0 / lam - width / math.expm1(lam * width)


def _trunc_var(lam, width):
    if abs(lam * width) < 1e-6:
        return width * width / 12
    e = math.expm1(lam * width)
    return 1.0 / lam**2 - width * width * (e + 1) / e**2


def tail_rate_fit(samples, window, mode: str = "survival", weights=None, groups: int = 20) -> RateFit:
    """Fit an exponential decay rate to the samples on ``window = (y0, y1)``.

    ``survival`` regresses the log empirical survival function on a grid of
    the window; its standard error comes from a grouped jackknife.
    ``density`` is the maximum likelihood rate of an exponential law
    truncated to the window, with the Fisher-information standard error.
    """
    x = np.asarray(samples, dtype=float).ravel()
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float).ravel()
    y0, y1 = map(float, window)
    if not y1 > y0:
        raise DomainError(f"empty window {window}")
    inband = (x >= y0) & (x <= y1)
    n = int(inband.sum())
    if n < MIN_SAMPLES:
        raise StatisticalError(f"only {n} samples in window {window}, need {MIN_SAMPLES}")
    if np.ptp(x[inband]) == 0.0:
        raise StatisticalError("all samples in the window are equal; the fit is degenerate")

    if mode == "survival":
        grid = np.linspace(y0, y1, 21)
        rate = _survival_slope(x, w, grid)
        ids = np.arange(len(x)) % groups
        reps = np.array([_survival_slope(x[ids != g], w[ids != g], grid) for g in range(groups)])
        se = math.sqrt((groups - 1) / groups * np.sum((reps - reps.mean()) ** 2))
        return RateFit(float(rate), float(se), (y0, y1), n, "survival")

    if mode == "density":
        width = y1 - y0
        ws = w[inband]
        mean = float(np.sum(ws * (x[inband] - y0)) / ws.sum())
        lo, hi = -200.0 / width, 200.0 / width
        rate = optimize.brentq(lambda lam: _trunc_mean(lam, width) - mean, lo, hi, xtol=1e-14)
        n_eff = ws.sum() ** 2 / np.sum(ws**2)
        se = 1.0 / math.sqrt(n_eff * _trunc_var(rate, width))
        return RateFit(float(rate), float(se), (y0, y1), n, "density")

    raise DomainError(f"unknown fit mode {mode!r}")
