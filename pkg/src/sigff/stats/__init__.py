"""Estimators and empirical checks."""

from .common import Estimate, Proportion, wilson
from .distances import distance, dominance_distance, kolmogorov, levy_prokhorov_1d
from .events import (
    LevelSetReport,
    level_set_bound_check,
    level_set_first_moment,
    localization_frequency,
    localization_outcomes,
    separation_frequency,
    separation_hits,
)
from .laplace import f_t_transform, laplace_functional, test_function
from .profiles import ClusterProfile, CountReport, cluster_profile, poisson_diagnostics
from .tails import RateFit, tail_rate_fit

__all__ = [
    "Estimate",
    "Proportion",
    "wilson",
    "distance",
    "dominance_distance",
    "kolmogorov",
    "levy_prokhorov_1d",
    "LevelSetReport",
    "level_set_bound_check",
    "level_set_first_moment",
    "localization_frequency",
    "separation_frequency",
    "separation_hits",
    "localization_outcomes",
    "f_t_transform",
    "laplace_functional",
    "test_function",
    "ClusterProfile",
    "CountReport",
    "cluster_profile",
    "poisson_diagnostics",
    "RateFit",
    "tail_rate_fit",
]
