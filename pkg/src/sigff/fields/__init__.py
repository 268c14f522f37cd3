"""Samplers for the DGFF, the scale-inhomogeneous field and their approximations."""

from .cluster import ClusterDraws, pinned_covariance, sample_cluster_law
from .dgff import FieldSample, dgff_draws, gibbs_markov_resample, sample_dgff
from .inhomogeneous import (
    InhomogeneousOperator,
    harmonic_operator,
    inhomogeneous_operator,
    sample_inhomogeneous,
)
from .local import LocalDecomposition, binding_row, decompose_around
from .perturb import perturbed_field, smoothing_covariance, smoothing_transform, star_field
from .profile import VarianceProfile
from .threefield import (
    Calibration,
    Geometry,
    calibrate_three_field,
    middle_variance,
    sample_component,
    sample_three_field,
    three_field_variance,
)

__all__ = [
    "Calibration",
    "ClusterDraws",
    "FieldSample",
    "Geometry",
    "InhomogeneousOperator",
    "LocalDecomposition",
    "VarianceProfile",
    "binding_row",
    "calibrate_three_field",
    "decompose_around",
    "dgff_draws",
    "gibbs_markov_resample",
    "harmonic_operator",
    "inhomogeneous_operator",
    "middle_variance",
    "perturbed_field",
    "pinned_covariance",
    "sample_cluster_law",
    "sample_component",
    "sample_dgff",
    "sample_inhomogeneous",
    "sample_three_field",
    "smoothing_covariance",
    "smoothing_transform",
    "star_field",
    "three_field_variance",
]
