"""Coarse geometry on finite metric spaces and finite map spaces between levels."""

from warpcone.coarse.mapspace import (
    LevelMap,
    MapSpaceLevel,
    act_on_set,
    delta_matrix,
    delta_metric,
    enumerate_map_space,
    equicontinuity_delta,
    equivariance_defect,
    fingerprint,
    gamma_act,
    gh_cauchy_diagnostic,
    lattice_keys,
    model_radius,
    orbit_level,
    restrict,
    tilde_delta_metric,
)
from warpcone.coarse.metric import (
    DiscreteMap,
    FiniteMetricSpace,
    GHResult,
    density_radius,
    distortion,
    epsilon_isometry_defect,
    gh_distance,
    gh_distance_upper,
    hausdorff_distance,
    identity_map,
    qi_constants,
    satisfies_qi,
)
