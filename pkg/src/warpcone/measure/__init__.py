"""Finite measures, the Prokhorov metric and Gaussian-increment cylinder measures."""

from warpcone.measure.cylinder import (
    CylinderSet,
    Partition,
    cylinder_frequency,
    cylinder_measure,
    delta_difference,
    energy_W,
    increments,
    integrate_increments,
    max_cube_halfside,
    normalization_K,
    sample_field,
    sample_fields,
)
from warpcone.measure.experiments import (
    InvarianceReport,
    WeakStarReport,
    field_level,
    invariance_defect_experiment,
    prokhorov_fingerprints,
    shell_elements,
    shell_mass,
    tower_invariance,
    tower_measures,
    translate_restrict,
    weak_star_diagnostic,
)
from warpcone.measure.finite import (
    FiniteMeasure,
    excess,
    prokhorov_distance,
    pushforward,
    sigma_generator_membership,
    total_variation,
)
