"""Numerical side: grid potentials, Legendre duals, the Ding functionals and experiments."""

from .config import DEFAULT_TOL, ExperimentConfig, Tolerances, grid_resolution, load_experiment_config
from .ding import (
    DingTerms,
    RicciDensity,
    d_a,
    ding_linear,
    ding_terms,
    j_toric,
    log_partition,
    log_partition_cov,
    modified_ding,
    nonlinear_term,
    reference_potential,
    ricci_density,
)
from .duality import DualPotential, legendre_dual, support_integral, support_integral_by_cones
from .experiments import (
    Family,
    MinimizeResult,
    ProbeResult,
    discrete_ding,
    minimize_ding,
    pseudo_bound_probe,
    random_family,
    reference_normalized,
    scaling_family,
    spike_family,
    spike_sequence,
)
from .potentials import (
    DiscretePotential,
    GridCoverageWarning,
    PolytopeGrid,
    SmoothPotential,
    convexity_defect,
    from_pl,
    from_smooth,
    guillemin_potential,
    lower_envelope,
    normalize,
    project_convex,
    random_normalized_potential,
    smooth_potential,
    zero_potential,
)

__all__ = [name for name in dir() if not name.startswith("_")]
