"""Adaptive learning in random p-player games.

Simulation of logit learning on correlated Gaussian payoff ensembles,
attractor classification, and an independent self-consistent prediction of
the stability boundary, plus a sweep CLI that compares the two.
"""

from .classify import (
    AttractorKind,
    AttractorReport,
    ClassifierConfig,
    classify,
    convergence_fraction,
    multiplicity_study,
)
from .dynamics import (
    IntegrationError,
    StrategyProfile,
    Trajectory,
    autocorrelation,
    diff_series,
    ewa_step,
    init_random,
    integrate_sc,
    payoff_sum_series,
    run_map,
    sc_derivative,
)
from .ensemble import (
    GameParams,
    PayoffTensor,
    ResourceError,
    expected_payoff_vector,
    generate_payoffs,
    load_tensor,
    save_tensor,
)
from .theory import (
    BoundaryRangeError,
    NoFixedPointError,
    OrderParameters,
    QuadratureRule,
    TheoryPoint,
    critical_inverse_r,
    dx_dz,
    gamma0_boundary,
    gamma0_order_parameters,
    is_stable,
    lambert_w,
    large_p_targets,
    solve_order_parameters,
    stability_lhs,
    unstable_area,
    x_of_z,
)

__version__ = "0.1.0"

__all__ = [
    "AttractorKind",
    "AttractorReport",
    "BoundaryRangeError",
    "ClassifierConfig",
    "GameParams",
    "IntegrationError",
    "NoFixedPointError",
    "OrderParameters",
    "PayoffTensor",
    "QuadratureRule",
    "ResourceError",
    "StrategyProfile",
    "TheoryPoint",
    "Trajectory",
    "autocorrelation",
    "classify",
    "convergence_fraction",
    "critical_inverse_r",
    "diff_series",
    "dx_dz",
    "ewa_step",
    "expected_payoff_vector",
    "gamma0_boundary",
    "gamma0_order_parameters",
    "generate_payoffs",
    "init_random",
    "integrate_sc",
    "is_stable",
    "lambert_w",
    "large_p_targets",
    "load_tensor",
    "multiplicity_study",
    "payoff_sum_series",
    "run_map",
    "save_tensor",
    "sc_derivative",
    "solve_order_parameters",
    "stability_lhs",
    "unstable_area",
    "x_of_z",
]
