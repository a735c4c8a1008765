"""Simulator for proportional-share markets of distributed machines.

Users bid a fixed budget across machines and receive each machine in
proportion to their bid.  The package computes best responses, social
optima, equilibrium dynamics and the efficiency / fairness metrics used
to judge them.
"""
from ._backend import available as available_backends, set_backend
from .dynamics import (
    ConvergenceCriterion,
    DynamicsTrace,
    EquilibriumCertificate,
    check_equilibrium,
    init_bids_weight_proportional,
    run_dynamics,
)
from .errors import (
    DimensionError,
    GameError,
    IndifferentUserError,
    ParameterError,
    StrategyError,
    UnboundedMarginalError,
)
from .experiments import (
    ScenarioConfig,
    SweepResult,
    emit_csv,
    emit_plot_series,
    run_scenario,
    run_sweep,
    weight_proportional_allocation,
)
from .game import (
    GameConfig,
    compute_allocation,
    compute_prices,
    user_utilities,
    utility_finite,
    utility_linear,
    validate_bids,
    validate_preferences,
    validate_strong_competitiveness,
)
from .metrics import MetricsReport, efficiency, envy_freeness, envy_ratio, evaluate, utility_uniformity
from .optimum import (
    optimum_allocation,
    optimum_value,
    social_optimum_finite,
    social_optimum_infinite,
    two_player_equal_weight_equilibrium,
    two_player_opposite_equilibria,
    utility_floor_bid,
    worst_case_instance,
)
from .preferences import PreferenceModel, generate_correlated_preferences, generate_uniform_preferences
from .strategies import (
    GreedyParams,
    best_response_infinite,
    best_response_on_subset,
    greedy_adjust_step,
    local_search_finite,
)

__version__ = "0.1.0"


def backend() -> str:
    """Name of the active kernel backend ("cython" or "python")."""
    from . import _backend

    return _backend.name
