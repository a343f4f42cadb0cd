"""
Solvers for impeq: payoffs, structure, deviation games, equilibria and the
real-arithmetic encoding.
"""

from .deviation_game import (
    build_deviation_game,
    fix_coplayers,
    imprecise_deviation_value,
    solve_turn_based,
    turn_based_deviation_value,
)
from .equilibrium import (
    brute_force_search,
    check_epsilon_nash,
    check_imprecise,
    check_nash,
    compute_equilibrium,
    run_check,
)
from .etr import emit_formula, enumerate_guesses, shift_rewards, solve_with_etr
from .payoff import (
    ConstrainedActionSet,
    bounded_horizon_payoff,
    constrained_best_response,
    evaluate_profile,
    monte_carlo_estimate,
)
from .structure import (
    analyze_game,
    cycling_states,
    delta_epsilon_spec,
    exit_actions,
    lift_profile,
    make_cycle_free,
    strong_components,
    termination_bound,
)

__all__ = [
    "ConstrainedActionSet",
    "evaluate_profile",
    "bounded_horizon_payoff",
    "monte_carlo_estimate",
    "constrained_best_response",
    "analyze_game",
    "cycling_states",
    "make_cycle_free",
    "lift_profile",
    "strong_components",
    "exit_actions",
    "delta_epsilon_spec",
    "termination_bound",
    "fix_coplayers",
    "build_deviation_game",
    "solve_turn_based",
    "turn_based_deviation_value",
    "imprecise_deviation_value",
    "check_nash",
    "check_epsilon_nash",
    "check_imprecise",
    "run_check",
    "compute_equilibrium",
    "brute_force_search",
    "emit_formula",
    "enumerate_guesses",
    "shift_rewards",
    "solve_with_etr",
]
