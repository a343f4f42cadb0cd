"""
Core data types: games, strategies and solver results.
"""

from .game import Arena, Distribution, Game
from .results import (
    DeviationValue,
    DeviationWitness,
    EquilibriumVerdict,
    MonteCarloEstimate,
    PayoffVector,
    VerdictKind,
)
from .strategy import (
    BallSpec,
    DeltaEpsilonSpec,
    StationaryProfile,
    StationaryStrategy,
    ball_vertices,
    delta_epsilon_vertices,
    distance,
    enumerate_pure_memoryless,
    in_ball,
    in_delta_epsilon,
    make_profile,
    make_strategy,
    project_to_delta_epsilon,
    pure_profile,
    simplex_vertices,
    uniform_profile,
)

__all__ = [
    "Arena",
    "Distribution",
    "Game",
    "BallSpec",
    "DeltaEpsilonSpec",
    "StationaryProfile",
    "StationaryStrategy",
    "ball_vertices",
    "delta_epsilon_vertices",
    "distance",
    "enumerate_pure_memoryless",
    "in_ball",
    "in_delta_epsilon",
    "make_profile",
    "make_strategy",
    "project_to_delta_epsilon",
    "pure_profile",
    "simplex_vertices",
    "uniform_profile",
    "DeviationValue",
    "DeviationWitness",
    "EquilibriumVerdict",
    "MonteCarloEstimate",
    "PayoffVector",
    "VerdictKind",
]
