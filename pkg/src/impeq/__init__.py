"""
impeq: equilibria of stochastic concurrent games under imprecise deviations.

Exact rational checkers and constructors for Nash, ε-Nash and ε-imprecise
equilibria of multiplayer terminal-reward games, plus an SMT-LIB encoding of
the constrained existence problem.
"""

__version__ = "0.1.0"
__author__ = "impeq developers"

from .data import parse_game, parse_profile
from .models import Game, StationaryProfile
from .solvers import check_imprecise, compute_equilibrium, evaluate_profile
from .utils import setup_logging

__all__ = [
    "parse_game",
    "parse_profile",
    "Game",
    "StationaryProfile",
    "evaluate_profile",
    "check_imprecise",
    "compute_equilibrium",
    "setup_logging",
    "__version__",
    "__author__",
]
