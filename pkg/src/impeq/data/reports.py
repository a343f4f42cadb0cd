"""
JSON payloads shared by the command line and the HTTP service.
"""

from fractions import Fraction
from typing import Any, Dict, Optional

from ..models.game import Game, Player, State
from ..models.strategy import StationaryProfile
from ..solvers.deviation_game import imprecise_deviation_value, turn_based_deviation_value
from ..solvers.payoff import evaluate_profile
from ..solvers.structure import cycling_states
from ..utils.config_utils import SolverSettings
from ..utils.validation_utils import format_rational

VALUE_METHODS = ("ball", "turn-based")


def validation_payload(game: Game) -> Dict[str, Any]:
    """Summary of a game that parsed and validated."""
    cycling = cycling_states(game)
    return {
        "valid": True,
        "states": len(game.states),
        "players": list(game.players),
        "actions": list(game.actions),
        "finals": [s for s in game.states if s in game.finals],
        "max_allowed_actions": game.max_allowed_actions(),
        "cycle_free": not cycling,
        "reward_shift": format_rational(max(Fraction(0), -game.min_reward())),
    }


def payoff_payload(
    game: Game, profile: StationaryProfile, s0: Optional[State] = None
) -> Dict[str, Any]:
    payoffs = evaluate_profile(game, profile)
    payload: Dict[str, Any] = {"payoffs": payoffs.to_dict()}
    if s0 is not None:
        game.require_state(s0)
        payload["state"] = s0
        payload["at_state"] = {i: format_rational(v) for i, v in payoffs.at_state(s0).items()}
    return payload


def deviation_payload(
    game: Game,
    profile: StationaryProfile,
    epsilon: Fraction,
    player: Optional[Player] = None,
    method: str = "ball",
    settings: Optional[SolverSettings] = None,
) -> Dict[str, Any]:
    """
    Deviation values v_{ε,i} of one or all players.

    Args:
        method: "ball" (ε-ball best response) or "turn-based" (explicit
            deviation game, two actions per state at most)
    """
    if method not in VALUE_METHODS:
        raise ValueError(f"unknown value method {method!r}; expected ball or turn-based")
    settings = settings or SolverSettings()
    players = [player] if player is not None else list(game.players)
    values = {}
    for i in players:
        if i not in game.players:
            raise ValueError(f"unknown player {i}")
        if method == "ball":
            value = imprecise_deviation_value(
                game,
                profile,
                i,
                epsilon,
                settings.strategy.max_vertex_actions,
                settings.payoff.enumeration_threshold,
            )
        else:
            value = turn_based_deviation_value(
                game, profile, i, epsilon, settings.deviation_game.enumeration_threshold
            )
        values[i] = value
    return {
        "epsilon": format_rational(Fraction(epsilon)),
        "method": method,
        "values": {i: value.to_dict() for i, value in values.items()},
    }
