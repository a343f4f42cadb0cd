"""
Shared helpers for loading the example games and profiles under fixtures/.
"""

from fractions import Fraction
from pathlib import Path

from src.impeq.data.game_parser import parse_game
from src.impeq.data.profile_parser import parse_profile
from src.impeq.models.game import Game
from src.impeq.models.strategy import StationaryProfile, make_profile

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def game_path(name: str) -> Path:
    return FIXTURES / f"{name}.json"


def profile_path(name: str) -> Path:
    return FIXTURES / "profiles" / f"{name}.json"


def load_game(name: str) -> Game:
    return parse_game(game_path(name).read_text(encoding="utf-8"))


def load_profile(game: Game, name: str) -> StationaryProfile:
    return parse_profile(profile_path(name).read_text(encoding="utf-8"), game)


def random_row(rng, actions):
    """Random distribution over ``actions`` with denominators up to 30."""
    weights = rng.integers(0, 6, size=len(actions))
    weights[rng.integers(len(actions))] += 1
    total = int(weights.sum())
    return {a: Fraction(int(w), total) for a, w in zip(actions, weights) if w}


def random_profile(game: Game, rng) -> StationaryProfile:
    """Profile with an independent random row at every non-final state."""
    return make_profile(
        game,
        {
            i: {s: random_row(rng, game.allowed(s, i)) for s in game.non_final_states}
            for i in game.players
        },
    )
