"""
Seeded game generators for property suites and formula-size measurements.
"""

import itertools
from fractions import Fraction
from typing import Dict, List, Tuple

import numpy as np

from ..exceptions import PreconditionError
from ..models.game import Action, Arena, Distribution, Game, JointAction, Player, State
from ..utils.logging_utils import setup_logging

logger = setup_logging(__name__)

DENOMINATORS = (1, 2, 4)


def _random_distribution(rng: np.random.Generator, states: List[State]) -> Distribution:
    denominator = int(rng.choice(DENOMINATORS))
    size = int(rng.integers(1, min(2, len(states)) + 1))
    support = rng.choice(len(states), size=size, replace=False)
    counts = rng.multinomial(denominator, [1 / size] * size)
    return Distribution(
        {states[int(k)]: Fraction(int(c), denominator) for k, c in zip(support, counts) if c > 0}
    )


def _random_reward(rng: np.random.Generator, non_negative: bool) -> Fraction:
    denominator = int(rng.choice(DENOMINATORS))
    low = 0 if non_negative else -denominator
    return Fraction(int(rng.integers(low, denominator + 1)), denominator)


def random_game(
    seed: int,
    states: int = 4,
    players: int = 2,
    finals: int = 2,
    single_action_rate: float = 0.25,
    non_negative: bool = False,
) -> Game:
    """
    Random two-action game with small-denominator probabilities and rewards.

    Each non-final state lets every player choose between ``a`` and ``b``,
    except that with probability ``single_action_rate`` a player only has
    ``a``. Every joint action moves to one or two states with probabilities
    whose denominator is 1, 2 or 4. Rewards lie in [-1, 1] (or [0, 1] with
    ``non_negative``) with the same denominators.

    Args:
        seed: Seed of the numpy Generator
        states: Total number of states, finals included
        players: Number of players
        finals: Number of final states
        single_action_rate: Chance that a player has a single action at a state
        non_negative: Draw rewards from [0, 1] only

    Returns:
        Game: A valid game whose finals are Dirac sinks
    """
    if not 1 <= finals < states:
        raise PreconditionError("need at least one final and one non-final state")
    if players < 1:
        raise PreconditionError("need at least one player")
    rng = np.random.default_rng(seed)
    names = [f"s{k}" for k in range(states - finals)] + [f"f{k}" for k in range(finals)]
    final_names = names[states - finals:]
    player_names = [str(k + 1) for k in range(players)]
    actions: Tuple[Action, ...] = ("a", "b")

    allow: Dict[Tuple[State, Player], Tuple[Action, ...]] = {}
    tab: Dict[Tuple[State, JointAction], Distribution] = {}
    for s in names:
        for i in player_names:
            single = s in final_names or rng.random() < single_action_rate
            allow[(s, i)] = actions[:1] if single else actions
        for joint in itertools.product(*(allow[(s, i)] for i in player_names)):
            if s in final_names:
                tab[(s, joint)] = Distribution.dirac(s)
            else:
                tab[(s, joint)] = _random_distribution(rng, names)

    rewards = {
        f: {i: _random_reward(rng, non_negative) for i in player_names} for f in final_names
    }
    game = Game(
        arena=Arena(
            states=tuple(names),
            players=tuple(player_names),
            actions=actions,
            allow=allow,
            tab=tab,
        ),
        rewards=rewards,
        finals=frozenset(final_names),
    )
    logger.debug(f"Generated random game from seed {seed}")
    return game


def chain_game(n: int) -> Game:
    """
    Chain of ``n`` two-player coordination states with non-negative rewards.

    At ``c<k>`` matching on ``a`` advances (from the last state to ``goal``),
    matching on ``b`` stops, and a mismatch advances or stops with
    probability 1/2 each. ``goal`` pays (1, 1/2) and ``stop`` pays (1/2, 1).
    """
    if n < 1:
        raise PreconditionError("chain length must be at least 1")
    chain = [f"c{k}" for k in range(n)]
    names = chain + ["goal", "stop"]
    players = ("1", "2")
    actions = ("a", "b")
    allow: Dict[Tuple[State, Player], Tuple[Action, ...]] = {}
    tab: Dict[Tuple[State, JointAction], Distribution] = {}
    for k, s in enumerate(chain):
        following = chain[k + 1] if k + 1 < n else "goal"
        for i in players:
            allow[(s, i)] = actions
        tab[(s, ("a", "a"))] = Distribution.dirac(following)
        tab[(s, ("b", "b"))] = Distribution.dirac("stop")
        half = Fraction(1, 2)
        tab[(s, ("a", "b"))] = Distribution({following: half, "stop": half})
        tab[(s, ("b", "a"))] = Distribution({following: half, "stop": half})
    for f in ("goal", "stop"):
        for i in players:
            allow[(f, i)] = actions[:1]
        tab[(f, ("a", "a"))] = Distribution.dirac(f)
    return Game(
        arena=Arena(states=tuple(names), players=players, actions=actions, allow=allow, tab=tab),
        rewards={
            "goal": {"1": Fraction(1), "2": Fraction(1, 2)},
            "stop": {"1": Fraction(1, 2), "2": Fraction(1)},
        },
        finals=frozenset(["goal", "stop"]),
    )
