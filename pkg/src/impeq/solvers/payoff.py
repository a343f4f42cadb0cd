"""
Expected-payoff evaluation of stationary profiles.

Exact values come from rational linear systems over the states that can
still reach a final state; everything else is worth 0. The single-controller
best response optimizes over a finite vertex set per state.
"""

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Mapping, Sequence, Set, Tuple

import numpy as np
from scipy import stats

from ..exceptions import PreconditionError, ProfileError
from ..models.game import Action, Distribution, Game, Player, State
from ..models.results import MonteCarloEstimate, PayoffVector
from ..models.strategy import (
    DEFAULT_MAX_VERTEX_ACTIONS,
    BallSpec,
    DeltaEpsilonSpec,
    StationaryProfile,
    StationaryStrategy,
    ball_vertices,
    delta_epsilon_vertices,
    simplex_vertices,
)
from ..utils.logging_utils import setup_logging
from .linear import DEFAULT_ENUMERATION_THRESHOLD, absorbing_values, optimize_policy, reaching_nodes

logger = setup_logging(__name__)

DEFAULT_CHUNK_SIZE = 4096


@dataclass(frozen=True)
class ConstrainedActionSet:
    """Finite vertex set per state that the controlled player may pick from."""

    player: Player
    vertices: Mapping[State, Tuple[Distribution, ...]]

    def __post_init__(self) -> None:
        for s, options in self.vertices.items():
            if not options:
                raise PreconditionError(f"empty action set at state {s}")

    @classmethod
    def full_simplex(cls, game: Game, i: Player) -> "ConstrainedActionSet":
        """Dirac vertices: unconstrained deviations."""
        return cls(i, {s: tuple(simplex_vertices(game, s, i)) for s in game.states})

    @classmethod
    def ball(
        cls,
        game: Game,
        center: StationaryStrategy,
        radius: Fraction,
        max_actions: int = DEFAULT_MAX_VERTEX_ACTIONS,
    ) -> "ConstrainedActionSet":
        """Vertices of the ε-ball around ``center``, state by state."""
        spec = BallSpec(center, Fraction(radius))
        return cls(
            center.player,
            {
                s: tuple(ball_vertices(game, s, center.player, spec, max_actions))
                for s in game.states
            },
        )

    @classmethod
    def delta_epsilon(cls, game: Game, i: Player, spec: DeltaEpsilonSpec) -> "ConstrainedActionSet":
        """Vertices of each state's Δ_ε-restricted simplex."""
        return cls(i, {s: tuple(delta_epsilon_vertices(game, s, i, spec)) for s in game.states})

    def check_against(self, game: Game) -> None:
        for s in game.states:
            options = self.vertices.get(s)
            if not options:
                raise PreconditionError(f"empty action set at state {s}")
            allowed = game.allowed(s, self.player)
            for option in options:
                if not option.support() <= set(allowed):
                    raise ProfileError(f"vertex {option} uses an action not allowed at {s}")


def profile_transitions(game: Game, profile: StationaryProfile) -> Dict[State, Distribution]:
    """One-step state distribution of every non-final state."""
    return {s: profile.step(game, s) for s in game.non_final_states}


def zero_reach_states(game: Game, profile: StationaryProfile) -> Set[State]:
    """
    Non-final states from which no final state is reachable under the profile.

    Computed by backward reachability on the support graph.
    """
    transitions = profile_transitions(game, profile)
    reach = reaching_nodes(transitions, sorted(game.finals))
    return {s for s in game.non_final_states if s not in reach}


def _terminal_vectors(game: Game) -> Dict[State, List[Fraction]]:
    return {f: [game.reward(f, i) for i in game.players] for f in game.finals}


def _as_payoff_vector(game: Game, values: Mapping[State, Sequence[Fraction]]) -> PayoffVector:
    return PayoffVector(
        {
            (i, s): values[s][k]
            for k, i in enumerate(game.players)
            for s in game.states
        }
    )


def evaluate_profile(game: Game, profile: StationaryProfile) -> PayoffVector:
    """
    Exact expected terminal reward of every player from every state.

    Args:
        game: Game
        profile: Stationary profile

    Returns:
        PayoffVector: ν at finals, 0 on zero-reach states, the unique solution
        of the Bellman equations elsewhere
    """
    profile.validate(game)
    values = absorbing_values(
        profile_transitions(game, profile), _terminal_vectors(game), len(game.players)
    )
    return _as_payoff_vector(game, values)


def bounded_horizon_payoff(game: Game, profile: StationaryProfile, horizon: int) -> PayoffVector:
    """
    Expected reward counting only runs absorbed within ``horizon`` steps.

    Args:
        game: Game
        profile: Stationary profile
        horizon: Number of steps (0 means only runs starting in a final state)

    Returns:
        PayoffVector: Truncated expected payoffs
    """
    if horizon < 0:
        raise PreconditionError("horizon must be non-negative")
    transitions = profile_transitions(game, profile)
    width = len(game.players)
    values: Dict[State, List[Fraction]] = {s: [Fraction(0)] * width for s in game.states}
    values.update(_terminal_vectors(game))
    for _ in range(horizon):
        updated = dict(values)
        for s, dist in transitions.items():
            updated[s] = [
                sum((p * values[t][k] for t, p in dist.items()), Fraction(0))
                for k in range(width)
            ]
        values = updated
    return _as_payoff_vector(game, values)


def monte_carlo_estimate(
    game: Game,
    profile: StationaryProfile,
    s0: State,
    samples: int,
    horizon: int,
    seed: int,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    confidence: float = 0.95,
) -> MonteCarloEstimate:
    """
    Sample runs of the profile and estimate every player's payoff.

    Runs are simulated in fixed-size chunks; chunk ``c`` draws from a Philox
    stream keyed by ``(seed, c)``, so the result does not depend on how
    chunks are scheduled. Runs still running after ``horizon`` steps score 0.

    Args:
        game: Game
        profile: Stationary profile
        s0: Initial state
        samples: Number of runs (at least 1)
        horizon: Step budget per run
        seed: 64-bit seed
        chunk_size: Runs per chunk
        confidence: Confidence level of the reported half-widths

    Returns:
        MonteCarloEstimate: Float estimates, half-widths and absorption steps
    """
    if samples < 1:
        raise PreconditionError("samples must be at least 1")
    game.require_state(s0)
    index = {s: k for k, s in enumerate(game.states)}
    final_mask = np.array([s in game.finals for s in game.states])
    rewards = np.zeros((len(game.states), len(game.players)))
    for f in game.finals:
        rewards[index[f]] = [float(game.reward(f, i)) for i in game.players]

    successor_table = {}
    for s, dist in profile_transitions(game, profile).items():
        targets = np.array([index[t] for t in dist])
        cumulative = np.cumsum([float(p) for p in dist.values()])
        successor_table[index[s]] = (targets, cumulative)

    outcomes = np.empty((samples, len(game.players)))
    absorption = np.full(samples, -1, dtype=np.int64)
    key_base = (seed & 0xFFFFFFFFFFFFFFFF) << 64
    for chunk, start in enumerate(range(0, samples, chunk_size)):
        stop = min(start + chunk_size, samples)
        rng = np.random.Generator(np.random.Philox(key=key_base | chunk))
        current = np.full(stop - start, index[s0], dtype=np.int64)
        absorbed = np.where(final_mask[current], 0, -1)
        for step in range(1, horizon + 1):
            if np.all(absorbed >= 0):
                break
            draws = rng.random(stop - start)
            # masks come from the pre-step positions so each run moves once
            nxt = current.copy()
            for k, (targets, cumulative) in successor_table.items():
                selected = current == k
                if not np.any(selected):
                    continue
                picks = np.searchsorted(cumulative, draws[selected], side="right")
                nxt[selected] = targets[np.minimum(picks, len(targets) - 1)]
            current = nxt
            absorbed[(absorbed < 0) & final_mask[current]] = step
        outcomes[start:stop] = np.where(final_mask[current][:, None], rewards[current], 0.0)
        absorption[start:stop] = absorbed

    z = float(stats.norm.ppf(0.5 + confidence / 2))
    means = outcomes.mean(axis=0)
    stds = outcomes.std(axis=0, ddof=1) if samples > 1 else np.zeros(len(game.players))
    half_widths = z * stds / math.sqrt(samples)
    logger.debug(f"Monte-Carlo from {s0}: {samples} runs, horizon {horizon}")
    return MonteCarloEstimate(
        estimates={i: float(means[k]) for k, i in enumerate(game.players)},
        half_widths={i: float(half_widths[k]) for k, i in enumerate(game.players)},
        samples=samples,
        horizon=horizon,
        confidence=confidence,
        absorption_steps=absorption,
    )


def coplayer_mixtures(
    game: Game, profile: StationaryProfile, i: Player, s: State
) -> Dict[Action, Distribution]:
    """
    Successor distribution of each action of ``i`` at ``s`` with everyone else
    playing their profile strategy.
    """
    position = game.players.index(i)
    others = [j for j in game.players if j != i]
    other_rows = [list(profile[j].at(s).items()) for j in others]
    mixtures: Dict[Action, Distribution] = {}
    for a in game.allowed(s, i):
        weighted = []
        for combo in itertools.product(*other_rows):
            prob = Fraction(1)
            actions = []
            for action, p in combo:
                prob *= p
                actions.append(action)
            actions.insert(position, a)
            weighted.append((prob, game.arena.tab[(s, tuple(actions))]))
        mixtures[a] = Distribution.combine(weighted)
    return mixtures


def constrained_best_response(
    game: Game,
    profile: StationaryProfile,
    i: Player,
    actions: ConstrainedActionSet,
    mode: str = "max",
    enumeration_threshold: int = DEFAULT_ENUMERATION_THRESHOLD,
) -> Tuple[PayoffVector, StationaryStrategy]:
    """
    Optimal value of player ``i`` choosing one vertex per state, others fixed.

    Args:
        game: Game
        profile: Profile fixing the co-players
        i: Controlled player
        actions: Vertex set per state
        mode: "max" (best response) or "min" (worst point of a ball)
        enumeration_threshold: Policy count up to which all policies are enumerated

    Returns:
        Tuple of the value vector of player ``i`` and a witness strategy
        attaining it from every state
    """
    if actions.player != i:
        raise ProfileError(f"action set belongs to player {actions.player}, not {i}")
    actions.check_against(game)
    choices = {}
    for s in game.non_final_states:
        mixtures = coplayer_mixtures(game, profile, i, s)
        choices[s] = [
            Distribution.combine([(p, mixtures[a]) for a, p in vertex.items()])
            for vertex in actions.vertices[s]
        ]
    terminal = {f: game.reward(f, i) for f in game.finals}
    try:
        values, policy = optimize_policy(choices, terminal, mode, enumeration_threshold)
    except Exception as e:
        logger.error(f"Error solving best response for player {i}: {e}")
        raise
    witness = StationaryStrategy(
        i,
        {
            s: actions.vertices[s][policy[s]] if s in policy else actions.vertices[s][0]
            for s in game.states
        },
    )
    return PayoffVector({(i, s): values[s] for s in game.states}), witness
