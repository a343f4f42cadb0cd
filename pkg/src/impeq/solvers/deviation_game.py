"""
Deviation games: imprecise deviations of one player as a turn-based game.

Player i (the deviator) picks, at each state with two actions a and b, an
interval for the probability of a. An antagonistic perturber then picks one
endpoint of that interval; mixing over endpoints realizes any probability in
between. The value of this game at a state equals the best imprecise
deviation value, which ``imprecise_deviation_value`` also computes directly
on the concurrent game for any number of actions.
"""

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Tuple

from ..exceptions import PreconditionError, ProfileError
from ..models.game import Action, Arena, Distribution, Game, Player, State
from ..models.results import DeviationValue
from ..models.strategy import (
    DEFAULT_MAX_VERTEX_ACTIONS,
    StationaryProfile,
    StationaryStrategy,
    distance,
    enumerate_pure_memoryless,
)
from ..utils.logging_utils import setup_logging
from ..utils.validation_utils import format_rational
from .linear import DEFAULT_ENUMERATION_THRESHOLD, optimize_policy
from .payoff import ConstrainedActionSet, constrained_best_response, coplayer_mixtures

logger = setup_logging(__name__)

DEVIATOR = "deviator"
PERTURBER = "perturber"

DEFAULT_TOLERANCE = 1e-9
DEFAULT_MAX_SWEEPS = 10 ** 6


@dataclass(frozen=True)
class TurnNode:
    """A node of the deviation game: an original state or a (state, interval) pair."""

    state: State
    label: str = ""
    interval: Optional[Tuple[Fraction, Fraction]] = None

    @property
    def is_interval(self) -> bool:
        return self.interval is not None

    def __str__(self) -> str:
        if self.interval is None:
            return self.state
        low, high = self.interval
        return f"{self.state}[{format_rational(low)},{format_rational(high)}]{self.label}"


@dataclass(frozen=True)
class TurnBasedGame:
    """
    Two-player turn-based game with terminal rewards for the deviator.

    Every move is a distribution over nodes; deviator moves into interval
    nodes are Dirac.
    """

    player: Player
    epsilon: Fraction
    source: Game
    nodes: Tuple[TurnNode, ...]
    owner: Mapping[TurnNode, str]
    moves: Mapping[TurnNode, Tuple[Distribution, ...]]
    rewards: Mapping[TurnNode, Fraction]
    action_pairs: Mapping[State, Tuple[Action, Action]]

    def state_node(self, s: State) -> TurnNode:
        return TurnNode(s)

    def is_terminal(self, node: TurnNode) -> bool:
        return node in self.rewards

    @property
    def deviator_nodes(self) -> List[TurnNode]:
        return [n for n in self.nodes if self.owner.get(n) == DEVIATOR]

    @property
    def perturber_nodes(self) -> List[TurnNode]:
        return [n for n in self.nodes if self.owner.get(n) == PERTURBER]


def fix_coplayers(game: Game, profile: StationaryProfile, i: Player) -> Game:
    """
    One-player game where every player but ``i`` plays its profile strategy.

    Action a of ``i`` at s leads to the co-player mixture of tab(s, (a, a₋ᵢ)),
    so expected payoffs of i agree with the original game under σ[i/σ′].

    Args:
        game: Concurrent game
        profile: Profile fixing the co-players
        i: Remaining player

    Returns:
        Game: One-player game over the same states and finals
    """
    if i not in game.players:
        raise ProfileError(f"unknown player {i}")
    profile.validate(game)
    used = {a for s in game.states for a in game.allowed(s, i)}
    allow = {(s, i): game.allowed(s, i) for s in game.states}
    tab = {}
    for s in game.states:
        for a, mixture in coplayer_mixtures(game, profile, i, s).items():
            tab[(s, (a,))] = mixture
    arena = Arena(
        states=game.states,
        players=(i,),
        actions=tuple(a for a in game.actions if a in used),
        allow=allow,
        tab=tab,
    )
    rewards = {f: {i: game.reward(f, i)} for f in game.finals}
    return Game(arena=arena, rewards=rewards, finals=game.finals)


def interval_bounds(epsilon: Fraction) -> List[Tuple[str, Fraction, Fraction]]:
    """The four (label, low, high) probability intervals for the first action, clamped to [0, 1]."""

    def clamp(x: Fraction) -> Fraction:
        return min(Fraction(1), max(Fraction(0), x))

    return [
        ("low", Fraction(0), clamp(epsilon)),
        ("low2", Fraction(0), clamp(2 * epsilon)),
        ("high2", clamp(1 - 2 * epsilon), Fraction(1)),
        ("high", clamp(1 - epsilon), Fraction(1)),
    ]


def _lift(dist: Distribution) -> Distribution:
    return dist.push_forward(TurnNode)


def build_deviation_game(one_player: Game, i: Player, epsilon: Fraction) -> TurnBasedGame:
    """
    Deviation game of a one-player game at perturbation level ``epsilon``.

    Args:
        one_player: Game where ``i`` is the only decision maker (see
            ``fix_coplayers``)
        i: Deviating player
        epsilon: Perturbation level in [0, 1]

    Returns:
        TurnBasedGame: Four interval nodes per two-action state; single-action
        states pass straight through

    Raises:
        PreconditionError: If some state offers ``i`` more than two actions,
            the game has other players, or epsilon is outside [0, 1]
    """
    epsilon = Fraction(epsilon)
    if not 0 <= epsilon <= 1:
        raise PreconditionError(f"epsilon must lie in [0, 1], got {format_rational(epsilon)}")
    if one_player.players != (i,):
        raise PreconditionError(f"expected a one-player game for player {i}")

    nodes: List[TurnNode] = []
    owner: Dict[TurnNode, str] = {}
    moves: Dict[TurnNode, Tuple[Distribution, ...]] = {}
    rewards: Dict[TurnNode, Fraction] = {}
    action_pairs: Dict[State, Tuple[Action, Action]] = {}
    for s in one_player.states:
        node = TurnNode(s)
        nodes.append(node)
        if s in one_player.finals:
            rewards[node] = one_player.reward(s, i)
            continue
        allowed = one_player.allowed(s, i)
        owner[node] = DEVIATOR
        if len(allowed) > 2:
            raise PreconditionError(
                f"state {s} offers {len(allowed)} actions; the deviation game needs at most 2"
            )
        if len(allowed) == 1:
            moves[node] = (_lift(one_player.successors(s, (allowed[0],))),)
            continue
        a, b = allowed
        action_pairs[s] = (a, b)
        on_a = one_player.successors(s, (a,))
        on_b = one_player.successors(s, (b,))
        deviator_moves = []
        for label, low, high in interval_bounds(epsilon):
            interval_node = TurnNode(s, label, (low, high))
            nodes.append(interval_node)
            owner[interval_node] = PERTURBER
            moves[interval_node] = tuple(
                _lift(Distribution.combine([(p, on_a), (1 - p, on_b)])) for p in (low, high)
            )
            deviator_moves.append(Distribution.dirac(interval_node))
        moves[node] = tuple(deviator_moves)

    logger.debug(f"Deviation game for player {i}: {len(nodes)} nodes")
    return TurnBasedGame(
        player=i,
        epsilon=epsilon,
        source=one_player,
        nodes=tuple(nodes),
        owner=owner,
        moves=moves,
        rewards=rewards,
        action_pairs=action_pairs,
    )


def _local_value(move: Distribution, values: Mapping[TurnNode, Fraction]) -> Fraction:
    return sum((p * values[t] for t, p in move.items()), Fraction(0))


def _solve_exact(
    tbg: TurnBasedGame, state_nodes: List[TurnNode], enumeration_threshold: int
) -> Tuple[Dict[TurnNode, Fraction], Dict[TurnNode, int], Dict[TurnNode, int]]:
    terminal = dict(tbg.rewards)
    best_score = None
    best: Tuple[Dict[TurnNode, Fraction], Dict[TurnNode, int], Dict[TurnNode, int]] = ({}, {}, {})
    for picks in itertools.product(*(range(len(tbg.moves[n])) for n in state_nodes)):
        # Only the interval nodes this deviator strategy selects are reachable.
        choices: Dict[TurnNode, List[Distribution]] = {}
        for node, k in zip(state_nodes, picks):
            move = tbg.moves[node][k]
            choices[node] = [move]
            for target in move:
                if target.is_interval:
                    choices[target] = list(tbg.moves[target])
        values, policy = optimize_policy(choices, terminal, "min", enumeration_threshold)
        score = sum((values[n] for n in state_nodes), Fraction(0))
        if best_score is None or score > best_score:
            best_score = score
            perturber = {n: k for n, k in policy.items() if n.is_interval}
            best = (values, dict(zip(state_nodes, picks)), perturber)

    values, deviator, perturber = best
    values = dict(values)
    for node in tbg.perturber_nodes:
        if node in perturber:
            continue
        local = [_local_value(move, values) for move in tbg.moves[node]]
        perturber[node] = local.index(min(local))
        values[node] = min(local)
    return values, deviator, perturber


def _solve_iterative(
    tbg: TurnBasedGame, tolerance: float, max_sweeps: int
) -> Tuple[Dict[TurnNode, float], Dict[TurnNode, int], Dict[TurnNode, int]]:
    if any(r < 0 for r in tbg.rewards.values()):
        raise PreconditionError("value iteration requires nonnegative terminal rewards")
    values: Dict[TurnNode, float] = {n: 0.0 for n in tbg.nodes}
    for node, reward in tbg.rewards.items():
        values[node] = float(reward)
    float_moves = {
        n: [[(t, float(p)) for t, p in move.items()] for move in options]
        for n, options in tbg.moves.items()
    }

    def local(n: TurnNode) -> List[float]:
        return [sum(p * values[t] for t, p in move) for move in float_moves[n]]

    for sweep in range(max_sweeps):
        change = 0.0
        for n in float_moves:
            options = local(n)
            updated = max(options) if tbg.owner[n] == DEVIATOR else min(options)
            change = max(change, abs(updated - values[n]))
            values[n] = updated
        if change < tolerance:
            logger.debug(f"Value iteration converged after {sweep + 1} sweeps")
            break
    else:
        logger.warning(f"Value iteration stopped after {max_sweeps} sweeps without converging")

    deviator: Dict[TurnNode, int] = {}
    perturber: Dict[TurnNode, int] = {}
    for n in float_moves:
        options = local(n)
        if tbg.owner[n] == DEVIATOR:
            best = max(options)
            deviator[n] = next(k for k, v in enumerate(options) if v >= best - tolerance)
        else:
            best = min(options)
            perturber[n] = next(k for k, v in enumerate(options) if v <= best + tolerance)
    return values, deviator, perturber


def solve_turn_based(
    tbg: TurnBasedGame,
    enumeration_threshold: int = DEFAULT_ENUMERATION_THRESHOLD,
    tolerance: float = DEFAULT_TOLERANCE,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> Tuple[DeviationValue, Dict[TurnNode, int], Dict[TurnNode, int]]:
    """
    Max-min value of the deviation game with optimal pure memoryless strategies.

    Small games are solved exactly: every deviator strategy is paired with
    the perturber's optimal response and evaluated with rational linear
    algebra. Larger games fall back to floating-point value iteration.

    Args:
        tbg: Deviation game
        enumeration_threshold: Pair count up to which the exact path is used
        tolerance: Value-iteration stopping tolerance
        max_sweeps: Value-iteration sweep cap

    Returns:
        Tuple of the value at every original state, the deviator's move index
        per state node and the perturber's move index per interval node

    Raises:
        PreconditionError: If value iteration is needed with negative rewards
    """
    state_nodes = tbg.deviator_nodes
    deviator_count = 1
    for n in state_nodes:
        deviator_count *= len(tbg.moves[n])
    pairs = deviator_count * 2 ** len(tbg.action_pairs)

    if pairs <= enumeration_threshold:
        values, deviator, perturber = _solve_exact(tbg, state_nodes, enumeration_threshold)
        exact = True
    else:
        logger.info(f"{pairs} strategy pairs exceed {enumeration_threshold}; using value iteration")
        values, deviator, perturber = _solve_iterative(tbg, tolerance, max_sweeps)
        exact = False

    result = DeviationValue(
        player=tbg.player,
        epsilon=tbg.epsilon,
        values={s: values[TurnNode(s)] for s in tbg.source.states},
        exact=exact,
    )
    return result, deviator, perturber


def turn_based_deviation_value(
    game: Game,
    profile: StationaryProfile,
    i: Player,
    epsilon: Fraction,
    enumeration_threshold: int = DEFAULT_ENUMERATION_THRESHOLD,
) -> DeviationValue:
    """Deviation value through the explicit turn-based construction (≤ 2 actions)."""
    tbg = build_deviation_game(fix_coplayers(game, profile, i), i, epsilon)
    value, _, _ = solve_turn_based(tbg, enumeration_threshold)
    return value


def imprecise_deviation_value(
    game: Game,
    profile: StationaryProfile,
    i: Player,
    epsilon: Fraction,
    max_actions: int = DEFAULT_MAX_VERTEX_ACTIONS,
    enumeration_threshold: int = DEFAULT_ENUMERATION_THRESHOLD,
) -> DeviationValue:
    """
    Best payoff player ``i`` can guarantee with a pure memoryless deviation
    that the perturber may move by up to ``epsilon``.

    For every pure memoryless deviation the perturber's best stationary
    answer inside the ε-ball is found by a min-mode best response over the
    ball's vertices; the deviator then takes the maximum per state.

    Args:
        game: Game
        profile: Profile fixing the co-players
        i: Deviating player
        epsilon: Ball radius in [0, 1]
        max_actions: Vertex cap per state
        enumeration_threshold: Policy enumeration threshold

    Returns:
        DeviationValue: Value per state with the maximizing deviation as witness

    Raises:
        CapExceededError: If a state offers more than ``max_actions`` actions
    """
    epsilon = Fraction(epsilon)
    if not 0 <= epsilon <= 1:
        raise PreconditionError(f"epsilon must lie in [0, 1], got {format_rational(epsilon)}")
    best: Dict[State, Fraction] = {}
    witnesses: Dict[State, StationaryStrategy] = {}
    for deviation in enumerate_pure_memoryless(game, i):
        ball = ConstrainedActionSet.ball(game, deviation, epsilon, max_actions)
        worst, _ = constrained_best_response(
            game, profile, i, ball, "min", enumeration_threshold
        )
        for s in game.states:
            value = worst.get(i, s)
            if s not in best or value > best[s]:
                best[s] = value
                witnesses[s] = deviation
    return DeviationValue(player=i, epsilon=epsilon, values=best, witnesses=witnesses)


def extract_correspondence(
    tbg: TurnBasedGame, deviator: Mapping[TurnNode, int], perturber: Mapping[TurnNode, int]
) -> Tuple[StationaryStrategy, StationaryStrategy]:
    """
    Strategies (σ_i, σ′_i) of the one-player game matching a pure memoryless
    pair of the deviation game.

    σ′_i plays a with the endpoint the perturber picks; σ_i plays a with a
    probability within ε of both endpoints of the chosen interval (pure for
    the narrow intervals).
    """
    game = tbg.source
    i = tbg.player
    sigma: Dict[State, Distribution] = {}
    sigma_prime: Dict[State, Distribution] = {}
    for s in game.states:
        allowed = game.allowed(s, i)
        if s not in tbg.action_pairs:
            sigma[s] = sigma_prime[s] = Distribution.dirac(allowed[0])
            continue
        a, b = tbg.action_pairs[s]
        node = TurnNode(s)
        chosen = next(iter(tbg.moves[node][deviator[node]]))
        low, high = chosen.interval
        endpoint = (low, high)[perturber[chosen]]
        if low == 0:
            center = max(Fraction(0), high - tbg.epsilon)
        else:
            center = min(Fraction(1), low + tbg.epsilon)
        sigma[s] = Distribution({a: center, b: 1 - center})
        sigma_prime[s] = Distribution({a: endpoint, b: 1 - endpoint})
    return StationaryStrategy(i, sigma), StationaryStrategy(i, sigma_prime)


def correspondence_check(
    sigma: StationaryStrategy,
    sigma_prime: StationaryStrategy,
    tbg_profile: Tuple[Mapping[TurnNode, int], Mapping[TurnNode, int]],
    tbg: TurnBasedGame,
) -> bool:
    """
    True iff σ′ and the turn-based pair induce the same one-step
    distribution over original states at every non-final state.

    Raises:
        PreconditionError: If d(σ, σ′) exceeds the game's ε
    """
    if distance(sigma, sigma_prime) > tbg.epsilon:
        raise PreconditionError("strategies are further apart than epsilon")
    deviator, perturber = tbg_profile
    game = tbg.source
    for s in game.non_final_states:
        expected = Distribution.combine(
            [(p, game.successors(s, (a,))) for a, p in sigma_prime.at(s).items()]
        )
        node = TurnNode(s)
        move = tbg.moves[node][deviator[node]]
        reached: List[Tuple[Fraction, Distribution]] = []
        for target, p in move.items():
            if target.is_interval:
                reached.append((p, tbg.moves[target][perturber[target]]))
            else:
                reached.append((p, Distribution.dirac(target)))
        induced = Distribution.combine(reached).push_forward(lambda n: n.state)
        if induced != expected:
            return False
    return True
