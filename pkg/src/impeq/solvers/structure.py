"""
Structural analysis of concurrent arenas.

Covers cycling states and the cycle-free reduction, strong components with
their exiting actions, the Δ_ε constraint set built from them, and the
termination constants of Δ_ε profiles.
"""

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, FrozenSet, List, Mapping, Optional, Set, Tuple

import networkx as nx

from ..exceptions import CapExceededError, PreconditionError
from ..models.game import Action, Arena, Distribution, Game, JointAction, Player, State
from ..models.strategy import DeltaEpsilonSpec, StationaryProfile, StationaryStrategy
from ..utils.logging_utils import setup_logging
from ..utils.validation_utils import format_rational, validate_epsilon

logger = setup_logging(__name__)

DEFAULT_MAX_STATES = 12
CYCLING_SUFFIX = "#cycling"

# One non-empty action subset per player, in player order.
SupportProfile = Tuple[FrozenSet[Action], ...]
Stabilizer = Mapping[State, SupportProfile]


@dataclass(frozen=True)
class StrongComponent:
    """A set of states some support profile keeps play inside and strongly connected."""

    states: FrozenSet[State]
    stabilizers: Tuple[Stabilizer, ...] = field(compare=False, hash=False)

    def sorted_states(self, game: Game) -> List[State]:
        return [s for s in game.states if s in self.states]

    def to_dict(self, game: Game) -> Dict[str, Any]:
        witness = self.stabilizers[0]
        return {
            "states": self.sorted_states(game),
            "stabilizer": {
                s: {
                    i: [a for a in game.allowed(s, i) if a in witness[s][k]]
                    for k, i in enumerate(game.players)
                }
                for s in self.sorted_states(game)
            },
        }


@dataclass(frozen=True)
class ExitSet:
    """Exiting actions (action, player, state) of a strong component."""

    triples: FrozenSet[Tuple[Action, Player, State]]

    def __len__(self) -> int:
        return len(self.triples)

    def __iter__(self):
        return iter(sorted(self.triples))

    def to_list(self) -> List[Dict[str, str]]:
        return [{"action": a, "player": i, "state": s} for a, i, s in sorted(self.triples)]


@dataclass(frozen=True)
class TerminationBound:
    """Absorption within k·n steps has probability at least 1 − pⁿ under Δ_ε."""

    k: int
    p: Fraction

    def __post_init__(self) -> None:
        if self.k < 1:
            raise PreconditionError(f"k must be at least 1, got {self.k}")
        if not 0 < self.p < 1:
            raise PreconditionError(f"p must lie in (0, 1), got {format_rational(self.p)}")

    def absorption_lower_bound(self, n: int) -> Fraction:
        return 1 - self.p ** n

    def to_dict(self) -> Dict[str, Any]:
        return {"k": self.k, "p": format_rational(self.p)}


def _deviation_closed(game: Game, s: State, joint: JointAction, inside: Set[State]) -> bool:
    for position, i in enumerate(game.players):
        for b in game.allowed(s, i):
            deviated = joint[:position] + (b,) + joint[position + 1:]
            if not game.arena.tab[(s, deviated)].support() <= inside:
                return False
    return True


def cycling_witnesses(game: Game) -> Dict[State, JointAction]:
    """
    Cycling states with the first joint action (canonical order) keeping
    every unilateral deviation inside the cycling set.

    Greatest fixpoint over the non-final states.
    """
    inside = set(game.non_final_states)
    changed = True
    while changed:
        changed = False
        for s in [t for t in game.states if t in inside]:
            if not any(
                _deviation_closed(game, s, joint, inside)
                for joint in game.arena.joint_actions(s)
            ):
                inside.discard(s)
                changed = True
    witnesses: Dict[State, JointAction] = {}
    for s in game.states:
        if s in inside:
            witnesses[s] = next(
                joint
                for joint in game.arena.joint_actions(s)
                if _deviation_closed(game, s, joint, inside)
            )
    return witnesses


def cycling_states(game: Game) -> Set[State]:
    """States from which no player can enforce reaching a final state by deviating."""
    return set(cycling_witnesses(game))


def _fresh_name(base: str, taken: Set[str]) -> str:
    name = base + CYCLING_SUFFIX
    while name in taken:
        name += "#"
    return name


def make_cycle_free(game: Game) -> Tuple[Game, Dict[State, State]]:
    """
    Replace every cycling state with a fresh 0-reward final state.

    Args:
        game: Input game

    Returns:
        Tuple of the reduced game and the old → new state mapping (identity
        on non-cycling states)
    """
    cycling = cycling_states(game)
    if not cycling:
        return game, {s: s for s in game.states}

    taken = set(game.states)
    mapping: Dict[State, State] = {}
    for s in game.states:
        if s in cycling:
            mapping[s] = _fresh_name(s, taken)
            taken.add(mapping[s])
        else:
            mapping[s] = s

    arena = game.arena
    allow: Dict[Tuple[State, Player], Tuple[Action, ...]] = {}
    tab: Dict[Tuple[State, JointAction], Distribution] = {}
    for s in game.states:
        target = mapping[s]
        if s in cycling:
            for i in game.players:
                allow[(target, i)] = (arena.allowed(s, i)[0],)
            joint = tuple(arena.allowed(s, i)[0] for i in game.players)
            tab[(target, joint)] = Distribution.dirac(target)
            continue
        for i in game.players:
            allow[(s, i)] = arena.allowed(s, i)
        for joint in arena.joint_actions(s):
            tab[(s, joint)] = arena.tab[(s, joint)].push_forward(mapping.__getitem__)

    rewards: Dict[State, Dict[Player, Fraction]] = {
        f: {i: game.reward(f, i) for i in game.players} for f in game.finals
    }
    for s in cycling:
        rewards[mapping[s]] = {i: Fraction(0) for i in game.players}

    reduced = Game(
        arena=Arena(
            states=tuple(mapping[s] for s in game.states),
            players=arena.players,
            actions=arena.actions,
            allow=allow,
            tab=tab,
        ),
        rewards=rewards,
        finals=frozenset(game.finals) | frozenset(mapping[s] for s in cycling),
    )
    logger.info(f"Collapsed {len(cycling)} cycling states into 0-reward finals")
    return reduced, mapping


def lift_profile(
    reduced_profile: StationaryProfile, mapping: Mapping[State, State], original: Game
) -> StationaryProfile:
    """
    Carry a profile of the cycle-free reduction back to the original game.

    Non-cycling states keep the reduced strategy; cycling states play the
    joint action that keeps every unilateral deviation among cycling states,
    so runs entering them pay 0 as in the reduction.
    """
    witnesses = cycling_witnesses(original)
    strategies: Dict[Player, StationaryStrategy] = {}
    for position, i in enumerate(original.players):
        choice: Dict[State, Distribution] = {}
        for s in original.states:
            if s in witnesses:
                choice[s] = Distribution.dirac(witnesses[s][position])
            else:
                choice[s] = reduced_profile[i].at(mapping[s])
        strategies[i] = StationaryStrategy(i, choice)
    lifted = StationaryProfile(strategies)
    lifted.validate(original)
    return lifted


def _non_empty_subsets(actions: Tuple[Action, ...]) -> List[FrozenSet[Action]]:
    return [
        frozenset(combo)
        for size in range(1, len(actions) + 1)
        for combo in itertools.combinations(actions, size)
    ]


def _one_step_support(game: Game, s: State, support: SupportProfile) -> FrozenSet[State]:
    reached: Set[State] = set()
    for joint in itertools.product(*(sorted(part) for part in support)):
        reached |= game.arena.tab[(s, tuple(joint))].support()
    return frozenset(reached)


def _contains(bigger: SupportProfile, smaller: SupportProfile) -> bool:
    return all(small <= big for small, big in zip(smaller, bigger))


def _maximal_closed_supports(
    game: Game, s: State, inside: FrozenSet[State], candidates: List[SupportProfile]
) -> List[SupportProfile]:
    closed = [c for c in candidates if _one_step_support(game, s, c) <= inside]
    return [
        c
        for c in closed
        if not any(other != c and _contains(other, c) for other in closed)
    ]


def _support_graph(game: Game, inside: FrozenSet[State], stabilizer: Stabilizer) -> nx.DiGraph:
    graph = nx.DiGraph()
    graph.add_nodes_from(inside)
    for s in inside:
        graph.add_edges_from((s, t) for t in _one_step_support(game, s, stabilizer[s]))
    return graph


def _is_stabilizer(game: Game, inside: FrozenSet[State], stabilizer: Stabilizer) -> bool:
    if set(stabilizer) != set(inside):
        return False
    for s in inside:
        if not _one_step_support(game, s, stabilizer[s]) <= inside:
            return False
    return nx.is_strongly_connected(_support_graph(game, inside, stabilizer))


def strong_components(game: Game, max_states: int = DEFAULT_MAX_STATES) -> List[StrongComponent]:
    """
    All strong components of the arena.

    Every state subset is examined; per state only the maximal closed support
    profiles are tried, since enlarging supports only adds edges.

    Args:
        game: Game
        max_states: Cap on the number of states

    Returns:
        List[StrongComponent]: Components ordered by size, then by arena order

    Raises:
        CapExceededError: If the game has more than ``max_states`` states
    """
    if len(game.states) > max_states:
        raise CapExceededError(
            f"{len(game.states)} states exceed the strong-component cap of {max_states}"
        )
    candidates = {
        s: [
            tuple(combo)
            for combo in itertools.product(
                *(_non_empty_subsets(game.allowed(s, i)) for i in game.players)
            )
        ]
        for s in game.states
    }
    components: List[StrongComponent] = []
    for size in range(1, len(game.states) + 1):
        for subset in itertools.combinations(game.states, size):
            inside = frozenset(subset)
            per_state = []
            for s in subset:
                maximal = _maximal_closed_supports(game, s, inside, candidates[s])
                if not maximal:
                    break
                per_state.append(maximal)
            else:
                stabilizers = []
                for picks in itertools.product(*per_state):
                    stabilizer = dict(zip(subset, picks))
                    if nx.is_strongly_connected(_support_graph(game, inside, stabilizer)):
                        stabilizers.append(stabilizer)
                if stabilizers:
                    components.append(StrongComponent(inside, tuple(stabilizers)))
    logger.debug(f"Found {len(components)} strong components")
    return components


def exit_actions(game: Game, component: StrongComponent) -> ExitSet:
    """
    Actions (a, i, s) that leave the component in one step from ``s`` with
    positive probability when player ``i`` swaps them into some stabilizer.

    Raises:
        PreconditionError: If ``component`` is not a strong component of ``game``
    """
    inside = component.states
    if not component.stabilizers or not all(
        _is_stabilizer(game, inside, stabilizer) for stabilizer in component.stabilizers
    ):
        raise PreconditionError("not a strong component of this game")
    triples: Set[Tuple[Action, Player, State]] = set()
    for stabilizer in component.stabilizers:
        for s in inside:
            for position, i in enumerate(game.players):
                for a in game.allowed(s, i):
                    swapped = (
                        stabilizer[s][:position] + (frozenset([a]),) + stabilizer[s][position + 1:]
                    )
                    if not _one_step_support(game, s, swapped) <= inside:
                        triples.add((a, i, s))
    return ExitSet(frozenset(triples))


def require_cycle_free(game: Game) -> None:
    cycling = cycling_states(game)
    if cycling:
        first = next(s for s in game.states if s in cycling)
        raise PreconditionError(f"game is not cycle-free (state {first} is cycling)")


def delta_epsilon_spec(
    game: Game,
    epsilon: Fraction,
    components: Optional[List[StrongComponent]] = None,
    max_states: int = DEFAULT_MAX_STATES,
) -> DeltaEpsilonSpec:
    """
    Lower-bound constraints forcing every exiting action to be played with
    probability at least ε.

    Args:
        game: Cycle-free game
        epsilon: Level in (0, 1/|Act|]
        components: Precomputed strong components, if any
        max_states: Strong-component cap

    Returns:
        DeltaEpsilonSpec: Union of the exit actions of all strong components
    """
    require_cycle_free(game)
    epsilon = validate_epsilon(epsilon, len(game.actions))
    if components is None:
        components = strong_components(game, max_states)
    constraints = set()
    for component in components:
        for a, i, s in exit_actions(game, component):
            constraints.add((i, s, a))
    return DeltaEpsilonSpec(epsilon, frozenset(constraints))


def termination_bound(game: Game, epsilon: Fraction) -> TerminationBound:
    """
    Constants (k, p) with ℙ(absorbed within k·n steps) ≥ 1 − pⁿ for every
    profile in Δ_ε.

    k is the number of states and p = 1 − (ε·τ)^k with τ the smallest
    positive transition probability.
    """
    require_cycle_free(game)
    epsilon = validate_epsilon(epsilon, len(game.actions))
    k = len(game.states)
    tau = game.arena.min_positive_probability()
    return TerminationBound(k=k, p=1 - (epsilon * tau) ** k)


def analyze_game(
    game: Game, epsilon: Optional[Fraction] = None, max_states: int = DEFAULT_MAX_STATES
) -> Dict[str, Any]:
    """
    Structural report: cycling states, strong components with one stabilizer
    witness and their exit actions, plus the Δ_ε constraints and termination
    constants when ``epsilon`` is given.

    The Δ_ε part is computed on the cycle-free reduction.
    """
    cycling = cycling_states(game)
    components = strong_components(game, max_states)
    exits = [exit_actions(game, component) for component in components]
    all_exits = sorted({triple for exit_set in exits for triple in exit_set})
    report: Dict[str, Any] = {
        "cycling_states": [s for s in game.states if s in cycling],
        "strong_components": [
            dict(component.to_dict(game), exit_actions=exit_set.to_list())
            for component, exit_set in zip(components, exits)
        ],
        "exit_actions": [{"action": a, "player": i, "state": s} for a, i, s in all_exits],
        "delta_epsilon": None,
        "termination_bound": None,
    }
    if epsilon is not None:
        reduced, _ = make_cycle_free(game)
        reduced_components = components if reduced is game else None
        spec = delta_epsilon_spec(reduced, epsilon, reduced_components, max_states)
        report["epsilon"] = format_rational(spec.epsilon)
        report["delta_epsilon"] = spec.to_list()
        report["termination_bound"] = termination_bound(reduced, epsilon).to_dict()
    return report
