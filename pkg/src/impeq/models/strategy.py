"""
Stationary strategies, profiles, ε-balls and Δ_ε constraint sets.

Distances between stationary strategies are the maximum over states of the
L∞ distance between the per-state action distributions.
"""

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, FrozenSet, Iterator, List, Mapping, Sequence, Tuple

from ..exceptions import CapExceededError, PreconditionError, ProfileError
from ..utils.validation_utils import format_rational
from .game import Action, Distribution, Game, JointAction, Player, State

DEFAULT_MAX_VERTEX_ACTIONS = 6

Constraint = Tuple[Player, State, Action]


@dataclass(frozen=True)
class StationaryStrategy:
    """Per-state action distribution for one player; pure when every entry is Dirac."""

    player: Player
    choice: Mapping[State, Distribution]

    def at(self, s: State) -> Distribution:
        try:
            return self.choice[s]
        except KeyError:
            raise ProfileError(f"strategy of player {self.player} undefined at state {s}")

    @property
    def states(self) -> FrozenSet[State]:
        return frozenset(self.choice)

    def is_pure(self) -> bool:
        return all(dist.is_dirac() for dist in self.choice.values())

    def validate(self, game: Game) -> None:
        """
        Check the strategy against the game's allow sets.

        Raises:
            ProfileError: On unknown player/state, missing state or an action
                outside allow(s, player)
        """
        if self.player not in game.players:
            raise ProfileError(f"unknown player {self.player}")
        for s in self.choice:
            if not game.arena.has_state(s):
                raise ProfileError(f"unknown state {s} in strategy of player {self.player}")
        for s in game.states:
            if s not in self.choice:
                raise ProfileError(f"strategy of player {self.player} undefined at state {s}")
            allowed = game.arena.allowed(s, self.player)
            for a in self.choice[s]:
                if a not in allowed:
                    raise ProfileError(
                        f"action {a} not allowed for player {self.player} at state {s}"
                    )

    def with_choice(self, s: State, dist: Distribution) -> "StationaryStrategy":
        updated = dict(self.choice)
        updated[s] = dist
        return StationaryStrategy(self.player, updated)

    def mix(self, other: "StationaryStrategy", weight: Fraction) -> "StationaryStrategy":
        """``(1 − weight)·self + weight·other``, state by state."""
        return StationaryStrategy(
            self.player,
            {
                s: Distribution.combine([(1 - weight, dist), (weight, other.at(s))])
                for s, dist in self.choice.items()
            },
        )

    def rationalize(self, max_denominator: int) -> "StationaryStrategy":
        """
        Snap every probability to a nearby fraction with bounded denominator.

        The largest entry of each distribution absorbs the rounding so the
        result still sums to exactly 1.
        """
        snapped: Dict[State, Distribution] = {}
        for s, dist in self.choice.items():
            pivot = max(dist, key=lambda a: dist[a])
            probs = {a: p.limit_denominator(max_denominator) for a, p in dist.items()}
            rest = sum((p for a, p in probs.items() if a != pivot), Fraction(0))
            if rest > 1:
                snapped[s] = dist
                continue
            probs[pivot] = 1 - rest
            snapped[s] = Distribution(probs)
        return StationaryStrategy(self.player, snapped)

    def to_dict(self) -> Dict[str, Dict[str, str]]:
        return {s: dist.to_dict() for s, dist in self.choice.items()}


@dataclass(frozen=True)
class StationaryProfile:
    """One stationary strategy per player."""

    strategies: Mapping[Player, StationaryStrategy]

    @classmethod
    def of(cls, strategies: Sequence[StationaryStrategy]) -> "StationaryProfile":
        return cls({strategy.player: strategy for strategy in strategies})

    def __getitem__(self, i: Player) -> StationaryStrategy:
        try:
            return self.strategies[i]
        except KeyError:
            raise ProfileError(f"profile has no strategy for player {i}")

    @property
    def players(self) -> Tuple[Player, ...]:
        return tuple(self.strategies)

    def replace(self, i: Player, strategy: StationaryStrategy) -> "StationaryProfile":
        """The profile σ[i/σ′]."""
        if strategy.player != i:
            raise ProfileError(f"strategy belongs to player {strategy.player}, not {i}")
        updated = dict(self.strategies)
        updated[i] = strategy
        return StationaryProfile(updated)

    def validate(self, game: Game) -> None:
        missing = [i for i in game.players if i not in self.strategies]
        if missing:
            raise ProfileError(f"profile has no strategy for player {missing[0]}")
        extra = [i for i in self.strategies if i not in game.players]
        if extra:
            raise ProfileError(f"unknown player {extra[0]} in profile")
        for i in game.players:
            self.strategies[i].validate(game)

    def joint_distribution(self, game: Game, s: State) -> Dict[JointAction, Fraction]:
        """Probability of each joint action in the product of the supports at ``s``."""
        per_player = [list(self[i].at(s).items()) for i in game.players]
        joint: Dict[JointAction, Fraction] = {}
        for combo in itertools.product(*per_player):
            prob = Fraction(1)
            for _, p in combo:
                prob *= p
            joint[tuple(a for a, _ in combo)] = prob
        return joint

    def step(self, game: Game, s: State) -> Distribution:
        """One-step state distribution at ``s`` under the profile."""
        weighted = [
            (prob, game.arena.tab[(s, joint)])
            for joint, prob in self.joint_distribution(game, s).items()
        ]
        return Distribution.combine(weighted)

    def to_dict(self) -> Dict[str, Dict[str, Dict[str, str]]]:
        return {i: strategy.to_dict() for i, strategy in self.strategies.items()}


@dataclass(frozen=True)
class DeltaEpsilonSpec:
    """Lower bounds σ_i(s)(a) ≥ ε on every exiting action (i, s, a)."""

    epsilon: Fraction
    constraints: FrozenSet[Constraint]

    def __post_init__(self) -> None:
        if not 0 < self.epsilon <= 1:
            raise PreconditionError(
                f"epsilon must lie in (0, 1], got {format_rational(self.epsilon)}"
            )

    def lower_bound(self, i: Player, s: State, a: Action) -> Fraction:
        return self.epsilon if (i, s, a) in self.constraints else Fraction(0)

    def constrained_actions(self, i: Player, s: State) -> List[Action]:
        return sorted(a for (j, t, a) in self.constraints if j == i and t == s)

    def validate(self, game: Game) -> None:
        if self.epsilon > Fraction(1, len(game.actions)):
            raise PreconditionError(
                f"epsilon {format_rational(self.epsilon)} exceeds 1/|Act|"
            )
        for i, s, a in self.constraints:
            if a not in game.allowed(s, i):
                raise ProfileError(f"constraint on action {a} not allowed for {i} at {s}")

    def to_list(self) -> List[Dict[str, str]]:
        return [
            {"player": i, "state": s, "action": a, "lower_bound": format_rational(self.epsilon)}
            for i, s, a in sorted(self.constraints)
        ]


@dataclass(frozen=True)
class BallSpec:
    """Closed ball {σ″ : d(center, σ″) ≤ radius}."""

    center: StationaryStrategy
    radius: Fraction

    def __post_init__(self) -> None:
        if not 0 <= self.radius <= 1:
            raise PreconditionError(f"ball radius must lie in [0, 1], got {self.radius}")


def distance(a: StationaryStrategy, b: StationaryStrategy) -> Fraction:
    """
    Distance between two stationary strategies of the same player.

    Args:
        a: First strategy
        b: Second strategy

    Returns:
        Fraction: max over states of max over actions of |a(s)(x) − b(s)(x)|

    Raises:
        ProfileError: If the players or state sets differ
    """
    if a.player != b.player:
        raise ProfileError(f"cannot compare strategies of players {a.player} and {b.player}")
    if a.states != b.states:
        raise ProfileError("cannot compare strategies defined on different states")
    return max((a.at(s).linf_distance(b.at(s)) for s in a.states), default=Fraction(0))


def in_ball(candidate: StationaryStrategy, ball: BallSpec) -> bool:
    return distance(candidate, ball.center) <= ball.radius


def in_delta_epsilon(profile: StationaryProfile, spec: DeltaEpsilonSpec) -> bool:
    """True iff every constrained action is played with probability at least ε."""
    for i, s, a in spec.constraints:
        if profile[i].at(s).prob(a) < spec.epsilon:
            return False
    return True


def _project_with_lower_bounds(
    dist: Distribution, bounds: Mapping[Action, Fraction]
) -> Distribution:
    keys = sorted(set(dist) | set(bounds), key=str)
    lower = {a: bounds.get(a, Fraction(0)) for a in keys}
    mass = 1 - sum(lower.values(), Fraction(0))
    if mass < 0:
        raise PreconditionError("infeasible lower bounds: they sum to more than 1")
    if mass == 0:
        return Distribution(lower)
    # Shifted problem: project u = δ − l onto {y ≥ 0, Σy = mass}.
    shifted = {a: dist.prob(a) - lower[a] for a in keys}
    ordered = sorted(shifted.values(), reverse=True)
    running = Fraction(0)
    threshold = Fraction(0)
    for k, value in enumerate(ordered, start=1):
        running += value
        candidate = (running - mass) / k
        if value - candidate > 0:
            threshold = candidate
    return Distribution(
        {a: lower[a] + max(shifted[a] - threshold, Fraction(0)) for a in keys}
    )


def project_to_delta_epsilon(
    profile: StationaryProfile, spec: DeltaEpsilonSpec
) -> StationaryProfile:
    """
    Euclidean projection of each per-state distribution onto its Δ_ε polytope.

    Args:
        profile: Profile to project
        spec: Lower-bound constraints

    Returns:
        StationaryProfile: Projected profile, satisfying ``in_delta_epsilon``

    Raises:
        PreconditionError: If the bounds at some (player, state) exceed 1
    """
    projected: Dict[Player, StationaryStrategy] = {}
    for i, strategy in profile.strategies.items():
        choice: Dict[State, Distribution] = {}
        for s, dist in strategy.choice.items():
            constrained = spec.constrained_actions(i, s)
            if not constrained:
                choice[s] = dist
                continue
            bounds = {a: spec.epsilon for a in constrained}
            if all(dist.prob(a) >= spec.epsilon for a in constrained):
                choice[s] = dist
            else:
                choice[s] = _project_with_lower_bounds(dist, bounds)
        projected[i] = StationaryStrategy(i, choice)
    return StationaryProfile(projected)


def enumerate_pure_memoryless(game: Game, i: Player) -> Iterator[StationaryStrategy]:
    """
    All pure memoryless strategies of player ``i``, in canonical order.

    The order is the product order over non-final states (arena order) of the
    allowed actions (arena order); the first strategy picks the first allowed
    action everywhere. Final states always play their first allowed action.
    """
    states = game.non_final_states
    finals = {f: Distribution.dirac(game.allowed(f, i)[0]) for f in game.finals}
    options = [game.allowed(s, i) for s in states]
    for picks in itertools.product(*options):
        choice = {s: Distribution.dirac(a) for s, a in zip(states, picks)}
        yield StationaryStrategy(i, {**choice, **finals})


def pure_strategy_count(game: Game, i: Player) -> int:
    count = 1
    for s in game.non_final_states:
        count *= len(game.allowed(s, i))
    return count


def _vertex_order(allowed: Sequence[Action], dist: Distribution) -> Tuple[Fraction, ...]:
    return tuple(-dist.prob(a) for a in allowed)


def _sorted_vertices(allowed: Sequence[Action], vertices: List[Distribution]) -> List[Distribution]:
    unique = {tuple(v.prob(a) for a in allowed): v for v in vertices}
    return sorted(unique.values(), key=lambda v: _vertex_order(allowed, v))


def simplex_vertices(game: Game, s: State, i: Player) -> List[Distribution]:
    """Dirac distributions on each allowed action."""
    return [Distribution.dirac(a) for a in game.allowed(s, i)]


def ball_vertices(
    game: Game,
    s: State,
    i: Player,
    ball: BallSpec,
    max_actions: int = DEFAULT_MAX_VERTEX_ACTIONS,
) -> List[Distribution]:
    """
    Vertices of {δ ∈ simplex(allow(s,i)) : |δ(a) − center(s)(a)| ≤ radius}.

    A vertex has every coordinate but one at a box bound; the remaining one
    is fixed by the sum constraint and must lie in its own box.

    Args:
        game: Game providing allow(s, i)
        s: State
        i: Player owning the ball
        ball: Ball specification
        max_actions: Cap on |allow(s, i)|

    Returns:
        List[Distribution]: Distinct vertices, largest probability on earlier
        actions first

    Raises:
        CapExceededError: If allow(s, i) has more than ``max_actions`` actions
        ProfileError: If the ball belongs to another player
    """
    if ball.center.player != i:
        raise ProfileError(f"ball is centred on a strategy of player {ball.center.player}")
    allowed = game.allowed(s, i)
    if len(allowed) > max_actions:
        raise CapExceededError(
            f"{len(allowed)} actions at state {s} exceed the vertex cap of {max_actions}"
        )
    center = ball.center.at(s)
    radius = ball.radius
    if len(allowed) == 1:
        return [Distribution.dirac(allowed[0])]
    bounds = [
        (max(Fraction(0), center.prob(a) - radius), min(Fraction(1), center.prob(a) + radius))
        for a in allowed
    ]
    vertices: List[Distribution] = []
    for free in range(len(allowed)):
        others = [k for k in range(len(allowed)) if k != free]
        for picks in itertools.product(*[(bounds[k][0], bounds[k][1]) for k in others]):
            remainder = 1 - sum(picks, Fraction(0))
            low, high = bounds[free]
            if not low <= remainder <= high:
                continue
            point = {allowed[k]: p for k, p in zip(others, picks)}
            point[allowed[free]] = remainder
            vertices.append(Distribution(point))
    return _sorted_vertices(allowed, vertices)


def delta_epsilon_vertices(
    game: Game, s: State, i: Player, spec: DeltaEpsilonSpec
) -> List[Distribution]:
    """Vertices of {δ ∈ simplex(allow(s,i)) : δ(a) ≥ ε for constrained a}."""
    allowed = game.allowed(s, i)
    lower = {a: spec.lower_bound(i, s, a) for a in allowed}
    mass = 1 - sum(lower.values(), Fraction(0))
    if mass < 0:
        raise PreconditionError(f"Δ_ε is empty for player {i} at state {s}")
    vertices = []
    for a in allowed:
        point = dict(lower)
        point[a] += mass
        vertices.append(Distribution(point))
    return _sorted_vertices(allowed, vertices)


def make_strategy(
    game: Game,
    i: Player,
    table: Mapping[State, Mapping[Action, Fraction]],
    fill_finals: bool = True,
) -> StationaryStrategy:
    """
    Build and validate a strategy from a state → action → probability table.

    Final states missing from the table play their first allowed action when
    ``fill_finals`` is set; any other missing state is an error.
    """
    choice: Dict[State, Distribution] = {}
    for s in game.states:
        row = table.get(s)
        if row is None:
            if fill_finals and s in game.finals:
                choice[s] = Distribution.dirac(game.allowed(s, i)[0])
                continue
            raise ProfileError(f"strategy of player {i} undefined at state {s}")
        try:
            choice[s] = Distribution(row)
        except (TypeError, ValueError) as e:
            raise ProfileError(f"player {i}, state {s}: {e}")
    unknown = [s for s in table if not game.arena.has_state(s)]
    if unknown:
        raise ProfileError(f"unknown state {unknown[0]} in strategy of player {i}")
    strategy = StationaryStrategy(i, choice)
    strategy.validate(game)
    return strategy


def make_profile(
    game: Game, table: Mapping[Player, Mapping[State, Mapping[Action, Fraction]]]
) -> StationaryProfile:
    """Build and validate a profile from player → state → action → probability."""
    missing = [i for i in game.players if i not in table]
    if missing:
        raise ProfileError(f"profile has no strategy for player {missing[0]}")
    extra = [i for i in table if i not in game.players]
    if extra:
        raise ProfileError(f"unknown player {extra[0]} in profile")
    return StationaryProfile({i: make_strategy(game, i, table[i]) for i in game.players})


def pure_profile(game: Game, picks: Mapping[Player, Mapping[State, Action]]) -> StationaryProfile:
    """Pure profile from player → state → action (finals may be omitted)."""
    return make_profile(
        game,
        {i: {s: {a: Fraction(1)} for s, a in picks.get(i, {}).items()} for i in game.players},
    )


def uniform_profile(game: Game) -> StationaryProfile:
    """Every player mixes uniformly over its allowed actions at every state."""
    return StationaryProfile(
        {
            i: StationaryStrategy(
                i, {s: Distribution.uniform(game.allowed(s, i)) for s in game.states}
            )
            for i in game.players
        }
    )

