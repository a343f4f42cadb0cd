"""
Concurrent stochastic arenas and terminal-reward games.

All probabilities and rewards are exact ``Fraction`` values. Objects are
immutable after construction and safe to share between threads or processes.
"""

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import (
    Any,
    Callable,
    Dict,
    FrozenSet,
    Hashable,
    Iterable,
    Iterator,
    List,
    Mapping,
    Optional,
    Tuple,
)

from ..exceptions import GameSemanticError
from ..utils.validation_utils import format_rational

State = str
Player = str
Action = str
JointAction = Tuple[Action, ...]


class Distribution(Mapping[Hashable, Fraction]):
    """
    Finite probability distribution with exact rational weights.

    Zero-weight entries are dropped, so iteration yields exactly the support,
    in canonical (string) order.
    """

    def __init__(self, entries: Mapping[Hashable, Any]) -> None:
        cleaned: Dict[Hashable, Fraction] = {}
        for element, weight in entries.items():
            if isinstance(weight, float):
                raise TypeError("probabilities must be exact rationals, not floats")
            weight = Fraction(weight)
            if weight < 0:
                raise ValueError(f"negative probability {format_rational(weight)} for {element}")
            if weight > 0:
                cleaned[element] = weight
        if not cleaned:
            raise ValueError("distribution has empty support")
        total = sum(cleaned.values(), Fraction(0))
        if total != 1:
            raise ValueError(f"distribution does not sum to 1 (sum is {format_rational(total)})")
        self._entries = {key: cleaned[key] for key in sorted(cleaned, key=str)}
        self._hash: Optional[int] = None

    @classmethod
    def dirac(cls, element: Hashable) -> "Distribution":
        """Point mass on ``element``."""
        return cls({element: Fraction(1)})

    @classmethod
    def uniform(cls, elements: Iterable[Hashable]) -> "Distribution":
        """Uniform distribution over the given (distinct) elements."""
        elements = list(elements)
        return cls({element: Fraction(1, len(elements)) for element in elements})

    @classmethod
    def combine(cls, weighted: Iterable[Tuple[Fraction, "Distribution"]]) -> "Distribution":
        """
        Convex combination ``Σ w_k · δ_k``.

        Args:
            weighted: Pairs of (weight, distribution); weights must sum to 1

        Returns:
            Distribution: The mixture
        """
        mixed: Dict[Hashable, Fraction] = {}
        for weight, dist in weighted:
            if weight == 0:
                continue
            for element, prob in dist.items():
                mixed[element] = mixed.get(element, Fraction(0)) + weight * prob
        return cls(mixed)

    def __getitem__(self, element: Hashable) -> Fraction:
        return self._entries[element]

    def __iter__(self) -> Iterator[Hashable]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._entries.items()))
        return self._hash

    def __repr__(self) -> str:
        body = ", ".join(f"{k}: {format_rational(v)}" for k, v in self._entries.items())
        return f"Distribution({{{body}}})"

    def prob(self, element: Hashable) -> Fraction:
        """Probability of ``element`` (0 outside the support)."""
        return self._entries.get(element, Fraction(0))

    def support(self) -> FrozenSet[Hashable]:
        return frozenset(self._entries)

    def is_dirac(self) -> bool:
        return len(self._entries) == 1

    def push_forward(self, fn: Callable[[Hashable], Hashable]) -> "Distribution":
        """Image distribution under ``fn``."""
        image: Dict[Hashable, Fraction] = {}
        for element, prob in self._entries.items():
            target = fn(element)
            image[target] = image.get(target, Fraction(0)) + prob
        return Distribution(image)

    def linf_distance(self, other: "Distribution") -> Fraction:
        """``max_x |self(x) − other(x)|`` over the union of supports."""
        keys = set(self._entries) | set(other)
        return max((abs(self.prob(k) - other.prob(k)) for k in keys), default=Fraction(0))

    def to_dict(self) -> Dict[str, str]:
        return {str(k): format_rational(v) for k, v in self._entries.items()}


@dataclass(frozen=True)
class Arena:
    """
    Finite concurrent arena.

    ``allow`` maps (state, player) to the allowed actions in the arena's
    action order; ``tab`` maps (state, joint action) to a distribution over
    states, with joint actions ordered like ``players``.
    """

    states: Tuple[State, ...]
    players: Tuple[Player, ...]
    actions: Tuple[Action, ...]
    allow: Mapping[Tuple[State, Player], Tuple[Action, ...]]
    tab: Mapping[Tuple[State, JointAction], Distribution]
    _state_set: FrozenSet[State] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_state_set", frozenset(self.states))
        action_set = set(self.actions)
        for s in self.states:
            for i in self.players:
                allowed = self.allow.get((s, i))
                if not allowed:
                    raise GameSemanticError(f"no allowed action for player {i} at state {s}")
                unknown = [a for a in allowed if a not in action_set]
                if unknown:
                    raise GameSemanticError(f"unknown action {unknown[0]} in allow({s}, {i})")
            for joint in self.joint_actions(s):
                dist = self.tab.get((s, joint))
                if dist is None:
                    raise GameSemanticError(
                        f"missing joint action {','.join(joint)} at state {s}"
                    )
                for target in dist:
                    if target not in self._state_set:
                        raise GameSemanticError(
                            f"unknown state {target} in tab({s}, {','.join(joint)})"
                        )

    def has_state(self, s: State) -> bool:
        return s in self._state_set

    def allowed(self, s: State, i: Player) -> Tuple[Action, ...]:
        return self.allow[(s, i)]

    def joint_actions(self, s: State) -> List[JointAction]:
        """All joint actions allowed at ``s``, in canonical product order."""
        return list(itertools.product(*(self.allow[(s, i)] for i in self.players)))

    def is_sink(self, s: State) -> bool:
        return all(self.tab[(s, joint)].support() == {s} for joint in self.joint_actions(s))

    def min_positive_probability(self) -> Fraction:
        return min(p for dist in self.tab.values() for p in dist.values())


@dataclass(frozen=True)
class Game:
    """
    Terminal-reward game: an arena plus rewards on its final (sink) states.

    Runs that never reach a final state pay 0 to everyone.
    """

    arena: Arena
    rewards: Mapping[State, Mapping[Player, Fraction]]
    finals: FrozenSet[State]

    def __post_init__(self) -> None:
        for f in sorted(self.finals):
            if not self.arena.has_state(f):
                raise GameSemanticError(f"unknown final state {f}")
            if not self.arena.is_sink(f):
                raise GameSemanticError(f"final state {f} is not a sink")
            row = self.rewards.get(f)
            if row is None:
                raise GameSemanticError(f"missing rewards for final state {f}")
            for i in self.arena.players:
                if i not in row:
                    raise GameSemanticError(f"missing reward for player {i} at final {f}")
        extra = set(self.rewards) - set(self.finals)
        if extra:
            raise GameSemanticError(f"rewards given for non-final state {sorted(extra)[0]}")

    @property
    def states(self) -> Tuple[State, ...]:
        return self.arena.states

    @property
    def players(self) -> Tuple[Player, ...]:
        return self.arena.players

    @property
    def actions(self) -> Tuple[Action, ...]:
        return self.arena.actions

    @property
    def non_final_states(self) -> Tuple[State, ...]:
        return tuple(s for s in self.arena.states if s not in self.finals)

    def require_state(self, s: State) -> None:
        """Raise GameSemanticError unless ``s`` is a state of the game."""
        if not self.arena.has_state(s):
            raise GameSemanticError(f"unknown state {s}")

    def is_final(self, s: State) -> bool:
        """True iff ``s`` is a declared final state."""
        self.require_state(s)
        return s in self.finals

    def allowed(self, s: State, i: Player) -> Tuple[Action, ...]:
        self.require_state(s)
        if i not in self.arena.players:
            raise GameSemanticError(f"unknown player {i}")
        return self.arena.allowed(s, i)

    def successors(self, s: State, joint: JointAction) -> Distribution:
        """
        Transition distribution ``tab(s, joint)``.

        Raises:
            GameSemanticError: If the state is unknown or a component of the
                joint action is not allowed
        """
        self.require_state(s)
        joint = tuple(joint)
        if len(joint) != len(self.arena.players):
            raise GameSemanticError(
                f"joint action has {len(joint)} components, expected {len(self.arena.players)}"
            )
        for i, a in zip(self.arena.players, joint):
            if a not in self.arena.allowed(s, i):
                raise GameSemanticError(f"action {a} not allowed for player {i} at state {s}")
        return self.arena.tab[(s, joint)]

    def reward(self, f: State, i: Player) -> Fraction:
        return Fraction(self.rewards[f][i])

    def reward_range(self, i: Player) -> Tuple[Fraction, Fraction]:
        """(min, max) of player ``i``'s terminal rewards, both widened to include 0."""
        values = [self.reward(f, i) for f in self.finals] + [Fraction(0)]
        return min(values), max(values)

    def min_reward(self) -> Fraction:
        """Smallest reward over all players, never above 0."""
        return min((self.reward_range(i)[0] for i in self.players), default=Fraction(0))

    def max_allowed_actions(self) -> int:
        return max(len(actions) for actions in self.arena.allow.values())
