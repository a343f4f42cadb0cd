"""
Existential real-arithmetic encoding of constrained imprecise equilibria.

For a guessed support of the profile and guessed pure memoryless strategies
in every player's deviation game, ``emit_formula`` writes an SMT-LIB 2
(QF_NRA) problem that is satisfiable iff some stationary profile with that
support is an equilibrium under ε-imprecise deviations from s0 with payoffs
inside the requested bounds. Clauses:

1. Well-formedness: each probability lies in (0, 1] on the guessed support,
   is exactly 0 off it, and the support sums to 1. Single-action and
   singleton-support entries are the constant 1. Δ_ε lower bounds are added
   when a constraint set is given.
2. Payoffs: u(i, s) is ν_i at finals, 0 where the support graph never
   reaches a final, and otherwise the Bellman combination of its successors.
3. Deviation values: w(i, node) follows the guessed deviator/perturber pair
   in player i's deviation game, with 0 on nodes that cannot reach a final
   under that pair. The deviator cannot improve by a local switch
   (w ≥ every move) and neither can the perturber (w ≤ every move). On the
   spoil set the perturber guess must keep play inside it.
4. Stability: u(i, s0) ≥ w(i, ŝ0).
5. Bounds: x_i ≤ u(i, s0) ≤ y_i.

Variables are named by index (``p_<player>_<state>_<action>``,
``u_<player>_<state>``, ``w_<player>_<node>``); the sidecar maps every name
back to what it stands for.
"""

import itertools
import shlex
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Set, Tuple

from ..exceptions import CapExceededError, PreconditionError, SolverError, SolverUnavailableError
from ..models.game import Action, Distribution, Game, Player, State
from ..models.results import EquilibriumVerdict
from ..models.strategy import DeltaEpsilonSpec, StationaryProfile, StationaryStrategy
from ..utils.logging_utils import setup_logging
from ..utils.validation_utils import format_rational, validate_epsilon
from .deviation_game import TurnNode, interval_bounds
from .equilibrium import check_imprecise
from .linear import reaching_nodes
from .structure import DEFAULT_MAX_STATES, delta_epsilon_spec, lift_profile, make_cycle_free

logger = setup_logging(__name__)

DEFAULT_SOLVER_COMMAND = "z3 -in -smt2"
DEFAULT_MAX_GUESSES = 1_000_000
WITNESS_TOLERANCE = Fraction(1, 10 ** 6)

Monomial = Tuple[str, ...]
Bounds = Mapping[Player, Tuple[Optional[Fraction], Optional[Fraction]]]


def _literal(value: Fraction) -> str:
    value = Fraction(value)
    magnitude = abs(value)
    if magnitude.denominator == 1:
        text = str(magnitude.numerator)
    else:
        text = f"(/ {magnitude.numerator} {magnitude.denominator})"
    return f"(- {text})" if value < 0 else text


class Polynomial:
    """Polynomial with exact rational coefficients over named real variables."""

    __slots__ = ("terms",)

    def __init__(self, terms: Optional[Mapping[Monomial, Fraction]] = None) -> None:
        self.terms: Dict[Monomial, Fraction] = {
            mono: Fraction(c) for mono, c in (terms or {}).items() if c != 0
        }

    @classmethod
    def constant(cls, value: Fraction) -> "Polynomial":
        return cls({(): Fraction(value)})

    @classmethod
    def variable(cls, name: str) -> "Polynomial":
        return cls({(name,): Fraction(1)})

    def _coerce(self, other: Any) -> "Polynomial":
        return other if isinstance(other, Polynomial) else Polynomial.constant(other)

    def __add__(self, other: Any) -> "Polynomial":
        other = self._coerce(other)
        terms = dict(self.terms)
        for mono, c in other.terms.items():
            terms[mono] = terms.get(mono, Fraction(0)) + c
        return Polynomial(terms)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial({mono: -c for mono, c in self.terms.items()})

    def __sub__(self, other: Any) -> "Polynomial":
        return self + (-self._coerce(other))

    def __mul__(self, other: Any) -> "Polynomial":
        other = self._coerce(other)
        terms: Dict[Monomial, Fraction] = {}
        for left, c in self.terms.items():
            for right, d in other.terms.items():
                mono = tuple(sorted(left + right))
                terms[mono] = terms.get(mono, Fraction(0)) + c * d
        return Polynomial(terms)

    __rmul__ = __mul__

    def degree(self) -> int:
        return max((len(mono) for mono in self.terms), default=0)

    def is_constant(self) -> bool:
        return self.degree() == 0

    def constant_value(self) -> Fraction:
        return self.terms.get((), Fraction(0))

    def variables(self) -> Set[str]:
        return {name for mono in self.terms for name in mono}

    @property
    def term_count(self) -> int:
        return max(len(self.terms), 1)

    def to_smtlib2(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for mono in sorted(self.terms, key=lambda m: (len(m), m)):
            c = self.terms[mono]
            if not mono:
                parts.append(_literal(c))
            elif c == 1 and len(mono) == 1:
                parts.append(mono[0])
            elif c == 1:
                parts.append(f"(* {' '.join(mono)})")
            else:
                parts.append(f"(* {_literal(c)} {' '.join(mono)})")
        return parts[0] if len(parts) == 1 else f"(+ {' '.join(parts)})"


@dataclass(frozen=True)
class Assertion:
    op: str
    lhs: Polynomial
    rhs: Polynomial
    tag: str

    def to_smtlib2(self) -> str:
        return f"(assert ({self.op} {self.lhs.to_smtlib2()} {self.rhs.to_smtlib2()}))"

    @property
    def term_count(self) -> int:
        return self.lhs.term_count + self.rhs.term_count

    @property
    def degree(self) -> int:
        return max(self.lhs.degree(), self.rhs.degree())


class SmtEnv:
    """Declarations and assertions of one QF_NRA problem."""

    def __init__(self) -> None:
        self._decls: Dict[str, Dict[str, Any]] = {}
        self._asserts: List[Assertion] = []

    def decl(self, name: str, meaning: Dict[str, Any]) -> Polynomial:
        self._decls.setdefault(name, meaning)
        return Polynomial.variable(name)

    def cstr(self, op: str, lhs: Any, rhs: Any, tag: str) -> None:
        lhs = lhs if isinstance(lhs, Polynomial) else Polynomial.constant(lhs)
        rhs = rhs if isinstance(rhs, Polynomial) else Polynomial.constant(rhs)
        if lhs.is_constant() and rhs.is_constant():
            # Ground facts are decided here; false ones stay in the formula.
            if _holds(op, lhs.constant_value(), rhs.constant_value()):
                return
        self._asserts.append(Assertion(op, lhs, rhs, tag))

    def eq(self, lhs: Any, rhs: Any, tag: str) -> None:
        self.cstr("=", lhs, rhs, tag)

    def le(self, lhs: Any, rhs: Any, tag: str) -> None:
        self.cstr("<=", lhs, rhs, tag)

    def lt(self, lhs: Any, rhs: Any, tag: str) -> None:
        self.cstr("<", lhs, rhs, tag)

    @property
    def variables(self) -> Dict[str, Dict[str, Any]]:
        return dict(self._decls)

    @property
    def assertions(self) -> List[Assertion]:
        return list(self._asserts)

    def to_smtlib2(self) -> str:
        lines = ["(set-option :produce-models true)", "(set-logic QF_NRA)"]
        lines += [f"(declare-const {name} Real)" for name in self._decls]
        lines += [a.to_smtlib2() for a in self._asserts]
        lines += ["(check-sat)", "(get-model)", "(exit)"]
        return "\n".join(lines) + "\n"


def _holds(op: str, lhs: Fraction, rhs: Fraction) -> bool:
    return {"=": lhs == rhs, "<=": lhs <= rhs, "<": lhs < rhs}[op]


@dataclass(frozen=True)
class SupportGuess:
    """
    One nondeterministic guess of the decision procedure.

    ``deviator[i][s]`` is the interval index chosen at two-action state s of
    player i's deviation game; ``perturber[i][(s, k)]`` is the endpoint (0 for
    low, 1 for high) picked at interval node k of s. ``spoil[i]`` holds the
    deviation-game nodes from which the perturber can avoid every final.
    """

    supports: Mapping[Tuple[Player, State], FrozenSet[Action]]
    deviator: Mapping[Player, Mapping[State, int]]
    perturber: Mapping[Player, Mapping[Tuple[State, int], int]]
    spoil: Mapping[Player, FrozenSet[TurnNode]] = field(default_factory=dict)

    def to_dict(self, game: Game) -> Dict[str, Any]:
        return {
            "supports": {
                i: {
                    s: [a for a in game.allowed(s, i) if a in self.supports[(i, s)]]
                    for s in game.non_final_states
                }
                for i in game.players
            },
            "deviator": {i: dict(picks) for i, picks in self.deviator.items()},
            "perturber": {
                i: {f"{s}#{k}": e for (s, k), e in picks.items()}
                for i, picks in self.perturber.items()
            },
            "spoil": {i: sorted(str(n) for n in nodes) for i, nodes in self.spoil.items()},
        }


@dataclass
class _Skeleton:
    """Support-level structure of one player's deviation game."""

    player: Player
    intervals: List[Tuple[str, Fraction, Fraction]]
    pairs: Dict[State, Tuple[Action, Action]]
    state_moves: Dict[State, List[FrozenSet[TurnNode]]]
    endpoint_moves: Dict[Tuple[State, int], List[FrozenSet[TurnNode]]]
    spoil: FrozenSet[TurnNode] = frozenset()

    def node(self, s: State, k: Optional[int] = None) -> TurnNode:
        if k is None:
            return TurnNode(s)
        label, low, high = self.intervals[k]
        return TurnNode(s, label, (low, high))


def _check_encodable(game: Game) -> None:
    if game.min_reward() < 0:
        raise PreconditionError("the encoding needs non-negative rewards; shift them first")
    for s in game.non_final_states:
        for i in game.players:
            if len(game.allowed(s, i)) > 2:
                raise PreconditionError(
                    f"player {i} has {len(game.allowed(s, i))} actions at {s}; "
                    "at most 2 are supported"
                )


def _intervals(epsilon: Fraction, prune: bool) -> List[Tuple[str, Fraction, Fraction]]:
    bounds = interval_bounds(epsilon)
    if prune:
        # Each wide interval contains its narrow one, so the deviator never prefers it.
        return [b for b in bounds if b[0] in ("low", "high")]
    return bounds


def _coplayer_joints(
    game: Game, supports: Mapping[Tuple[Player, State], FrozenSet[Action]], i: Player, s: State
) -> Iterator[Tuple[Tuple[Player, Action], ...]]:
    others = [j for j in game.players if j != i]
    rows = [[(j, a) for a in game.allowed(s, j) if a in supports[(j, s)]] for j in others]
    return itertools.product(*rows)


def _joint_for(game: Game, i: Player, a: Action, others: Tuple[Tuple[Player, Action], ...]):
    picks = dict(others)
    picks[i] = a
    return tuple(picks[j] for j in game.players)


def _action_support(
    game: Game,
    supports: Mapping[Tuple[Player, State], FrozenSet[Action]],
    i: Player,
    s: State,
    a: Action,
) -> FrozenSet[TurnNode]:
    reached: Set[TurnNode] = set()
    for others in _coplayer_joints(game, supports, i, s):
        reached |= {TurnNode(t) for t in game.arena.tab[(s, _joint_for(game, i, a, others))]}
    return frozenset(reached)


def _spoil_set(skeleton: _Skeleton, game: Game) -> FrozenSet[TurnNode]:
    slots = {
        skeleton.node(s, k): (s, k) for s in skeleton.pairs for k in range(len(skeleton.intervals))
    }
    inside: Set[TurnNode] = {TurnNode(s) for s in game.non_final_states} | set(slots)
    changed = True
    while changed:
        changed = False
        for node in list(inside):
            if node.is_interval:
                keep = any(move <= inside for move in skeleton.endpoint_moves[slots[node]])
            else:
                keep = all(move <= inside for move in skeleton.state_moves[node.state])
            if not keep:
                inside.discard(node)
                changed = True
    return frozenset(inside)


def _build_skeleton(
    game: Game,
    supports: Mapping[Tuple[Player, State], FrozenSet[Action]],
    i: Player,
    intervals: List[Tuple[str, Fraction, Fraction]],
) -> _Skeleton:
    skeleton = _Skeleton(i, intervals, {}, {}, {})
    for s in game.non_final_states:
        allowed = game.allowed(s, i)
        if len(allowed) == 1:
            skeleton.state_moves[s] = [_action_support(game, supports, i, s, allowed[0])]
            continue
        a, b = allowed
        skeleton.pairs[s] = (a, b)
        on_a = _action_support(game, supports, i, s, a)
        on_b = _action_support(game, supports, i, s, b)
        skeleton.state_moves[s] = [frozenset([skeleton.node(s, k)]) for k in range(len(intervals))]
        for k, (_, low, high) in enumerate(intervals):
            skeleton.endpoint_moves[(s, k)] = [
                (on_a if p > 0 else frozenset()) | (on_b if p < 1 else frozenset())
                for p in (low, high)
            ]
    skeleton.spoil = _spoil_set(skeleton, game)
    return skeleton


def enumerate_supports(
    game: Game, spec: Optional[DeltaEpsilonSpec] = None
) -> Iterator[Dict[Tuple[Player, State], FrozenSet[Action]]]:
    """
    Support assignments of every (player, non-final state), in canonical order.

    Under a Δ_ε constraint set the constrained actions must be in the support.
    """
    slots = [(i, s) for i in game.players for s in game.non_final_states]
    options = []
    for i, s in slots:
        allowed = game.allowed(s, i)
        required = set(spec.constrained_actions(i, s)) if spec is not None else set()
        options.append(
            [
                frozenset(combo)
                for size in range(1, len(allowed) + 1)
                for combo in itertools.combinations(allowed, size)
                if required <= set(combo)
            ]
        )
    for picks in itertools.product(*options):
        yield dict(zip(slots, picks))


def _player_guesses(
    skeleton: _Skeleton,
) -> Iterator[Tuple[Dict[State, int], Dict[Tuple[State, int], int]]]:
    states = list(skeleton.pairs)
    interval_slots = [(s, k) for s in states for k in range(len(skeleton.intervals))]
    endpoint_options = []
    for s, k in interval_slots:
        node = skeleton.node(s, k)
        moves = skeleton.endpoint_moves[(s, k)]
        if node in skeleton.spoil:
            endpoint_options.append([e for e, move in enumerate(moves) if move <= skeleton.spoil])
        else:
            endpoint_options.append([0, 1])
    for deviator in itertools.product(range(len(skeleton.intervals)), repeat=len(states)):
        for endpoints in itertools.product(*endpoint_options):
            yield dict(zip(states, deviator)), dict(zip(interval_slots, endpoints))


def enumerate_guesses(
    game: Game,
    epsilon: Fraction,
    spec: Optional[DeltaEpsilonSpec] = None,
    prune_dominated_intervals: bool = True,
    max_guesses: int = DEFAULT_MAX_GUESSES,
) -> Iterator[SupportGuess]:
    """
    Lazily enumerate support guesses in canonical order.

    Perturber guesses that leave the spoil set from one of its nodes are
    filtered out.

    Raises:
        CapExceededError: When more than ``max_guesses`` guesses are requested
    """
    _check_encodable(game)
    intervals = _intervals(Fraction(epsilon), prune_dominated_intervals)
    produced = 0
    for supports in enumerate_supports(game, spec):
        skeletons = [_build_skeleton(game, supports, i, intervals) for i in game.players]
        per_player = [list(_player_guesses(sk)) for sk in skeletons]
        for combo in itertools.product(*per_player):
            produced += 1
            if produced > max_guesses:
                raise CapExceededError(f"more than {max_guesses} support guesses")
            yield SupportGuess(
                supports=supports,
                deviator={sk.player: dev for sk, (dev, _) in zip(skeletons, combo)},
                perturber={sk.player: pert for sk, (_, pert) in zip(skeletons, combo)},
                spoil={sk.player: sk.spoil for sk in skeletons},
            )


def shift_rewards(game: Game) -> Tuple[Game, Fraction]:
    """
    Shift all rewards by −min ν when some reward is negative.

    Returns:
        Tuple of the shifted game and the shift added to every reward (0 when
        rewards are already non-negative)
    """
    shift = max(Fraction(0), -game.min_reward())
    if shift == 0:
        return game, shift
    rewards = {f: {i: game.reward(f, i) + shift for i in game.players} for f in game.finals}
    return Game(arena=game.arena, rewards=rewards, finals=game.finals), shift


@dataclass
class EtrFormula:
    """An emitted formula with the guess and naming metadata behind it."""

    env: SmtEnv
    guess: SupportGuess
    s0: State
    epsilon: Fraction
    index: int = 0
    probability_names: Dict[Tuple[Player, State, Action], str] = field(default_factory=dict)

    @property
    def assertion_count(self) -> int:
        return len(self.env.assertions)

    @property
    def term_count(self) -> int:
        return sum(a.term_count for a in self.env.assertions)

    @property
    def variable_count(self) -> int:
        return len(self.env.variables)

    def is_linear(self) -> bool:
        return all(a.degree <= 1 for a in self.env.assertions)

    def to_smtlib2(self) -> str:
        return self.env.to_smtlib2()

    def sidecar(self, game: Game) -> Dict[str, Any]:
        return {
            "s0": self.s0,
            "epsilon": format_rational(self.epsilon),
            "guess_index": self.index,
            "variables": self.env.variables,
            "guess": self.guess.to_dict(game),
            "metrics": {
                "assertions": self.assertion_count,
                "terms": self.term_count,
                "variables": self.variable_count,
                "linear": self.is_linear(),
            },
        }


class _Encoder:
    def __init__(self, game: Game, guess: SupportGuess, env: SmtEnv) -> None:
        self.game = game
        self.guess = guess
        self.env = env
        self.player_index = {i: k for k, i in enumerate(game.players)}
        self.state_index = {s: k for k, s in enumerate(game.states)}
        self.action_index = {a: k for k, a in enumerate(game.actions)}
        self.probability_names: Dict[Tuple[Player, State, Action], str] = {}

    def prob(self, i: Player, s: State, a: Action) -> Polynomial:
        allowed = self.game.allowed(s, i)
        if s in self.game.finals:
            support = frozenset(allowed[:1])
        else:
            support = self.guess.supports[(i, s)]
        if a not in support:
            return Polynomial.constant(0)
        if len(support) == 1:
            return Polynomial.constant(1)
        name = (
            f"p_{self.player_index[i]}_{self.state_index[s]}_{self.action_index[a]}"
        )
        self.probability_names[(i, s, a)] = name
        return self.env.decl(name, {"kind": "probability", "player": i, "state": s, "action": a})

    def action_mixture(self, i: Player, s: State, a: Action) -> Dict[State, Polynomial]:
        """Successor weights of action a of i at s against the co-players' variables."""
        weights: Dict[State, Polynomial] = {}
        for others in _coplayer_joints(self.game, self.guess.supports, i, s):
            coef = Polynomial.constant(1)
            for j, b in others:
                coef = coef * self.prob(j, s, b)
            dist = self.game.arena.tab[(s, _joint_for(self.game, i, a, others))]
            for t, p in dist.items():
                weights[t] = weights.get(t, Polynomial()) + coef * p
        return weights


def _payoff_clauses(encoder: _Encoder) -> Dict[Tuple[Player, State], Polynomial]:
    game, env, guess = encoder.game, encoder.env, encoder.guess
    for i in game.players:
        for s in game.non_final_states:
            support = guess.supports[(i, s)]
            probs = [encoder.prob(i, s, a) for a in game.allowed(s, i) if a in support]
            for a in support:
                p = encoder.prob(i, s, a)
                if not p.is_constant():
                    env.lt(0, p, f"positive {i} {s} {a}")
                    env.le(p, 1, f"at most one {i} {s} {a}")
            env.eq(sum(probs, Polynomial()), 1, f"sums to one {i} {s}")

    transitions = {}
    for s in game.non_final_states:
        reached: Set[State] = set()
        for joint in itertools.product(
            *([a for a in game.allowed(s, i) if a in guess.supports[(i, s)]] for i in game.players)
        ):
            reached |= game.arena.tab[(s, joint)].support()
        transitions[s] = {t: 1 for t in reached}
    reach = reaching_nodes(transitions, sorted(game.finals))

    values: Dict[Tuple[Player, State], Polynomial] = {}
    for i in game.players:
        for s in game.states:
            if s in game.finals:
                values[(i, s)] = Polynomial.constant(game.reward(s, i))
            elif s not in reach:
                values[(i, s)] = Polynomial.constant(0)
            else:
                values[(i, s)] = env.decl(
                    f"u_{encoder.player_index[i]}_{encoder.state_index[s]}",
                    {"kind": "payoff", "player": i, "state": s},
                )
    for i in game.players:
        for s in game.non_final_states:
            if s not in reach:
                continue
            expected = Polynomial()
            supported = [
                [a for a in game.allowed(s, j) if a in guess.supports[(j, s)]] for j in game.players
            ]
            for joint in itertools.product(*supported):
                coef = Polynomial.constant(1)
                for j, a in zip(game.players, joint):
                    coef = coef * encoder.prob(j, s, a)
                for t, p in game.arena.tab[(s, joint)].items():
                    expected = expected + coef * p * values[(i, t)]
            env.eq(values[(i, s)], expected, f"bellman u {i} {s}")
    return values


def _deviation_clauses(
    encoder: _Encoder, skeleton: _Skeleton, s0: State
) -> Polynomial:
    game, env, guess = encoder.game, encoder.env, encoder.guess
    i = skeleton.player
    deviator = guess.deviator[i]
    perturber = guess.perturber[i]
    nodes: List[TurnNode] = []
    for s in game.states:
        nodes.append(TurnNode(s))
        if s in skeleton.pairs:
            nodes += [skeleton.node(s, k) for k in range(len(skeleton.intervals))]
    node_index = {n: k for k, n in enumerate(nodes)}

    chosen: Dict[TurnNode, Dict[TurnNode, int]] = {}
    for s in game.non_final_states:
        if s in skeleton.pairs:
            chosen[TurnNode(s)] = {skeleton.node(s, deviator[s]): 1}
            for k in range(len(skeleton.intervals)):
                move = skeleton.endpoint_moves[(s, k)][perturber[(s, k)]]
                chosen[skeleton.node(s, k)] = {t: 1 for t in move}
        else:
            chosen[TurnNode(s)] = {t: 1 for t in skeleton.state_moves[s][0]}
    reach = reaching_nodes(chosen, [TurnNode(f) for f in sorted(game.finals)])

    w: Dict[TurnNode, Polynomial] = {}
    for n in nodes:
        if n.state in game.finals and not n.is_interval:
            w[n] = Polynomial.constant(game.reward(n.state, i))
        elif n not in reach:
            w[n] = Polynomial.constant(0)
        else:
            w[n] = env.decl(
                f"w_{encoder.player_index[i]}_{node_index[n]}",
                {"kind": "deviation_value", "player": i, "node": str(n), "state": n.state},
            )

    def expectation(weights: Mapping[State, Polynomial]) -> Polynomial:
        return sum((coef * w[TurnNode(t)] for t, coef in weights.items()), Polynomial())

    for s in game.non_final_states:
        node = TurnNode(s)
        if s not in skeleton.pairs:
            (a,) = game.allowed(s, i)
            value = expectation(encoder.action_mixture(i, s, a))
            if node in reach:
                env.eq(w[node], value, f"bellman w {i} {node}")
            continue
        a, b = skeleton.pairs[s]
        on_a = expectation(encoder.action_mixture(i, s, a))
        on_b = expectation(encoder.action_mixture(i, s, b))
        for k, (_, low, high) in enumerate(skeleton.intervals):
            interval_node = skeleton.node(s, k)
            endpoint_values = [on_a * p + on_b * (1 - p) for p in (low, high)]
            if interval_node in reach:
                env.eq(
                    w[interval_node],
                    endpoint_values[perturber[(s, k)]],
                    f"bellman w {i} {interval_node}",
                )
            for e, value in enumerate(endpoint_values):
                env.le(w[interval_node], value, f"perturber switch {i} {interval_node} {e}")
            env.le(w[interval_node], w[node], f"deviator switch {i} {node} {k}")
        if node in reach:
            env.eq(w[node], w[skeleton.node(s, deviator[s])], f"bellman w {i} {node}")
    return w[TurnNode(s0)]


def emit_formula(
    game: Game,
    epsilon: Fraction,
    s0: State,
    bounds: Optional[Bounds],
    guess: SupportGuess,
    spec: Optional[DeltaEpsilonSpec] = None,
    prune_dominated_intervals: bool = True,
    index: int = 0,
) -> EtrFormula:
    """
    Formula for "some profile with the guessed support is an imprecise
    equilibrium from ``s0`` with payoffs within ``bounds``".

    Args:
        game: Game with non-negative rewards and at most two actions per
            player and state
        epsilon: Perturbation level
        s0: Initial state
        bounds: Optional (low, high) per player; either end may be None
        guess: Support guess
        spec: Optional Δ_ε lower bounds to add
        prune_dominated_intervals: Must match the flag used to enumerate ``guess``
        index: Position of the guess in the enumeration

    Returns:
        EtrFormula: The formula with its naming metadata

    Raises:
        PreconditionError: On negative rewards or more than two actions
    """
    _check_encodable(game)
    game.require_state(s0)
    epsilon = Fraction(epsilon)
    env = SmtEnv()
    encoder = _Encoder(game, guess, env)
    payoffs = _payoff_clauses(encoder)

    if spec is not None:
        for i, s, a in sorted(spec.constraints):
            env.le(spec.epsilon, encoder.prob(i, s, a), f"delta-epsilon {i} {s} {a}")

    intervals = _intervals(epsilon, prune_dominated_intervals)
    for i in game.players:
        skeleton = _build_skeleton(game, guess.supports, i, intervals)
        deviation_value = _deviation_clauses(encoder, skeleton, s0)
        env.le(deviation_value, payoffs[(i, s0)], f"stable {i}")

    for i, (low, high) in (bounds or {}).items():
        if i not in game.players:
            raise PreconditionError(f"bounds given for unknown player {i}")
        if low is not None:
            env.le(Fraction(low), payoffs[(i, s0)], f"lower bound {i}")
        if high is not None:
            env.le(payoffs[(i, s0)], Fraction(high), f"upper bound {i}")

    return EtrFormula(
        env=env,
        guess=guess,
        s0=s0,
        epsilon=epsilon,
        index=index,
        probability_names=dict(encoder.probability_names),
    )


def _tokenize(text: str) -> List[str]:
    return text.replace("(", " ( ").replace(")", " ) ").split()


def _read_sexprs(tokens: List[str]) -> List[Any]:
    stack: List[List[Any]] = [[]]
    for token in tokens:
        if token == "(":
            stack.append([])
        elif token == ")":
            if len(stack) == 1:
                raise SolverError("unbalanced parentheses in solver output")
            finished = stack.pop()
            stack[-1].append(finished)
        else:
            stack[-1].append(token)
    if len(stack) != 1:
        raise SolverError("unbalanced parentheses in solver output")
    return stack[0]


def _evaluate_value(expr: Any) -> Fraction:
    if isinstance(expr, str):
        try:
            return Fraction(expr.rstrip("?"))
        except ValueError:
            raise SolverError(f"cannot read model value {expr!r}")
    head, *args = expr
    values = [_evaluate_value(arg) for arg in args] if head != "root-obj" else []
    if head == "-" and len(values) == 1:
        return -values[0]
    if head == "-":
        return values[0] - sum(values[1:], Fraction(0))
    if head == "/" and len(values) == 2:
        return values[0] / values[1]
    if head == "+":
        return sum(values, Fraction(0))
    if head == "*":
        result = Fraction(1)
        for v in values:
            result *= v
        return result
    raise SolverError(f"unsupported model value {head!r} (irrational witness?)")


def parse_model(output: str) -> Tuple[str, Dict[str, Fraction]]:
    """
    Read a solver's ``check-sat``/``get-model`` answer.

    Returns:
        Tuple of the status (sat, unsat or unknown) and the real-valued
        assignment of every ``define-fun`` in the model
    """
    lines = output.strip().splitlines()
    status = lines[0].strip() if lines else ""
    if status not in ("sat", "unsat", "unknown"):
        raise SolverError(f"unexpected solver answer: {status or '<empty>'}")
    model: Dict[str, Fraction] = {}
    if status != "sat":
        return status, model

    def visit(items: List[Any]) -> None:
        for item in items:
            if isinstance(item, list) and item and item[0] == "define-fun" and len(item) == 5:
                _, name, _, _, value = item
                model[name.strip("|")] = _evaluate_value(value)
            elif isinstance(item, list):
                visit(item)

    visit(_read_sexprs(_tokenize("\n".join(lines[1:]))))
    return status, model


def run_solver(
    text: str, command: str = DEFAULT_SOLVER_COMMAND, timeout: float = 60.0
) -> Tuple[str, Dict[str, Fraction]]:
    """
    Run the external solver on one SMT-LIB problem given on standard input.

    Raises:
        SolverUnavailableError: If the solver binary cannot be started
        SolverError: If the solver answers something unreadable
    """
    try:
        completed = subprocess.run(
            shlex.split(command),
            input=text,
            capture_output=True,
            text=True,
            timeout=timeout,
            check=False,
        )
    except FileNotFoundError as e:
        raise SolverUnavailableError(f"solver command not found: {command}") from e
    except subprocess.TimeoutExpired:
        logger.warning(f"Solver timed out after {timeout} s")
        return "unknown", {}
    return parse_model(completed.stdout)


@dataclass(frozen=True)
class DispatchResult:
    status: str
    index: Optional[int]
    model: Dict[str, Fraction]
    tried: int
    formula: Optional["EtrFormula"] = None


def dispatch(
    formulas: Iterable[EtrFormula],
    command: str = DEFAULT_SOLVER_COMMAND,
    timeout: float = 60.0,
    threads: int = 1,
) -> DispatchResult:
    """
    Send formulas to the solver in batches of ``threads``, stopping at the
    first batch with a satisfiable formula.

    Returns:
        DispatchResult: ``sat`` with the lowest satisfiable index and its
        model, ``unsat`` if every formula was unsatisfiable, else ``unknown``
    """
    tried = 0
    saw_unknown = False
    iterator = iter(formulas)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        while True:
            batch = list(itertools.islice(iterator, max(1, threads)))
            if not batch:
                break
            answers = list(pool.map(lambda f: run_solver(f.to_smtlib2(), command, timeout), batch))
            tried += len(batch)
            for formula, (status, model) in zip(batch, answers):
                if status == "sat":
                    logger.info(f"Guess {formula.index} is satisfiable")
                    return DispatchResult("sat", formula.index, model, tried, formula)
                if status == "unknown":
                    saw_unknown = True
            logger.debug(f"{tried} guesses dispatched")
    return DispatchResult("unknown" if saw_unknown else "unsat", None, {}, tried)


def _snap(values: Mapping[Action, Fraction], max_denominator: int) -> Distribution:
    probs = {a: max(Fraction(0), p).limit_denominator(max_denominator) for a, p in values.items()}
    pivot = max(probs, key=lambda a: probs[a])
    probs[pivot] = 1 - sum((p for a, p in probs.items() if a != pivot), Fraction(0))
    return Distribution(probs)


def profile_from_model(
    game: Game, formula: EtrFormula, model: Mapping[str, Fraction], max_denominator: int = 10 ** 6
) -> StationaryProfile:
    """Stationary profile encoded by a model, rationalized to bounded denominators."""
    strategies: Dict[Player, StationaryStrategy] = {}
    for i in game.players:
        choice: Dict[State, Distribution] = {}
        for s in game.states:
            allowed = game.allowed(s, i)
            if s in game.finals:
                choice[s] = Distribution.dirac(allowed[0])
                continue
            support = formula.guess.supports[(i, s)]
            if len(support) == 1:
                choice[s] = Distribution.dirac(next(iter(support)))
                continue
            raw = {a: model.get(formula.probability_names[(i, s, a)], Fraction(0)) for a in support}
            choice[s] = _snap(raw, max_denominator)
        strategies[i] = StationaryStrategy(i, choice)
    return StationaryProfile(strategies)


@dataclass
class EtrResult:
    """Outcome of the ETR pipeline on the original game."""

    status: str
    shift: Fraction
    guesses_tried: int
    guess_index: Optional[int] = None
    profile: Optional[StationaryProfile] = None
    verdict: Optional[EquilibriumVerdict] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "status": self.status,
            "shift": format_rational(self.shift),
            "guesses_tried": self.guesses_tried,
            "guess_index": self.guess_index,
            "profile": self.profile.to_dict() if self.profile is not None else None,
            "verdict": self.verdict.to_dict() if self.verdict is not None else None,
        }


def prepare_encoding(
    game: Game, epsilon: Fraction, max_states: int = DEFAULT_MAX_STATES
) -> Tuple[Game, Dict[State, State], Fraction, DeltaEpsilonSpec]:
    """Cycle-free reduction, reward shift and Δ_ε constraints used by the pipeline."""
    epsilon = validate_epsilon(epsilon, len(game.actions))
    reduced, mapping = make_cycle_free(game)
    shifted, shift = shift_rewards(reduced)
    spec = delta_epsilon_spec(shifted, epsilon, max_states=max_states)
    return shifted, mapping, shift, spec


def shift_bounds(
    bounds: Optional[Bounds], shift: Fraction
) -> Dict[Player, Tuple[Optional[Fraction], Optional[Fraction]]]:
    """Move payoff bounds into shifted reward units."""
    return {
        i: (
            None if low is None else Fraction(low) + shift,
            None if high is None else Fraction(high) + shift,
        )
        for i, (low, high) in (bounds or {}).items()
    }


def iter_formulas(
    game: Game,
    epsilon: Fraction,
    s0: State,
    bounds: Optional[Bounds],
    spec: Optional[DeltaEpsilonSpec],
    prune_dominated_intervals: bool = True,
    max_guesses: int = DEFAULT_MAX_GUESSES,
) -> Iterator[EtrFormula]:
    guesses = enumerate_guesses(game, epsilon, spec, prune_dominated_intervals, max_guesses)
    for index, guess in enumerate(guesses):
        yield emit_formula(
            game, epsilon, s0, bounds, guess, spec, prune_dominated_intervals, index
        )


def solve_with_etr(
    game: Game,
    epsilon: Fraction,
    s0: State,
    bounds: Optional[Bounds] = None,
    command: str = DEFAULT_SOLVER_COMMAND,
    timeout: float = 60.0,
    threads: int = 1,
    max_guesses: int = DEFAULT_MAX_GUESSES,
    prune_dominated_intervals: bool = True,
    max_denominator: int = 10 ** 6,
    max_states: int = DEFAULT_MAX_STATES,
) -> EtrResult:
    """
    Decide whether a Δ_ε equilibrium with payoffs in ``bounds`` exists.

    The game is made cycle-free and shifted to non-negative rewards; bounds
    are given in original reward units and shifted along. The first
    satisfiable guess yields a witness that is rationalized, lifted back to
    the original game and re-checked with a 10⁻⁶ tolerance.

    Raises:
        SolverUnavailableError: If the solver command cannot be started
    """
    shifted, mapping, shift, spec = prepare_encoding(game, epsilon, max_states)
    start = mapping[s0]
    formulas = iter_formulas(
        shifted,
        epsilon,
        start,
        shift_bounds(bounds, shift),
        spec,
        prune_dominated_intervals,
        max_guesses,
    )
    try:
        outcome = dispatch(formulas, command, timeout, threads)
    except Exception as e:
        logger.error(f"Error dispatching formulas: {e}")
        raise
    result = EtrResult(status=outcome.status, shift=shift, guesses_tried=outcome.tried)
    if outcome.status != "sat":
        return result

    reduced_profile = profile_from_model(shifted, outcome.formula, outcome.model, max_denominator)
    lifted = lift_profile(reduced_profile, mapping, game)
    result.guess_index = outcome.index
    result.profile = lifted
    result.verdict = check_imprecise(game, lifted, s0, epsilon, tolerance=WITNESS_TOLERANCE)
    if not result.verdict.accepted:
        logger.warning("Solver witness failed the imprecise check after rationalization")
    return result
