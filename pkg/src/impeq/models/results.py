"""
Result types shared by the solvers, the CLI and the HTTP service.
"""

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from ..utils.validation_utils import format_rational
from .game import Player, State
from .strategy import StationaryStrategy

Number = Union[Fraction, float]


def render_number(value: Number) -> Union[str, float]:
    """Rationals as ``"p/q"`` strings, floats unchanged."""
    if isinstance(value, Fraction):
        return format_rational(value)
    return float(value)


@dataclass(frozen=True)
class PayoffVector:
    """Expected payoff per (player, state)."""

    values: Mapping[Tuple[Player, State], Fraction]

    def get(self, i: Player, s: State) -> Fraction:
        return self.values[(i, s)]

    @property
    def players(self) -> List[Player]:
        return list(dict.fromkeys(i for i, _ in self.values))

    @property
    def states(self) -> List[State]:
        return list(dict.fromkeys(s for _, s in self.values))

    def for_player(self, i: Player) -> "PayoffVector":
        return PayoffVector({key: v for key, v in self.values.items() if key[0] == i})

    def at_state(self, s: State) -> Dict[Player, Fraction]:
        return {i: v for (i, t), v in self.values.items() if t == s}

    def to_dict(self) -> Dict[str, Dict[str, str]]:
        """player → state → rational string."""
        out: Dict[str, Dict[str, str]] = {}
        for (i, s), v in self.values.items():
            out.setdefault(i, {})[s] = format_rational(v)
        return out

    def to_records(self) -> List[Dict[str, str]]:
        return [
            {"state": s, "player": i, "value": format_rational(v)}
            for (i, s), v in self.values.items()
        ]


@dataclass(frozen=True)
class DeviationValue:
    """
    Value v_{ε,i}(s) of the best imprecise deviation of one player, per state.

    ``exact`` is False when the values come from floating-point value
    iteration.
    """

    player: Player
    epsilon: Fraction
    values: Mapping[State, Number]
    exact: bool = True
    witnesses: Mapping[State, StationaryStrategy] = field(default_factory=dict)

    def at(self, s: State) -> Number:
        return self.values[s]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "player": self.player,
            "epsilon": format_rational(self.epsilon),
            "exact": self.exact,
            "values": {s: render_number(v) for s, v in self.values.items()},
            "witnesses": {s: w.to_dict() for s, w in self.witnesses.items()},
        }


class VerdictKind(str, Enum):
    NASH = "nash"
    EPSILON_NASH = "epsilon_nash"
    IMPRECISE = "imprecise"


@dataclass(frozen=True)
class DeviationWitness:
    """A profitable deviation found by a checker."""

    player: Player
    deviation: StationaryStrategy
    deviation_value: Fraction
    equilibrium_value: Fraction
    counter_strategy: Optional[StationaryStrategy] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "player": self.player,
            "deviation": self.deviation.to_dict(),
            "deviation_value": format_rational(self.deviation_value),
            "equilibrium_value": format_rational(self.equilibrium_value),
            "counter_strategy": (
                self.counter_strategy.to_dict() if self.counter_strategy is not None else None
            ),
        }


@dataclass(frozen=True)
class EquilibriumVerdict:
    """Outcome of an equilibrium check at a given initial state."""

    accepted: bool
    kind: VerdictKind
    state: State
    payoffs: Mapping[Player, Fraction]
    margins: Mapping[Player, Fraction]
    epsilon: Optional[Fraction] = None
    witness: Optional[DeviationWitness] = None
    diagnostics: Mapping[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "accepted": self.accepted,
            "state": self.state,
            "epsilon": format_rational(self.epsilon) if self.epsilon is not None else None,
            "payoffs": {i: format_rational(v) for i, v in self.payoffs.items()},
            "margins": {i: format_rational(v) for i, v in self.margins.items()},
            "witness": self.witness.to_dict() if self.witness is not None else None,
            "diagnostics": dict(self.diagnostics),
        }


@dataclass(frozen=True)
class MonteCarloEstimate:
    """Sampled payoff estimates with normal-approximation confidence half-widths."""

    estimates: Mapping[Player, float]
    half_widths: Mapping[Player, float]
    samples: int
    horizon: int
    confidence: float
    absorption_steps: np.ndarray = field(repr=False, compare=False)

    @property
    def absorbed_fraction(self) -> float:
        return float(np.mean(self.absorption_steps >= 0))

    def absorbed_within(self, steps: int) -> float:
        """Fraction of runs absorbed in a final state within ``steps`` steps."""
        absorbed = (self.absorption_steps >= 0) & (self.absorption_steps <= steps)
        return float(np.mean(absorbed))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "samples": self.samples,
            "horizon": self.horizon,
            "confidence": self.confidence,
            "absorbed_fraction": self.absorbed_fraction,
            "estimates": {i: float(v) for i, v in self.estimates.items()},
            "half_widths": {i: float(v) for i, v in self.half_widths.items()},
        }
