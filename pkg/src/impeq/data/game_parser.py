"""
Parser, validator and serializer for the JSON game format.

Document shape::

    {
      "states":  ["s0", "win", "lose"],
      "players": ["1", "2"],
      "actions": ["w", "s", "h", "r"],
      "allow":   {"s0": {"1": ["w", "s"], "2": ["h", "r"]}, ...},
      "tab":     {"s0": {"w,h": [["s0", "1"]], ...}, ...},
      "finals":  ["win", "lose"],
      "rewards": {"win": {"1": "1", "2": "-1"}, ...}
    }

Final states may omit ``allow`` (every player gets the first declared action)
and ``tab`` (Dirac self-loops are filled in).
"""

import itertools
import json
from fractions import Fraction
from typing import Annotated, Dict, List, Tuple

from pydantic import AfterValidator, BaseModel, ConfigDict, ValidationError

from ..exceptions import GameSemanticError, GameSyntaxError
from ..models.game import Arena, Distribution, Game, JointAction, State
from ..utils.logging_utils import setup_logging
from ..utils.validation_utils import format_rational, is_rational_string, validate_unique

logger = setup_logging(__name__)


def _check_rational(value: str) -> str:
    if not is_rational_string(value):
        raise ValueError(f"not a rational in p/q form: {value!r}")
    return value


RationalString = Annotated[str, AfterValidator(_check_rational)]


class GameDocument(BaseModel):
    """Schema of a game file (shape only; semantics are checked afterwards)."""

    model_config = ConfigDict(extra="forbid", strict=True)

    states: List[str]
    players: List[str]
    actions: List[str]
    allow: Dict[str, Dict[str, List[str]]] = {}
    tab: Dict[str, Dict[str, List[Tuple[str, RationalString]]]] = {}
    finals: List[str]
    rewards: Dict[str, Dict[str, RationalString]]


def _build_allow(doc: GameDocument, finals: set) -> Dict[Tuple[str, str], Tuple[str, ...]]:
    state_set, player_set = set(doc.states), set(doc.players)
    action_rank = {a: k for k, a in enumerate(doc.actions)}
    for s, row in doc.allow.items():
        if s not in state_set:
            raise GameSemanticError(f"unknown state {s} in allow")
        for i in row:
            if i not in player_set:
                raise GameSemanticError(f"unknown player {i} in allow[{s}]")

    allow: Dict[Tuple[str, str], Tuple[str, ...]] = {}
    for s in doc.states:
        for i in doc.players:
            listed = doc.allow.get(s, {}).get(i)
            if listed is None:
                if s in finals:
                    allow[(s, i)] = (doc.actions[0],)
                    continue
                raise GameSemanticError(f"missing allow entry for player {i} at state {s}")
            if not listed:
                raise GameSemanticError(f"empty allow set for player {i} at state {s}")
            for a in listed:
                if a not in action_rank:
                    raise GameSemanticError(f"unknown action {a} in allow[{s}][{i}]")
            if len(set(listed)) != len(listed):
                raise GameSemanticError(f"duplicate action in allow[{s}][{i}]")
            allow[(s, i)] = tuple(sorted(listed, key=action_rank.__getitem__))
    return allow


def _parse_row(s: State, key: str, row: List[Tuple[str, str]], state_set: set) -> Distribution:
    entries: Dict[str, Fraction] = {}
    for target, prob in row:
        if target not in state_set:
            raise GameSemanticError(f"unknown state {target} in tab[{s}][{key}]")
        if target in entries:
            raise GameSemanticError(f"duplicate successor {target} in tab[{s}][{key}]")
        entries[target] = Fraction(prob)
    try:
        return Distribution(entries)
    except ValueError as e:
        raise GameSemanticError(f"tab[{s}][{key}]: {e}")


def _build_tab(
    doc: GameDocument,
    allow: Dict[Tuple[str, str], Tuple[str, ...]],
    finals: set,
) -> Dict[Tuple[str, JointAction], Distribution]:
    state_set = set(doc.states)
    tab: Dict[Tuple[str, JointAction], Distribution] = {}
    for s, rows in doc.tab.items():
        if s not in state_set:
            raise GameSemanticError(f"unknown state {s} in tab")
        for key, row in rows.items():
            joint = tuple(key.split(","))
            if len(joint) != len(doc.players):
                raise GameSemanticError(
                    f"tab[{s}][{key}] names {len(joint)} actions for {len(doc.players)} players"
                )
            for i, a in zip(doc.players, joint):
                if a not in allow[(s, i)]:
                    raise GameSemanticError(
                        f"tab[{s}][{key}]: action {a} not allowed for player {i}"
                    )
            tab[(s, joint)] = _parse_row(s, key, row, state_set)

    for s in doc.states:
        rows_given = s in doc.tab
        joints = _joint_actions(doc, allow, s)
        for joint in joints:
            if (s, joint) in tab:
                continue
            if s in finals and not rows_given:
                tab[(s, joint)] = Distribution.dirac(s)
                continue
            raise GameSemanticError(f"missing joint action {','.join(joint)} at state {s}")
    return tab


def _joint_actions(
    doc: GameDocument, allow: Dict[Tuple[str, str], Tuple[str, ...]], s: str
) -> List[JointAction]:
    return list(itertools.product(*(allow[(s, i)] for i in doc.players)))


def build_game(doc: GameDocument) -> Game:
    """
    Turn a schema-valid document into a validated Game.

    Raises:
        GameSemanticError: On any semantic violation
    """
    for kind, names in (("state", doc.states), ("player", doc.players), ("action", doc.actions)):
        if not names:
            raise GameSemanticError(f"at least one {kind} is required")
        if not validate_unique(names):
            raise GameSemanticError(f"{kind} identifiers must be unique and non-empty")

    state_set = set(doc.states)
    finals = set(doc.finals)
    unknown_finals = sorted(finals - state_set)
    if unknown_finals:
        raise GameSemanticError(f"unknown final state {unknown_finals[0]}")

    allow = _build_allow(doc, finals)
    tab = _build_tab(doc, allow, finals)
    arena = Arena(
        states=tuple(doc.states),
        players=tuple(doc.players),
        actions=tuple(doc.actions),
        allow=allow,
        tab=tab,
    )

    sinks = {s for s in doc.states if arena.is_sink(s)}
    for s in doc.states:
        if s in finals and s not in sinks:
            raise GameSemanticError(f"final state {s} is not a sink")
        if s in sinks and s not in finals:
            raise GameSemanticError(f"sink state {s} is not declared final")

    for f in doc.rewards:
        if f not in finals:
            raise GameSemanticError(f"rewards given for non-final state {f}")
    rewards: Dict[str, Dict[str, Fraction]] = {}
    for f in doc.finals:
        row = doc.rewards.get(f)
        if row is None:
            raise GameSemanticError(f"missing rewards for final state {f}")
        for i in row:
            if i not in doc.players:
                raise GameSemanticError(f"unknown player {i} in rewards[{f}]")
        for i in doc.players:
            if i not in row:
                raise GameSemanticError(f"missing reward for player {i} at final {f}")
        rewards[f] = {i: Fraction(row[i]) for i in doc.players}

    return Game(arena=arena, rewards=rewards, finals=frozenset(finals))


def parse_game(text: str) -> Game:
    """
    Parse and validate a game document.

    Args:
        text: UTF-8 JSON text

    Returns:
        Game: Validated game with exact rational probabilities and rewards

    Raises:
        GameSyntaxError: Malformed JSON (with line/column) or schema violation
        GameSemanticError: Unknown identifiers, missing joint actions,
            distributions not summing to 1, non-sink finals
    """
    try:
        doc = GameDocument.model_validate_json(text)
    except ValidationError as e:
        raise GameSyntaxError(_describe_validation_error(e))
    game = build_game(doc)
    logger.debug(
        f"Parsed game with {len(game.states)} states, {len(game.players)} players, "
        f"{len(game.finals)} finals"
    )
    return game


def _describe_validation_error(error: ValidationError) -> str:
    first = error.errors()[0]
    location = ".".join(str(part) for part in first.get("loc", ())) or "document"
    return f"{location}: {first.get('msg', 'invalid')}"


def game_to_dict(game: Game) -> Dict[str, object]:
    """Canonical dictionary form of a game (arena order everywhere)."""
    arena = game.arena
    return {
        "states": list(arena.states),
        "players": list(arena.players),
        "actions": list(arena.actions),
        "allow": {
            s: {i: list(arena.allowed(s, i)) for i in arena.players} for s in arena.states
        },
        "tab": {
            s: {
                ",".join(joint): [
                    [target, format_rational(p)] for target, p in arena.tab[(s, joint)].items()
                ]
                for joint in arena.joint_actions(s)
            }
            for s in arena.states
        },
        "finals": [s for s in arena.states if s in game.finals],
        "rewards": {
            f: {i: format_rational(game.reward(f, i)) for i in arena.players}
            for f in arena.states
            if f in game.finals
        },
    }


def serialize_game(game: Game) -> str:
    """Serialize a game to canonical JSON text accepted by ``parse_game``."""
    return json.dumps(game_to_dict(game), indent=2)
