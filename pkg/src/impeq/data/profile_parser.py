"""
Profile files: player → state → action → rational string.

Missing actions have probability 0. Final states may be omitted; they then
play their first allowed action.
"""

import json
from fractions import Fraction
from typing import Dict

from pydantic import RootModel, ValidationError

from ..exceptions import ProfileError
from ..models.game import Game
from ..models.strategy import StationaryProfile, make_profile
from .game_parser import RationalString


class ProfileDocument(RootModel[Dict[str, Dict[str, Dict[str, RationalString]]]]):
    """Schema of a profile file."""


def parse_profile(text: str, game: Game) -> StationaryProfile:
    """
    Parse a profile document and validate it against ``game``.

    Args:
        text: JSON text
        game: Game whose allow sets the profile must respect

    Returns:
        StationaryProfile: Validated profile

    Raises:
        ProfileError: On malformed JSON, bad rationals, unknown identifiers,
            disallowed actions or rows not summing to 1
    """
    try:
        doc = ProfileDocument.model_validate_json(text)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first.get("loc", ())) or "document"
        raise ProfileError(f"{location}: {first.get('msg', 'invalid')}")
    table = {
        i: {s: {a: Fraction(p) for a, p in row.items()} for s, row in states.items()}
        for i, states in doc.root.items()
    }
    return make_profile(game, table)


def serialize_profile(profile: StationaryProfile) -> str:
    """Canonical JSON text for a profile."""
    return json.dumps(profile.to_dict(), indent=2)
