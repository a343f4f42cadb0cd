"""
Data module for impeq.

This module contains the game and profile file formats, result exports and
seeded game generators.
"""

from .export import render, to_json
from .game_parser import game_to_dict, parse_game, serialize_game
from .generators import chain_game, random_game
from .profile_parser import parse_profile, serialize_profile

__all__ = [
    "parse_game",
    "serialize_game",
    "game_to_dict",
    "parse_profile",
    "serialize_profile",
    "render",
    "to_json",
    "random_game",
    "chain_game",
]
