"""
Exception hierarchy for impeq.

Every library error derives from ``ImpeqError``; most also derive from
``ValueError`` so callers that only care about bad input can catch that.
"""


class ImpeqError(Exception):
    """Base class for all impeq errors."""


class GameFormatError(ImpeqError, ValueError):
    """A game document could not be turned into a valid Game."""


class GameSyntaxError(GameFormatError):
    """The document is not well-formed JSON or violates the schema shape."""


class GameSemanticError(GameFormatError):
    """The document is well-formed but describes an invalid game."""


class ProfileError(ImpeqError, ValueError):
    """A strategy or profile is inconsistent with the game it is used on."""


class CapExceededError(ImpeqError, ValueError):
    """A configured enumeration cap was exceeded."""


class PreconditionError(ImpeqError, ValueError):
    """An operation was called outside its domain."""


class SolverError(ImpeqError, RuntimeError):
    """Internal solver failure or external solver failure."""


class SolverUnavailableError(SolverError):
    """The external SMT solver command could not be started."""


class ConfigurationError(ImpeqError, ValueError):
    """A configuration file is not valid YAML or not a mapping."""
