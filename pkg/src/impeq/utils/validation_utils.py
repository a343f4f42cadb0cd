"""
Validation and rational-number helpers for impeq.
"""

import re
from fractions import Fraction
from typing import Iterable, Union

from ..exceptions import PreconditionError

RATIONAL_PATTERN = re.compile(r"^-?\d+(/\d+)?$")

RationalLike = Union[str, int, Fraction]


def is_rational_string(text: str) -> bool:
    """
    Check a string against the rational grammar ``-?digits(/digits)?``.

    Args:
        text: Candidate string

    Returns:
        bool: True if the string is a well-formed rational with a nonzero
        denominator
    """
    if not isinstance(text, str) or not RATIONAL_PATTERN.match(text):
        return False
    if "/" in text and int(text.split("/")[1]) == 0:
        return False
    return True


def parse_rational(value: RationalLike) -> Fraction:
    """
    Parse an exact rational from the file/flag grammar.

    Decimals such as ``"0.1"`` are rejected.

    Args:
        value: Rational string, integer or Fraction

    Returns:
        Fraction: Parsed value

    Raises:
        ValueError: If the value does not follow the grammar
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ValueError(f"Not a rational: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if not is_rational_string(value):
        raise ValueError(f"Not a rational in p/q form: {value!r}")
    return Fraction(value)


def format_rational(value: Fraction) -> str:
    """Render a Fraction as ``"p/q"`` (or ``"p"`` for integers)."""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def validate_epsilon(epsilon: Fraction, action_count: int = 0) -> Fraction:
    """
    Validate a perturbation level for Δ_ε-based operations.

    Args:
        epsilon: Perturbation level
        action_count: Total number of actions; when positive, epsilon must not
            exceed ``1/action_count``

    Returns:
        Fraction: The validated epsilon

    Raises:
        PreconditionError: If epsilon is outside ``(0, 1]`` or above the
            action bound
    """
    epsilon = Fraction(epsilon)
    if not 0 < epsilon <= 1:
        raise PreconditionError(f"epsilon must lie in (0, 1], got {format_rational(epsilon)}")
    if action_count > 0 and epsilon > Fraction(1, action_count):
        raise PreconditionError(
            f"epsilon {format_rational(epsilon)} exceeds 1/|Act| = 1/{action_count}"
        )
    return epsilon


def validate_unique(names: Iterable[str]) -> bool:
    """
    Validate that identifiers are unique and non-empty.

    Args:
        names: Identifiers

    Returns:
        bool: True if all identifiers are distinct non-empty strings
    """
    seen = set()
    for name in names:
        if not isinstance(name, str) or not name or name in seen:
            return False
        seen.add(name)
    return True
