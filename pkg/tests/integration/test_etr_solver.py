"""
End-to-end runs of the ETR pipeline against a local z3 binary.
"""

from fractions import Fraction

import pytest

from src.impeq.solvers.etr import solve_with_etr
from tests.helpers import load_game

EPSILON = Fraction(1, 10)


@pytest.mark.requires_solver
@pytest.mark.integration
class TestEtrSolver:
    """Integration tests that need z3 on the PATH."""

    def test_hide_or_run_has_equilibrium(self):
        """Test that a Δ_ε equilibrium is found and re-checked."""
        result = solve_with_etr(load_game("hide-or-run"), EPSILON, "s0", timeout=120)

        assert result.status == "sat"
        assert result.shift == 1
        assert result.verdict.accepted
        assert result.profile["1"].at("s0").prob("s") >= EPSILON

    def test_unreachable_bound(self):
        """Test that player 1 cannot be promised a payoff of 1/2."""
        result = solve_with_etr(
            load_game("hide-or-run"),
            EPSILON,
            "s0",
            bounds={"1": (Fraction(1, 2), None)},
            timeout=120,
        )

        assert result.status == "unsat"
        assert result.profile is None
        assert result.guesses_tried == 256
