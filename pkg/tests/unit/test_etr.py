"""
Unit tests for the existential-theory-of-the-reals encoding and solver plumbing.
"""

import subprocess
from fractions import Fraction
from types import SimpleNamespace
from unittest.mock import patch

import pytest

from src.impeq.data.generators import chain_game
from src.impeq.exceptions import (
    CapExceededError,
    PreconditionError,
    SolverError,
    SolverUnavailableError,
)
from src.impeq.models.game import Distribution
from src.impeq.solvers.etr import (
    Polynomial,
    SmtEnv,
    dispatch,
    emit_formula,
    enumerate_guesses,
    enumerate_supports,
    iter_formulas,
    parse_model,
    prepare_encoding,
    run_solver,
    shift_bounds,
    shift_rewards,
    solve_with_etr,
)
from tests.helpers import load_game

EPSILON = Fraction(1, 10)

SAT_OUTPUT = """sat
(
  (define-fun p_0_0_0 () Real
    (/ 1.0 10.0))
  (define-fun u_0_0 () Real
    (- (/ 4.0 5.0)))
)
"""


class TestPolynomial:
    """Test cases for exact polynomials and their SMT-LIB rendering."""

    def test_product_rendering(self):
        """Test canonical term order after multiplication."""
        x = Polynomial.variable("x")
        y = Polynomial.variable("y")
        product = (x + Fraction(1, 2)) * y

        assert product.to_smtlib2() == "(+ (* (/ 1 2) y) (* x y))"
        assert product.degree() == 2
        assert product.variables() == {"x", "y"}

    def test_constants(self):
        """Test negative literals and the zero polynomial."""
        assert Polynomial.constant(-3).to_smtlib2() == "(- 3)"
        assert Polynomial().to_smtlib2() == "0"
        assert (Polynomial.variable("x") - Polynomial.variable("x")).is_constant()


class TestSmtEnv:
    """Test cases for the formula container."""

    def test_ground_facts(self):
        """Test that true ground constraints are dropped and false ones kept."""
        env = SmtEnv()
        env.le(1, 2, "true fact")
        env.le(2, 1, "false fact")

        assert [a.tag for a in env.assertions] == ["false fact"]

    def test_text_layout(self):
        """Test the header, declarations and trailer."""
        env = SmtEnv()
        x = env.decl("x", {"kind": "probability"})
        env.lt(0, x, "positive")
        text = env.to_smtlib2()

        assert text.startswith("(set-option :produce-models true)\n(set-logic QF_NRA)\n")
        assert "(declare-const x Real)" in text
        assert "(assert (< 0 x))" in text
        assert text.endswith("(check-sat)\n(get-model)\n(exit)\n")


class TestGuesses:
    """Test cases for support and deviation-game guesses."""

    def test_supports(self):
        """Test the three supports per player of the separating game."""
        assert len(list(enumerate_supports(load_game("fig3")))) == 9

    def test_guess_count(self):
        """Test the pruned guess count of the separating game."""
        assert len(list(enumerate_guesses(load_game("fig3"), EPSILON))) == 576

    def test_guess_cap(self):
        """Test the guess cap."""
        with pytest.raises(CapExceededError, match="more than 10 support guesses"):
            list(enumerate_guesses(load_game("fig3"), EPSILON, max_guesses=10))

    def test_delta_epsilon_restricts_supports(self):
        """Test that exit actions must stay in the support."""
        shifted, mapping, shift, spec = prepare_encoding(load_game("hide-or-run"), EPSILON)
        supports = list(enumerate_supports(shifted, spec))

        assert len(supports) == 4
        assert all("s" in support[("1", "s0")] for support in supports)
        assert len(list(enumerate_guesses(shifted, EPSILON, spec))) == 256


class TestRewardShift:
    """Test cases for shifting rewards to non-negative values."""

    def test_shift(self):
        """Test the shift of the hide-or-run rewards."""
        shifted, shift = shift_rewards(load_game("hide-or-run"))

        assert shift == 1
        assert shifted.reward("win", "1") == 2
        assert shifted.reward("win", "2") == 0

    def test_no_shift_needed(self):
        """Test that non-negative games are returned as is."""
        game = load_game("fig3")

        assert shift_rewards(game) == (game, 0)

    def test_shift_bounds(self):
        """Test that open ends stay open."""
        assert shift_bounds({"1": (Fraction(1, 2), None)}, Fraction(1)) == {
            "1": (Fraction(3, 2), None)
        }

    def test_negative_rewards_rejected(self):
        """Test that the encoder refuses negative rewards."""
        game = load_game("hide-or-run")
        shifted, _, _, spec = prepare_encoding(game, EPSILON)
        guess = next(enumerate_guesses(shifted, EPSILON, spec))

        with pytest.raises(PreconditionError, match="non-negative"):
            emit_formula(game, EPSILON, "s0", None, guess, spec)


class TestEmitFormula:
    """Test cases for formula emission."""

    def setup_method(self):
        """Set up test fixtures."""
        self.game = load_game("fig3")
        self.guess = next(enumerate_guesses(self.game, EPSILON))

    def test_pure_guess_is_linear(self):
        """Test that a pure support guess gives a linear formula."""
        formula = emit_formula(self.game, EPSILON, "s", None, self.guess)
        text = formula.to_smtlib2()

        assert formula.is_linear()
        assert "(set-logic QF_NRA)" in text
        assert "(check-sat)" in text

    def test_sidecar(self):
        """Test the metadata written next to each formula."""
        formula = emit_formula(self.game, EPSILON, "s", {"1": (None, Fraction(1))}, self.guess)
        sidecar = formula.sidecar(self.game)

        assert sidecar["s0"] == "s"
        assert sidecar["epsilon"] == "1/10"
        assert sidecar["guess"]["supports"]["1"] == {"s": ["a"]}
        assert set(sidecar["metrics"]) == {"assertions", "terms", "variables", "linear"}

    def test_unknown_bounds_player(self):
        """Test that bounds must name known players."""
        with pytest.raises(PreconditionError, match="unknown player 9"):
            emit_formula(self.game, EPSILON, "s", {"9": (Fraction(0), None)}, self.guess)

    def test_formula_size_grows_with_chain(self):
        """Test that longer chains give larger formulas."""
        sizes = []
        for n in (1, 2, 3):
            game = chain_game(n)
            formula = next(iter_formulas(game, EPSILON, "c0", None, None))
            sizes.append((formula.variable_count, formula.term_count))

        assert sizes[0] < sizes[1] < sizes[2]


class TestSolverPlumbing:
    """Test cases for model parsing, subprocess handling and dispatch."""

    def test_parse_sat_model(self):
        """Test reading decimal rationals from a model."""
        status, model = parse_model(SAT_OUTPUT)

        assert status == "sat"
        assert model == {"p_0_0_0": Fraction(1, 10), "u_0_0": Fraction(-4, 5)}

    def test_parse_unsat(self):
        """Test that unsat answers carry no model."""
        assert parse_model("unsat\n") == ("unsat", {})

    def test_parse_garbage(self):
        """Test that unexpected answers are reported."""
        with pytest.raises(SolverError, match="unexpected solver answer"):
            parse_model("(error \"line 1\")\n")

    def test_parse_irrational(self):
        """Test that algebraic witnesses are refused."""
        output = "sat\n((define-fun x () Real (root-obj (+ (^ x 2) (- 2)) 1)))\n"

        with pytest.raises(SolverError, match="root-obj"):
            parse_model(output)

    @patch("src.impeq.solvers.etr.subprocess.run")
    def test_solver_missing(self, mock_run):
        """Test that a missing binary is reported as unavailable."""
        mock_run.side_effect = FileNotFoundError("z3")

        with pytest.raises(SolverUnavailableError, match="not found"):
            run_solver("(check-sat)\n", "z3 -in")

    @patch("src.impeq.solvers.etr.subprocess.run")
    def test_solver_answer(self, mock_run):
        """Test that stdout is parsed."""
        mock_run.return_value = subprocess.CompletedProcess(
            args=["z3"], returncode=0, stdout="unsat\n", stderr=""
        )

        assert run_solver("(check-sat)\n") == ("unsat", {})
        assert mock_run.call_args.kwargs["input"] == "(check-sat)\n"

    @patch("src.impeq.solvers.etr.subprocess.run")
    def test_solver_timeout(self, mock_run):
        """Test that timeouts count as unknown."""
        mock_run.side_effect = subprocess.TimeoutExpired(cmd="z3", timeout=1)

        assert run_solver("(check-sat)\n", timeout=1) == ("unknown", {})

    @patch("src.impeq.solvers.etr.run_solver")
    def test_dispatch_stops_at_first_sat(self, mock_run):
        """Test that dispatch returns the lowest satisfiable index."""
        mock_run.side_effect = [("unsat", {}), ("unknown", {}), ("sat", {"x": Fraction(1)})]
        formulas = [SimpleNamespace(index=k, to_smtlib2=lambda: "") for k in range(5)]
        result = dispatch(formulas)

        assert result.status == "sat"
        assert result.index == 2
        assert result.tried == 3
        assert result.model == {"x": 1}

    @patch("src.impeq.solvers.etr.run_solver")
    def test_dispatch_unknown_wins_over_unsat(self, mock_run):
        """Test the overall status when nothing is satisfiable."""
        mock_run.side_effect = [("unsat", {}), ("unknown", {})]
        formulas = [SimpleNamespace(index=k, to_smtlib2=lambda: "") for k in range(2)]

        assert dispatch(formulas).status == "unknown"

    @patch("src.impeq.solvers.etr.run_solver")
    def test_solve_with_etr_pure_witness(self, mock_run):
        """Test the pipeline on a satisfiable first guess."""
        mock_run.return_value = ("sat", {})
        result = solve_with_etr(load_game("fig3"), EPSILON, "s")

        assert result.status == "sat"
        assert result.guess_index == 0
        assert result.shift == 0
        assert result.profile["1"].at("s") == Distribution.dirac("a")
        assert result.verdict.accepted
        assert result.to_dict()["guesses_tried"] == 1
