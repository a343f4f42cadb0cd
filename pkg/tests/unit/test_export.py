"""
Unit tests for result rendering, report payloads and game generators.
"""

import json
from fractions import Fraction

import pytest

from src.impeq.data.export import payoffs_frame, render, search_frame, to_json, verdict_frame
from src.impeq.data.generators import chain_game, random_game
from src.impeq.data.game_parser import serialize_game
from src.impeq.data.reports import deviation_payload, payoff_payload, validation_payload
from src.impeq.exceptions import PreconditionError
from src.impeq.solvers.equilibrium import check_imprecise
from src.impeq.solvers.payoff import evaluate_profile
from src.impeq.solvers.structure import cycling_states
from tests.helpers import load_game, load_profile


class TestExport:
    """Test cases for JSON and CSV rendering."""

    def setup_method(self):
        """Set up test fixtures."""
        self.game = load_game("fig3")
        self.profile = load_profile(self.game, "fig3-separating")

    def test_json_is_canonical(self):
        """Test sorted keys and the trailing newline."""
        text = to_json({"b": 1, "a": {"d": 2, "c": 3}})

        assert text.endswith("\n")
        assert list(json.loads(text)) == ["a", "b"]
        assert text.index('"c"') < text.index('"d"')

    def test_payoffs_csv(self):
        """Test the payoff table."""
        payoffs = evaluate_profile(self.game, self.profile)
        text = render(payoffs.to_dict(), payoffs_frame(payoffs), "csv")
        lines = text.splitlines()

        assert lines[0] == "state,player,value"
        assert "one,1,1" in lines

    def test_verdict_csv(self):
        """Test one verdict row per player."""
        verdict = check_imprecise(self.game, self.profile, "s", Fraction(1, 10))
        frame = verdict_frame(verdict)

        assert list(frame["player"]) == ["1", "2"]
        assert list(frame["margin"]) == ["-9/100", "0"]

    def test_search_frame_empty(self):
        """Test that an empty search still has a header."""
        assert render([], search_frame([]), "csv").startswith("profile,player,state")

    def test_unknown_format(self):
        """Test that only json and csv are accepted."""
        with pytest.raises(ValueError, match="unknown output format"):
            render({}, search_frame([]), "xml")


class TestReports:
    """Test cases for the shared JSON payloads."""

    def test_validation_payload(self):
        """Test the summary of a cycling game with negative-free rewards."""
        payload = validation_payload(load_game("cycling-trap"))

        assert payload["valid"]
        assert payload["cycle_free"] is False
        assert payload["finals"] == ["good", "bad"]
        assert payload["reward_shift"] == "0"

    def test_reward_shift(self):
        """Test the shift reported for negative rewards."""
        assert validation_payload(load_game("hide-or-run"))["reward_shift"] == "1"

    def test_payoff_payload(self):
        """Test payoffs at one state."""
        game = load_game("team")
        payload = payoff_payload(game, load_profile(game, "team-uniform"), "s")

        assert payload["at_state"] == {"1": "3/4", "2": "1/4"}

    def test_deviation_payload(self):
        """Test both value methods on the separating game."""
        game = load_game("fig3")
        profile = load_profile(game, "fig3-separating")
        ball = deviation_payload(game, profile, Fraction(1, 10), "1")
        turn = deviation_payload(game, profile, Fraction(1, 10), "1", "turn-based")

        assert ball["values"]["1"]["values"]["s"] == "9/100"
        assert turn["values"]["1"]["values"]["s"] == "9/100"
        assert turn["method"] == "turn-based"

    def test_deviation_payload_errors(self):
        """Test unknown methods and players."""
        game = load_game("fig3")
        profile = load_profile(game, "fig3-separating")

        with pytest.raises(ValueError, match="unknown value method"):
            deviation_payload(game, profile, Fraction(1, 10), method="grid")
        with pytest.raises(ValueError, match="unknown player 7"):
            deviation_payload(game, profile, Fraction(1, 10), "7")


class TestGenerators:
    """Test cases for the seeded game generators."""

    def test_random_game_is_deterministic(self):
        """Test that a seed fixes the game."""
        assert serialize_game(random_game(5)) == serialize_game(random_game(5))

    def test_random_game_shape(self):
        """Test state names, finals and reward ranges."""
        game = random_game(3, states=5, finals=2, non_negative=True)

        assert game.states == ("s0", "s1", "s2", "f0", "f1")
        assert game.finals == frozenset({"f0", "f1"})
        assert game.min_reward() >= 0
        assert game.max_allowed_actions() <= 2

    def test_random_game_arguments(self):
        """Test that at least one non-final state is needed."""
        with pytest.raises(PreconditionError):
            random_game(0, states=2, finals=2)

    def test_chain_game(self):
        """Test the chain game layout."""
        game = chain_game(3)

        assert game.states == ("c0", "c1", "c2", "goal", "stop")
        assert game.successors("c2", ("a", "a")).support() == {"goal"}
        assert cycling_states(game) == set()
        with pytest.raises(PreconditionError):
            chain_game(0)
