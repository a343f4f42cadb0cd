"""
Unit tests for the one-player reduction and the turn-based deviation game.
"""

import json
from fractions import Fraction

import numpy as np
import pytest

from src.impeq.data.game_parser import parse_game
from src.impeq.data.generators import random_game
from src.impeq.exceptions import PreconditionError
from src.impeq.models.game import Distribution
from src.impeq.models.strategy import (
    enumerate_pure_memoryless,
    make_profile,
    make_strategy,
    uniform_profile,
)
from src.impeq.solvers.deviation_game import (
    DEVIATOR,
    PERTURBER,
    TurnNode,
    build_deviation_game,
    correspondence_check,
    extract_correspondence,
    fix_coplayers,
    imprecise_deviation_value,
    interval_bounds,
    solve_turn_based,
    turn_based_deviation_value,
)
from src.impeq.solvers.payoff import (
    ConstrainedActionSet,
    constrained_best_response,
    evaluate_profile,
)
from tests.helpers import load_game, load_profile, random_profile, random_row


def three_action_game():
    document = {
        "states": ["s", "t"],
        "players": ["1"],
        "actions": ["x", "y", "z"],
        "allow": {"s": {"1": ["x", "y", "z"]}},
        "tab": {"s": {"x": [["t", "1"]], "y": [["t", "1"]], "z": [["t", "1"]]}},
        "finals": ["t"],
        "rewards": {"t": {"1": "1"}},
    }
    return parse_game(json.dumps(document))


class TestDeviationGame:
    """Test cases for the turn-based deviation game."""

    def setup_method(self):
        """Set up test fixtures."""
        self.game = load_game("fig3")
        self.profile = load_profile(self.game, "fig3-separating")
        self.epsilon = Fraction(1, 10)

    def test_interval_bounds(self):
        """Test the four clamped intervals."""
        assert interval_bounds(Fraction(1, 10)) == [
            ("low", Fraction(0), Fraction(1, 10)),
            ("low2", Fraction(0), Fraction(1, 5)),
            ("high2", Fraction(4, 5), Fraction(1)),
            ("high", Fraction(9, 10), Fraction(1)),
        ]
        assert interval_bounds(Fraction(3, 4))[1] == ("low2", Fraction(0), Fraction(1))

    def test_fix_coplayers(self):
        """Test the one-player game against the separating profile."""
        one_player = fix_coplayers(self.game, self.profile, "1")

        assert one_player.players == ("1",)
        assert one_player.successors("s", ("a",)) == Distribution.dirac("zero")
        assert one_player.successors("s", ("b",)) == Distribution(
            {"one": Fraction(1, 10), "zero": Fraction(9, 10)}
        )

    def test_build_deviation_game(self):
        """Test node counts and owners."""
        tbg = build_deviation_game(fix_coplayers(self.game, self.profile, "1"), "1", self.epsilon)

        assert len(tbg.nodes) == 7
        assert tbg.owner[TurnNode("s")] == DEVIATOR
        assert len(tbg.perturber_nodes) == 4
        assert all(tbg.owner[n] == PERTURBER for n in tbg.perturber_nodes)
        assert tbg.action_pairs == {"s": ("a", "b")}
        assert tbg.is_terminal(TurnNode("one"))
        assert str(tbg.perturber_nodes[0]) == "s[0,1/10]low"

    def test_three_actions_rejected(self):
        """Test that more than two actions per state are refused."""
        game = three_action_game()

        with pytest.raises(PreconditionError, match="at most 2"):
            build_deviation_game(game, "1", self.epsilon)

    def test_needs_one_player_game(self):
        """Test that the input must be a one-player game."""
        with pytest.raises(PreconditionError, match="one-player"):
            build_deviation_game(self.game, "1", self.epsilon)

    def test_turn_based_value(self):
        """Test the max-min value of the deviation game."""
        tbg = build_deviation_game(fix_coplayers(self.game, self.profile, "1"), "1", self.epsilon)
        value, deviator, perturber = solve_turn_based(tbg)

        assert value.exact
        assert value.at("s") == Fraction(9, 100)
        chosen = next(iter(tbg.moves[TurnNode("s")][deviator[TurnNode("s")]]))
        assert chosen.label == "low"

    def test_ball_and_turn_based_agree(self):
        """Test that both deviation values coincide on every state."""
        for i in self.game.players:
            ball = imprecise_deviation_value(self.game, self.profile, i, self.epsilon)
            turn = turn_based_deviation_value(self.game, self.profile, i, self.epsilon)
            assert dict(ball.values) == dict(turn.values)

    def test_imprecise_deviation_witness(self):
        """Test that the witness of player 1 is the pure deviation to b."""
        value = imprecise_deviation_value(self.game, self.profile, "1", self.epsilon)

        assert value.at("s") == Fraction(9, 100)
        assert value.witnesses["s"].at("s") == Distribution.dirac("b")
        assert value.to_dict()["values"]["s"] == "9/100"

    def test_correspondence(self):
        """Test that optimal turn-based strategies map back to strategy pairs."""
        tbg = build_deviation_game(fix_coplayers(self.game, self.profile, "1"), "1", self.epsilon)
        _, deviator, perturber = solve_turn_based(tbg)
        sigma, sigma_prime = extract_correspondence(tbg, deviator, perturber)

        assert sigma.at("s") == Distribution.dirac("b")
        assert sigma_prime.at("s") == Distribution({"a": Fraction(1, 10), "b": Fraction(9, 10)})
        assert correspondence_check(sigma, sigma_prime, (deviator, perturber), tbg)

    def test_value_iteration_path(self):
        """Test the floating-point fallback on the team game."""
        game = load_game("team")
        profile = uniform_profile(game)
        tbg = build_deviation_game(fix_coplayers(game, profile, "1"), "1", self.epsilon)
        value, _, _ = solve_turn_based(tbg, enumeration_threshold=0)

        assert not value.exact
        assert value.at("s") == pytest.approx(0.75, abs=1e-6)
        assert value.to_dict()["exact"] is False


class TestDeviationProperties:
    """Properties of the reduction and of deviation values on varied profiles."""

    @pytest.mark.parametrize("seed", range(50))
    def test_fix_coplayers_preserves_payoffs(self, seed):
        """Test that the one-player game pays i exactly what σ[i/σ′] pays."""
        game = random_game(seed, states=4, players=2 + seed % 2, finals=2)
        rng = np.random.default_rng(seed)
        profile = random_profile(game, rng)
        i = game.players[seed % len(game.players)]
        table = {s: random_row(rng, game.allowed(s, i)) for s in game.non_final_states}
        reduced = fix_coplayers(game, profile, i)

        alone = evaluate_profile(reduced, make_profile(reduced, {i: table}))
        together = evaluate_profile(game, profile.replace(i, make_strategy(game, i, table)))
        for s in game.states:
            assert alone.get(i, s) == together.get(i, s)

    @pytest.mark.parametrize(
        "name,player", [("quit-loop", "1"), ("quit-loop", "2"), ("hide-or-run", "1")]
    )
    def test_worst_point_shrinks_with_radius(self, name, player):
        """Test that the perturber's answer only gets worse for i as the ball grows."""
        game = load_game(name)
        profile = load_profile(game, f"{name}-eps")
        low, high = game.reward_range(player)
        radii = [Fraction(0), Fraction(1, 20), Fraction(1, 10), Fraction(1, 4), Fraction(1, 2)]

        for deviation in enumerate_pure_memoryless(game, player):
            direct = evaluate_profile(game, profile.replace(player, deviation))
            previous = None
            for radius in radii:
                ball = ConstrainedActionSet.ball(game, deviation, radius)
                worst, _ = constrained_best_response(game, profile, player, ball, "min")
                current = {s: worst.get(player, s) for s in game.states}
                if radius == 0:
                    assert current == {s: direct.get(player, s) for s in game.states}
                for s in game.states:
                    assert low <= current[s] <= high
                    if previous is not None:
                        assert current[s] <= previous[s]
                previous = current

    @pytest.mark.parametrize("name", ["quit-loop", "hide-or-run", "fig3"])
    def test_deviation_value_decreases_with_epsilon(self, name):
        """Test that deviation values start at the best response and never grow with ε."""
        game = load_game(name)
        profile = uniform_profile(game)
        for i in game.players:
            best, _ = constrained_best_response(
                game, profile, i, ConstrainedActionSet.full_simplex(game, i)
            )
            previous = None
            for epsilon in (Fraction(0), Fraction(1, 10), Fraction(1, 4), Fraction(1, 2)):
                value = imprecise_deviation_value(game, profile, i, epsilon)
                if epsilon == 0:
                    assert all(value.at(s) == best.get(i, s) for s in game.states)
                if previous is not None:
                    assert all(value.at(s) <= previous.at(s) for s in game.states)
                previous = value

    @pytest.mark.parametrize("seed", range(20))
    def test_ball_and_turn_based_agree_on_random_profiles(self, seed):
        """Test both deviation values on non-uniform co-player profiles."""
        game = random_game(seed, states=4, finals=2)
        profile = random_profile(game, np.random.default_rng(100 + seed))
        for epsilon in (Fraction(1, 10), Fraction(1, 4)):
            for i in game.players:
                ball = imprecise_deviation_value(game, profile, i, epsilon)
                turn = turn_based_deviation_value(game, profile, i, epsilon)
                assert turn.exact
                assert dict(ball.values) == dict(turn.values)
