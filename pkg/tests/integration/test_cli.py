"""
Integration tests for the command-line front end.
"""

import json

import pytest

from src.impeq.scripts.cli import main
from tests.helpers import game_path, profile_path

FIXTURE_GAMES = ("fig3", "hide-or-run", "quit-loop", "team", "cycling-trap")


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("IMPEQ_CONFIG", "IMPEQ_SOLVER_CMD", "IMPEQ_THREADS", "IMPEQ_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)


class TestCli:
    """Integration tests for the impeq command."""

    def test_validate_fixtures(self, capsys):
        """Test that every shipped game validates."""
        for name in FIXTURE_GAMES:
            code, out, _ = run(capsys, "validate", "--game", game_path(name))
            assert code == 0
            assert json.loads(out)["valid"] is True

    def test_validate_missing_file(self, capsys):
        """Test that unreadable files are usage errors."""
        code, out, err = run(capsys, "validate", "--game", game_path("absent"))

        assert code == 2
        assert out == ""
        assert err.startswith("impeq: error:")

    def test_analyze(self, capsys):
        """Test the structural report of the cycling game."""
        code, out, _ = run(
            capsys, "analyze", "--game", game_path("cycling-trap"), "--epsilon", "1/10"
        )
        report = json.loads(out)

        assert code == 0
        assert report["cycling_states"] == ["trap"]
        assert report["termination_bound"]["k"] == 4

    def test_eval(self, capsys):
        """Test exact payoffs of the quitting game."""
        code, out, _ = run(
            capsys,
            "eval",
            "--game", game_path("quit-loop"),
            "--profile", profile_path("quit-loop-eps"),
            "--state", "1",
        )

        assert code == 0
        assert json.loads(out)["at_state"] == {"1": "37/57", "2": "39/57"}

    def test_eval_needs_profile(self, capsys):
        """Test that eval without a profile is a usage error."""
        code, _, err = run(capsys, "eval", "--game", game_path("fig3"))

        assert code == 2
        assert "needs --profile" in err

    def test_check_exit_codes(self, capsys):
        """Test accepted, rejected and invalid checks on hide-or-run."""
        game = game_path("hide-or-run")
        profile = profile_path("hide-or-run-eps")

        accepted, out, _ = run(
            capsys, "check", "--game", game, "--profile", profile, "--epsilon", "1/10"
        )
        assert accepted == 0
        assert json.loads(out)["kind"] == "imprecise"

        rejected, out, _ = run(
            capsys, "check", "--game", game, "--profile", profile, "--kind", "nash"
        )
        assert rejected == 1
        assert json.loads(out)["witness"]["player"] == "2"

        invalid, out, err = run(
            capsys,
            "check",
            "--game", game,
            "--profile", profile_path("hide-or-run-bad-action"),
            "--epsilon", "1/10",
        )
        assert invalid == 2
        assert "not allowed" in err

    def test_separating_profile(self, capsys):
        """Test that ε-Nash accepts what the imprecise checker rejects."""
        game = game_path("fig3")
        profile = profile_path("fig3-separating")

        eps_nash, _, _ = run(
            capsys, "check", "--game", game, "--profile", profile,
            "--kind", "eps-nash", "--epsilon", "1/10",
        )
        imprecise, out, _ = run(
            capsys, "check", "--game", game, "--profile", profile, "--epsilon", "1/10"
        )

        assert eps_nash == 0
        assert imprecise == 1
        assert json.loads(out)["witness"]["deviation_value"] == "9/100"

    def test_check_csv(self, capsys):
        """Test the CSV verdict table."""
        code, out, _ = run(
            capsys,
            "check",
            "--game", game_path("team"),
            "--profile", profile_path("team-uniform"),
            "--kind", "nash",
            "--format", "csv",
        )

        assert code == 0
        assert out.splitlines()[0] == "kind,state,player,accepted,payoff,margin"

    def test_epsilon_must_be_rational(self, capsys):
        """Test that decimal and missing epsilons are usage errors."""
        game = game_path("fig3")
        profile = profile_path("fig3-separating")

        decimal, _, _ = run(
            capsys, "check", "--game", game, "--profile", profile, "--epsilon", "0.1"
        )
        missing, _, err = run(capsys, "check", "--game", game, "--profile", profile)

        assert decimal == 2
        assert missing == 2
        assert "needs --epsilon" in err

    def test_unknown_state(self, capsys):
        """Test that an unknown initial state is a usage error."""
        code, _, _ = run(
            capsys,
            "check",
            "--game", game_path("fig3"),
            "--profile", profile_path("fig3-separating"),
            "--epsilon", "1/10",
            "--state", "nowhere",
        )

        assert code == 2

    def test_value_turn_based(self, capsys):
        """Test deviation values of one player through the deviation game."""
        code, out, _ = run(
            capsys,
            "value",
            "--game", game_path("fig3"),
            "--profile", profile_path("fig3-separating"),
            "--epsilon", "1/10",
            "--player", "1",
            "--method", "turn-based",
        )
        payload = json.loads(out)

        assert code == 0
        assert list(payload["values"]) == ["1"]
        assert payload["values"]["1"]["values"]["s"] == "9/100"

    def test_solve(self, capsys):
        """Test the best-response iteration on hide-or-run."""
        code, out, _ = run(
            capsys, "solve", "--game", game_path("hide-or-run"), "--epsilon", "1/10"
        )
        payload = json.loads(out)

        assert code == 0
        assert payload["verdict"]["accepted"] is True
        assert payload["verdict"]["state"] == "s0"

    def test_search_csv(self, capsys):
        """Test the grid search on the team game."""
        code, out, _ = run(
            capsys,
            "search",
            "--game", game_path("team"),
            "--kind", "nash",
            "--grid", "2",
            "--format", "csv",
        )
        lines = out.splitlines()

        assert code == 0
        assert lines[0] == "profile,player,state,action,probability,payoff"
        assert "0,1,s,T1,1/2,3/4" in lines

    def test_emit_single_formula(self, capsys):
        """Test printing one SMT-LIB problem."""
        code, out, _ = run(
            capsys, "emit-etr", "--game", game_path("fig3"), "--epsilon", "1/10"
        )

        assert code == 0
        assert out.startswith("(set-option :produce-models true)")
        assert out.rstrip().endswith("(exit)")

    def test_emit_missing_guess(self, capsys):
        """Test that a guess index past the enumeration is a usage error."""
        code, _, err = run(
            capsys,
            "emit-etr",
            "--game", game_path("fig3"),
            "--epsilon", "1/10",
            "--guess", "100000",
        )

        assert code == 2
        assert "no guess with index 100000" in err

    def test_emit_output_dir(self, capsys, tmp_path):
        """Test writing every guess with its sidecar."""
        code, out, _ = run(
            capsys,
            "emit-etr",
            "--game", game_path("hide-or-run"),
            "--epsilon", "1/10",
            "--bounds", "1=-1:",
            "--output-dir", tmp_path / "formulas",
        )
        payload = json.loads(out)
        first = tmp_path / "formulas" / "guess-000000"

        assert code == 0
        assert payload["guesses"] == 256
        assert payload["shift"] == "1"
        assert first.with_suffix(".smt2").read_text().startswith("(set-option")
        assert json.loads(first.with_suffix(".json").read_text())["shift"] == "1"

    def test_dispatch_without_solver(self, capsys):
        """Test the skip exit code when the solver binary is absent."""
        code, _, err = run(
            capsys,
            "emit-etr",
            "--game", game_path("fig3"),
            "--epsilon", "1/10",
            "--dispatch",
            "--solver-cmd", "definitely-not-a-solver",
        )

        assert code == 3
        assert "solver absent" in err

    def test_simulate_is_seeded(self, capsys):
        """Test that the same seed prints the same estimate."""
        argv = (
            "simulate",
            "--game", game_path("quit-loop"),
            "--profile", profile_path("quit-loop-eps"),
            "--state", "1",
            "--samples", "2000",
            "--horizon", "300",
            "--seed", "4",
        )
        first_code, first, _ = run(capsys, *argv)
        second_code, second, _ = run(capsys, *argv)
        payload = json.loads(first)

        assert first_code == second_code == 0
        assert first == second
        assert payload["seed"] == 4
        assert abs(payload["estimates"]["1"] - 37 / 57) < 0.05

    def test_config_file(self, capsys, tmp_path):
        """Test that a config file caps the grid search."""
        config = tmp_path / "small.yaml"
        config.write_text("search:\n  max_profiles: 3\n")
        code, _, err = run(
            capsys,
            "search",
            "--game", game_path("team"),
            "--kind", "nash",
            "--grid", "2",
            "--config", config,
        )

        assert code == 2
        assert "search cap" in err

    @pytest.mark.parametrize(
        "text,message",
        [("payoff: [unclosed\n", "Invalid YAML"), ("- 1\n- 2\n", "must contain a mapping")],
    )
    def test_bad_config_file(self, capsys, tmp_path, text, message):
        """Test that an unreadable config file is a usage error, not a crash."""
        config = tmp_path / "broken.yaml"
        config.write_text(text)
        code, out, err = run(
            capsys,
            "eval",
            "--game", game_path("quit-loop"),
            "--profile", profile_path("quit-loop-eps"),
            "--config", config,
        )

        assert code == 2
        assert out == ""
        assert err.startswith("impeq: error:")
        assert message in err

    def test_simulate_unknown_state(self, capsys):
        """Test that simulating from an unknown state is a usage error."""
        code, out, err = run(
            capsys,
            "simulate",
            "--game", game_path("quit-loop"),
            "--profile", profile_path("quit-loop-eps"),
            "--state", "nowhere",
        )

        assert code == 2
        assert out == ""
        assert "unknown state nowhere" in err
