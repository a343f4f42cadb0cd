"""
Unit tests for configuration utilities.
"""

import pytest
import yaml
from pydantic import ValidationError

from src.impeq.exceptions import ConfigurationError
from src.impeq.utils.config_utils import (
    get_config_value,
    get_env_config,
    load_config,
    load_settings,
    merge_configs,
)


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("IMPEQ_CONFIG", "IMPEQ_SOLVER_CMD", "IMPEQ_THREADS", "IMPEQ_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)


class TestConfigUtils:
    """Test cases for configuration helpers."""

    def test_load_config(self, tmp_path):
        """Test loading a YAML mapping."""
        path = tmp_path / "solver.yaml"
        path.write_text("etr:\n  max_guesses: 7\n")

        assert load_config(path) == {"etr": {"max_guesses": 7}}

    def test_load_config_missing(self, tmp_path):
        """Test that a missing file is reported."""
        with pytest.raises(FileNotFoundError, match="Configuration file not found"):
            load_config(tmp_path / "absent.yaml")

    def test_load_config_not_a_mapping(self, tmp_path):
        """Test that a YAML list is refused."""
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n")

        with pytest.raises(ConfigurationError, match="mapping"):
            load_config(path)

    def test_load_config_malformed(self, tmp_path):
        """Test that unparsable YAML becomes a ConfigurationError."""
        path = tmp_path / "broken.yaml"
        path.write_text("payoff: [unclosed\n")

        with pytest.raises(ConfigurationError, match="Invalid YAML") as info:
            load_config(path)
        assert isinstance(info.value, ValueError)
        assert isinstance(info.value.__cause__, yaml.YAMLError)

    def test_get_config_value(self):
        """Test dot-path lookup, defaults and required keys."""
        config = {"etr": {"solver_timeout": 5}}

        assert get_config_value(config, "etr.solver_timeout") == 5
        assert get_config_value(config, "etr.missing", default=3) == 3
        with pytest.raises(KeyError, match="etr.missing"):
            get_config_value(config, "etr.missing", required=True)

    def test_merge_configs(self):
        """Test deep merging with later values winning."""
        merged = merge_configs(
            {"etr": {"max_guesses": 1, "solver_timeout": 5}},
            None,
            {"etr": {"max_guesses": 2}, "runtime": {"threads": 4}},
        )

        assert merged == {
            "etr": {"max_guesses": 2, "solver_timeout": 5},
            "runtime": {"threads": 4},
        }

    def test_get_env_config_coercion(self, monkeypatch):
        """Test coercion to the type of the default."""
        monkeypatch.setenv("IMPEQ_THREADS", "3")

        assert get_env_config("IMPEQ_THREADS", 1) == 3
        monkeypatch.setenv("IMPEQ_THREADS", "many")
        assert get_env_config("IMPEQ_THREADS", 1) == 1


class TestSettings:
    """Test cases for layered solver settings."""

    def test_defaults(self):
        """Test the shipped defaults."""
        settings = load_settings()

        assert settings.equilibrium.damping == "1/2"
        assert settings.etr.solver_command == "z3 -in -smt2"
        assert settings.structure.max_states == 12
        assert settings.runtime.threads == 1

    def test_explicit_file(self, tmp_path):
        """Test that an explicit file is layered over the defaults."""
        path = tmp_path / "override.yaml"
        path.write_text("search:\n  max_profiles: 50\n")
        settings = load_settings(path)

        assert settings.search.max_profiles == 50
        assert settings.etr.max_guesses == 1_000_000

    def test_environment_overrides(self, monkeypatch):
        """Test the solver command and thread overrides."""
        monkeypatch.setenv("IMPEQ_SOLVER_CMD", "cvc5 --lang smt2")
        monkeypatch.setenv("IMPEQ_THREADS", "4")
        settings = load_settings()

        assert settings.etr.solver_command == "cvc5 --lang smt2"
        assert settings.runtime.threads == 4

    def test_invalid_damping(self, tmp_path):
        """Test that damping outside (0, 1] is refused."""
        path = tmp_path / "bad.yaml"
        path.write_text("equilibrium:\n  damping: \"3/2\"\n")

        with pytest.raises(ValidationError, match="damping"):
            load_settings(path)

    def test_missing_default_file(self, tmp_path, monkeypatch):
        """Test the fallback to built-in defaults."""
        monkeypatch.setenv("IMPEQ_CONFIG", str(tmp_path / "absent.yaml"))
        settings = load_settings()

        assert settings.monte_carlo.chunk_size == 4096
