"""
Configuration utilities for the impeq solver.

Settings are layered: built-in defaults, ``configs/solver.yaml`` (or the file
named by ``$IMPEQ_CONFIG``), an explicit config file, then environment
overrides. Command-line flags are applied on top by the CLI.
"""

import copy
import os
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, Field, field_validator

from ..exceptions import ConfigurationError
from .logging_utils import setup_logging

logger = setup_logging(__name__)

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parents[3] / "configs" / "solver.yaml"
CONFIG_ENV_VAR = "IMPEQ_CONFIG"


def load_config(config_path: Union[str, Path]) -> Dict[str, Any]:
    """
    Load configuration from YAML file.

    Args:
        config_path: Path to configuration file

    Returns:
        Dict[str, Any]: Loaded configuration

    Raises:
        FileNotFoundError: If config file doesn't exist
        ConfigurationError: If config file is invalid YAML or not a mapping
    """
    config_path = Path(config_path)

    if not config_path.exists():
        raise FileNotFoundError(f"Configuration file not found: {config_path}")

    try:
        with open(config_path, 'r') as f:
            config = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigurationError(f"Invalid YAML in config file {config_path}: {e}") from e

    if config is not None and not isinstance(config, dict):
        raise ConfigurationError(f"Config file {config_path} must contain a mapping")
    return config or {}


def get_config_value(
    config: Dict[str, Any],
    key: str,
    default: Any = None,
    required: bool = False
) -> Any:
    """
    Get configuration value with optional default.

    Args:
        config: Configuration dictionary
        key: Configuration key (supports dot notation)
        default: Default value if key not found
        required: Whether the key is required

    Returns:
        Any: Configuration value

    Raises:
        KeyError: If required key is not found
    """
    value: Any = config
    try:
        for k in key.split('.'):
            value = value[k]
        return value
    except (KeyError, TypeError):
        if required:
            raise KeyError(f"Required configuration key not found: {key}")
        return default


def get_env_config(
    key: str,
    default: Any = None,
    required: bool = False
) -> Any:
    """
    Get configuration value from environment variable.

    A ``.env`` file in the working directory is loaded first (existing
    variables win). The value is coerced to the type of ``default``.

    Args:
        key: Environment variable name
        default: Default value if not found
        required: Whether the variable is required

    Returns:
        Any: Environment variable value

    Raises:
        KeyError: If required environment variable is not found
    """
    load_dotenv(override=False)
    value = os.getenv(key)

    if value is None:
        if required:
            raise KeyError(f"Required environment variable not found: {key}")
        return default

    if isinstance(default, bool):
        return value.lower() in ('true', '1', 'yes', 'on')
    if isinstance(default, int):
        try:
            return int(value)
        except ValueError:
            logger.warning(f"Ignoring non-integer {key}={value!r}")
            return default
    if isinstance(default, float):
        try:
            return float(value)
        except ValueError:
            logger.warning(f"Ignoring non-numeric {key}={value!r}")
            return default

    return value


def merge_configs(*configs: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    """
    Deep-merge configuration dictionaries; later ones win.

    Args:
        *configs: Configuration dictionaries to merge

    Returns:
        Dict[str, Any]: Merged configuration
    """
    merged: Dict[str, Any] = {}

    for config in configs:
        if not config:
            continue
        for key, value in config.items():
            if isinstance(value, dict) and isinstance(merged.get(key), dict):
                merged[key] = merge_configs(merged[key], value)
            else:
                merged[key] = copy.deepcopy(value)

    return merged


class PayoffSettings(BaseModel):
    enumeration_threshold: int = Field(2 ** 16, ge=0)


class StrategySettings(BaseModel):
    max_vertex_actions: int = Field(6, ge=1)


class StructureSettings(BaseModel):
    max_states: int = Field(12, ge=1)


class DeviationGameSettings(BaseModel):
    enumeration_threshold: int = Field(2 ** 16, ge=0)
    value_iteration_tolerance: float = Field(1e-9, gt=0)
    value_iteration_max_sweeps: int = Field(1_000_000, ge=1)


class EquilibriumSettings(BaseModel):
    damping: str = "1/2"
    tolerance: float = Field(1e-9, gt=0)
    max_iterations: int = Field(10_000, ge=1)
    check_every: int = Field(10, ge=1)
    max_denominator: int = Field(1_000_000, ge=1)

    @field_validator("damping")
    @classmethod
    def _check_damping(cls, value: str) -> str:
        damping = Fraction(value)
        if not 0 < damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        return value


class SearchSettings(BaseModel):
    max_profiles: int = Field(1_000_000, ge=1)


class EtrSettings(BaseModel):
    max_guesses: int = Field(1_000_000, ge=1)
    solver_command: str = "z3 -in -smt2"
    solver_timeout: float = Field(60.0, gt=0)
    prune_dominated_intervals: bool = True
    max_denominator: int = Field(1_000_000, ge=1)


class MonteCarloSettings(BaseModel):
    chunk_size: int = Field(4096, ge=1)
    confidence: float = Field(0.95, gt=0, lt=1)


class RuntimeSettings(BaseModel):
    threads: int = Field(1, ge=1)
    log_level: str = "WARNING"


class SolverSettings(BaseModel):
    """All tunable constants of the solver pipeline."""

    payoff: PayoffSettings = Field(default_factory=PayoffSettings)
    strategy: StrategySettings = Field(default_factory=StrategySettings)
    structure: StructureSettings = Field(default_factory=StructureSettings)
    deviation_game: DeviationGameSettings = Field(default_factory=DeviationGameSettings)
    equilibrium: EquilibriumSettings = Field(default_factory=EquilibriumSettings)
    search: SearchSettings = Field(default_factory=SearchSettings)
    etr: EtrSettings = Field(default_factory=EtrSettings)
    monte_carlo: MonteCarloSettings = Field(default_factory=MonteCarloSettings)
    runtime: RuntimeSettings = Field(default_factory=RuntimeSettings)


def _env_overrides(base: Dict[str, Any]) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    solver_cmd = get_env_config(
        "IMPEQ_SOLVER_CMD", get_config_value(base, "etr.solver_command")
    )
    if solver_cmd is not None:
        overrides.setdefault("etr", {})["solver_command"] = solver_cmd
    threads = get_env_config("IMPEQ_THREADS", get_config_value(base, "runtime.threads", 1))
    overrides.setdefault("runtime", {})["threads"] = threads
    level = get_env_config("IMPEQ_LOG_LEVEL", get_config_value(base, "runtime.log_level"))
    if level is not None:
        overrides["runtime"]["log_level"] = level
    return overrides


def load_settings(config_path: Optional[Union[str, Path]] = None) -> SolverSettings:
    """
    Build the effective solver settings.

    Args:
        config_path: Optional explicit YAML file layered over the defaults

    Returns:
        SolverSettings: Validated settings

    Raises:
        FileNotFoundError: If an explicit config file is missing
        pydantic.ValidationError: If a value is out of range
    """
    default_path = Path(get_env_config(CONFIG_ENV_VAR, str(DEFAULT_CONFIG_PATH)))
    try:
        base = load_config(default_path)
    except FileNotFoundError:
        logger.warning(f"Default config {default_path} not found, using built-in defaults")
        base = {}

    explicit = load_config(config_path) if config_path is not None else {}
    merged = merge_configs(base, explicit)
    merged = merge_configs(merged, _env_overrides(merged))
    return SolverSettings.model_validate(merged)
