"""
Utility functions for impeq.

This module contains logging, configuration and validation helpers.
"""

from .logging_utils import setup_logging, set_log_level
from .config_utils import (
    SolverSettings,
    get_config_value,
    get_env_config,
    load_config,
    load_settings,
    merge_configs,
)
from .validation_utils import (
    format_rational,
    is_rational_string,
    parse_rational,
    validate_epsilon,
)

__all__ = [
    "setup_logging",
    "set_log_level",
    "SolverSettings",
    "load_config",
    "load_settings",
    "get_config_value",
    "get_env_config",
    "merge_configs",
    "format_rational",
    "is_rational_string",
    "parse_rational",
    "validate_epsilon",
]
