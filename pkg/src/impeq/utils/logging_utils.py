"""
Logging utilities for the impeq solver.

Loggers write to standard error only; standard output is reserved for the
JSON/CSV results printed by the command-line front end.
"""

import logging
import logging.handlers
import os
from pathlib import Path
from typing import Optional

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'
DEFAULT_LEVEL = "WARNING"
LEVEL_ENV_VAR = "IMPEQ_LOG_LEVEL"
ROOT_LOGGER_NAME = "impeq"


def _resolve_level(level: Optional[str]) -> int:
    name = (level or os.getenv(LEVEL_ENV_VAR) or DEFAULT_LEVEL).upper()
    resolved = logging.getLevelName(name)
    if not isinstance(resolved, int):
        raise ValueError(f"Unknown logging level: {name}")
    return resolved


def setup_logging(
    name: str,
    level: Optional[str] = None,
    log_file: Optional[str] = None,
    max_bytes: int = 10485760,  # 10MB
    backup_count: int = 10
) -> logging.Logger:
    """
    Set up a module logger.

    Args:
        name: Logger name, usually ``__name__``
        level: Logging level; defaults to ``$IMPEQ_LOG_LEVEL`` or WARNING
        log_file: Path to a rotating log file (optional)
        max_bytes: Maximum log file size in bytes
        backup_count: Number of backup log files to keep

    Returns:
        logging.Logger: Configured logger instance
    """
    logger = logging.getLogger(name)
    numeric_level = _resolve_level(level)
    logger.setLevel(numeric_level)
    logger.handlers.clear()

    formatter = logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT)

    console_handler = logging.StreamHandler()
    console_handler.setLevel(numeric_level)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if log_file:
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)

        file_handler = logging.handlers.RotatingFileHandler(
            log_file,
            maxBytes=max_bytes,
            backupCount=backup_count
        )
        file_handler.setLevel(numeric_level)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    logger.propagate = False

    return logger


def set_log_level(level: str, log_file: Optional[str] = None) -> None:
    """
    Re-level every logger created for the impeq package.

    Args:
        level: New logging level name
        log_file: Optional file to mirror the output into
    """
    numeric_level = _resolve_level(level)
    manager = logging.Logger.manager
    for name, candidate in list(manager.loggerDict.items()):
        if not isinstance(candidate, logging.Logger):
            continue
        if ROOT_LOGGER_NAME not in name.split("."):
            continue
        if log_file:
            setup_logging(name, level=level, log_file=log_file)
            continue
        candidate.setLevel(numeric_level)
        for handler in candidate.handlers:
            handler.setLevel(numeric_level)
