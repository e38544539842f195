# crnt_sim/core/logger.py
import logging
import os
import sys
from typing import Optional

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s (%(filename)s:%(lineno)d)'
PACKAGE_LOGGER = "crnt_sim"

_VERBOSITY_LEVELS = {0: logging.WARNING, 1: logging.INFO, 2: logging.DEBUG}


def setup_logger(name: str, level: int = logging.NOTSET) -> logging.Logger:
    """
    Configures and returns a logger instance.

    Package modules get a bare logger that inherits the package level; the
    package root logger owns the single stdout handler.
    """
    logger_instance = logging.getLogger(name)

    if name != PACKAGE_LOGGER and name.startswith(PACKAGE_LOGGER + "."):
        logger_instance.setLevel(level)
        _ensure_root_handler()
        return logger_instance

    # Prevent adding multiple handlers if logger is already configured
    if logger_instance.hasHandlers():
        logger_instance.handlers.clear()

    logger_instance.setLevel(level or _level_from_env())

    ch = logging.StreamHandler(sys.stdout)
    ch.setLevel(logging.NOTSET)
    ch.setFormatter(logging.Formatter(LOG_FORMAT))
    logger_instance.addHandler(ch)

    # Set propagate to False to avoid duplicate logs if root logger is also configured
    logger_instance.propagate = False

    return logger_instance


def configure_logging(verbosity: Optional[int] = None, level_name: Optional[str] = None) -> logging.Logger:
    """
    Set the package level. A CLI verbosity count wins over level_name
    (normally Settings.LOG_LEVEL); with neither, the import-time level stays.
    """
    root = setup_logger(PACKAGE_LOGGER)
    if verbosity is not None:
        root.setLevel(_VERBOSITY_LEVELS.get(min(verbosity, 2), logging.DEBUG))
    elif level_name:
        root.setLevel(parse_level(level_name))
    return root


def _ensure_root_handler():
    root = logging.getLogger(PACKAGE_LOGGER)
    if not root.handlers:
        setup_logger(PACKAGE_LOGGER)


def parse_level(level_name: str) -> int:
    """Numeric level for a name like "info"; unknown names mean WARNING."""
    level = logging.getLevelName(level_name.strip().upper())
    return level if isinstance(level, int) else logging.WARNING


def _level_from_env() -> int:
    return parse_level(os.getenv("CRNT_LOG_LEVEL", "WARNING"))
