# config.py
import logging
import os
from typing import Dict, Any

logger = logging.getLogger(__name__)

# Load .env file if python-dotenv is available. This makes it easy to keep
# local overrides (log level, thread count) in a `.env` file during development.
try:
    # importlib is used to dynamically import python-dotenv so static analyzers
    # won't require resolving the "dotenv" package at analysis time.
    import importlib

    if importlib.util.find_spec('dotenv') is not None:
        dotenv = importlib.import_module('dotenv')
        load_dotenv = getattr(dotenv, 'load_dotenv', None)
        # Load the .env file located next to this config.py
        if callable(load_dotenv):
            load_dotenv(dotenv_path=os.path.join(os.path.dirname(__file__), '.env'))
except Exception:
    # If python-dotenv is not installed, environment variables will still be used.
    pass


def _int_env(name: str, default: int, minimum: int) -> int:
    value = os.getenv(name, str(default))
    try:
        parsed = int(value)
    except ValueError:
        parsed = minimum - 1
    if parsed < minimum:
        logger.warning(f"Ignoring {name}={value!r}, using {default}")
        return default
    return parsed


def _log_level_env(default: str = 'INFO') -> str:
    value = os.getenv('LOG_LEVEL', default).strip().upper()
    if not isinstance(logging.getLevelName(value), int):
        logger.warning(f"Unknown LOG_LEVEL {value!r}, using {default}")
        return default
    return value


def get_planner_config() -> Dict[str, Any]:
    """Return planner configuration read from environment variables (or .env).

    Environment variables read:
      - MAX_WORKERS, LOG_LEVEL, ORACLE_MAX_LAYERS

    None of them changes a computed value: they only tune the sweep thread
    pool, log verbosity and the default guard of the exhaustive oracle.
    Invalid values fall back to the defaults with a warning.
    """
    return {
        'max_workers': _int_env('MAX_WORKERS', 4, minimum=1),
        'log_level': _log_level_env(),
        'oracle_max_layers': _int_env('ORACLE_MAX_LAYERS', 20, minimum=1),
    }
