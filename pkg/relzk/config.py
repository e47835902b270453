"""
Runtime settings for relzk
Values come from the environment (a local .env file is honoured) with safe defaults.
"""

import os
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

from dotenv import load_dotenv

from relzk.errors import ConfigurationError

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Settings:
    log_level: str = "INFO"
    oracle_max_vertices: int = 32
    enumeration_limit: int = 1_000_000
    independence_samples: int = 100_000
    exhaustive_subset_limit: int = 1_000_000
    block_size: int = 8192
    construction_retries: int = 64
    ledger_url: Optional[str] = None


def _int_env(name: str, default: int, minimum: int = 1) -> int:
    raw = os.environ.get(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ConfigurationError(f"{name} must be an integer, got {raw!r}")
    if value < minimum:
        raise ConfigurationError(f"{name} must be >= {minimum}, got {value}")
    return value


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Read settings once per process; call get_settings.cache_clear() after changing env."""
    settings = Settings(
        log_level=os.environ.get("RELZK_LOG_LEVEL", "INFO").upper(),
        oracle_max_vertices=_int_env("RELZK_ORACLE_MAX_VERTICES", 32),
        enumeration_limit=_int_env("RELZK_ENUMERATION_LIMIT", 1_000_000),
        independence_samples=_int_env("RELZK_INDEPENDENCE_SAMPLES", 100_000),
        exhaustive_subset_limit=_int_env("RELZK_EXHAUSTIVE_SUBSET_LIMIT", 1_000_000),
        block_size=_int_env("RELZK_BLOCK_SIZE", 8192),
        construction_retries=_int_env("RELZK_CONSTRUCTION_RETRIES", 64),
        ledger_url=os.environ.get("RELZK_LEDGER_URL") or None,
    )
    logger.debug(f"Loaded settings: {settings}")
    return settings
