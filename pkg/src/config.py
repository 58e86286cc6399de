"""
Configuration and logging setup for cosmos
"""

import logging
import os
from dataclasses import dataclass, fields, replace
from typing import Callable, Optional

from dotenv import load_dotenv
from rich.logging import RichHandler

from .errors import ConfigError

load_dotenv()

LOG_FORMAT = "%(name)s: %(message)s"


def _parse_bool(raw: str) -> bool:
    value = raw.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


@dataclass(frozen=True)
class CosmosConfig:
    """Runtime settings, read from the environment (and .env)"""

    window_seconds: int = 1800
    battery_threshold: float = 15.0
    min_rows: int = 50
    min_accuracy: float = 0.70
    retrain_every: int = 25
    min_leaf: int = 2
    max_depth: int = 12
    prune: bool = False
    store_path: str = "observations.csv"
    socket_path: str = "/tmp/cosmos.sock"
    critical_file: Optional[str] = None
    log_level: str = "WARNING"

    def __post_init__(self):
        if self.window_seconds <= 0:
            raise ConfigError(f"window_seconds must be positive, got {self.window_seconds}")
        if not 0 <= self.battery_threshold <= 100:
            raise ConfigError(f"battery_threshold must be in [0, 100], got {self.battery_threshold}")
        if self.min_rows < 1:
            raise ConfigError(f"min_rows must be at least 1, got {self.min_rows}")
        if not 0 <= self.min_accuracy <= 1:
            raise ConfigError(f"min_accuracy must be in [0, 1], got {self.min_accuracy}")
        if self.retrain_every < 1:
            raise ConfigError(f"retrain_every must be at least 1, got {self.retrain_every}")
        if self.min_leaf < 1 or self.max_depth < 1:
            raise ConfigError("min_leaf and max_depth must be at least 1")

    @classmethod
    def from_env(cls, **overrides) -> "CosmosConfig":
        """Build a config from COSMOS_* variables; keyword overrides win."""
        env = {
            "window_seconds": ("COSMOS_WINDOW_SECONDS", int),
            "battery_threshold": ("COSMOS_BATTERY_THRESHOLD", float),
            "min_rows": ("COSMOS_MIN_ROWS", int),
            "min_accuracy": ("COSMOS_MIN_ACCURACY", float),
            "retrain_every": ("COSMOS_RETRAIN_EVERY", int),
            "min_leaf": ("COSMOS_MIN_LEAF", int),
            "max_depth": ("COSMOS_MAX_DEPTH", int),
            "prune": ("COSMOS_PRUNE", _parse_bool),
            "store_path": ("COSMOS_STORE", str),
            "socket_path": ("COSMOS_SOCKET", str),
            "critical_file": ("COSMOS_CRITICAL_FILE", str),
            "log_level": ("COSMOS_LOG_LEVEL", str),
        }
        values = {}
        for name, (var, convert) in env.items():
            raw = os.getenv(var)
            if raw is None or raw == "":
                continue
            values[name] = _convert(var, raw, convert)
        known = {f.name for f in fields(cls)}
        for name, value in overrides.items():
            if name not in known:
                raise ConfigError(f"Unknown configuration key: {name}")
            if value is not None:
                values[name] = value
        return cls(**values)

    def with_overrides(self, **overrides) -> "CosmosConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


def _convert(var: str, raw: str, convert: Callable):
    try:
        return convert(raw)
    except ValueError as e:
        raise ConfigError(f"Invalid value for {var}: {raw!r} ({e})") from e


def setup_logging(level: str = "WARNING") -> None:
    """Route cosmos loggers through rich."""
    numeric = logging.getLevelName(level.upper())
    if not isinstance(numeric, int):
        raise ConfigError(f"Unknown log level: {level}")
    logging.basicConfig(
        level=numeric,
        format=LOG_FORMAT,
        datefmt="[%X]",
        handlers=[RichHandler(rich_tracebacks=True, show_path=False)],
        force=True,
    )
