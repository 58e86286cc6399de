"""
Exception hierarchy shared by the cosmos modules
"""

from enum import Enum


class CosmosError(Exception):
    """Base class for every error raised by cosmos"""


class DomainError(CosmosError, ValueError):
    """A numeric input lies outside its allowed range"""


class UsageError(CosmosError, ValueError):
    """A function was called against its contract"""


class ConfigError(CosmosError):
    """Bad configuration value or unreadable input file"""


class ProtocolErrorKind(str, Enum):
    MALFORMED = "MALFORMED"
    SCHEMA_VIOLATION = "SCHEMA_VIOLATION"
    VALUE_ERROR = "VALUE_ERROR"


class ProtocolError(CosmosError):
    """A wire document could not be decoded"""

    def __init__(self, kind: ProtocolErrorKind, message: str):
        super().__init__(f"{kind.value}: {message}")
        self.kind = kind
        self.message = message
