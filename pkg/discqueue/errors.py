"""
Exception hierarchy for discqueue.

Every error raised on purpose by the package derives from DiscQueueError, so
callers (the CLI in particular) can map whole families to exit codes.
"""
from typing import Optional


class DiscQueueError(Exception):
    """Base class for all discqueue errors."""


class ParameterDomainError(DiscQueueError, ValueError):
    """An input lies outside the domain of the model (rates, times, policies)."""


class RatesFileError(ParameterDomainError):
    """A rates file could not be parsed or violates the rate invariants."""

    def __init__(self, message: str, path: Optional[str] = None,
                 line: Optional[int] = None, column: Optional[int] = None):
        self.path = path
        self.line = line
        self.column = column
        location = ""
        if path:
            location = str(path)
            if line is not None:
                location += f":{line}"
                if column is not None:
                    location += f":{column}"
            location += ": "
        super().__init__(location + message)


class TriangleIndexError(DiscQueueError, IndexError):
    """A coefficient was requested beyond the depth of a triangle."""


class TriangleCacheError(DiscQueueError):
    """A cached triangle failed revalidation."""


class ConfigError(DiscQueueError):
    """Configuration could not be loaded or is invalid."""


class CertificationError(DiscQueueError):
    """The requested tolerance cannot be certified with the current settings."""


class InsufficientDepthError(CertificationError):
    """The triangle is too shallow for the truncation rule to be met."""

    def __init__(self, message: str, recommended_depth: int):
        self.recommended_depth = recommended_depth
        super().__init__(f"{message}; increase depth to at least {recommended_depth}")


class InsufficientPrecisionError(CertificationError):
    """The working precision cannot absorb the cancellation in the series."""

    def __init__(self, message: str, recommended_bits: int):
        self.recommended_bits = recommended_bits
        super().__init__(f"{message}; use at least {recommended_bits} bits")


class TruncationError(CertificationError):
    """A truncated state space drops more mass than allowed."""

    def __init__(self, message: str, recommended_k_max: int):
        self.recommended_k_max = recommended_k_max
        super().__init__(f"{message}; use k_max >= {recommended_k_max}")
