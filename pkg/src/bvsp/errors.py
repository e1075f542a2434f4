"""Exception types shared across the package."""

from __future__ import annotations


class BvspError(Exception):
    """Base class for all package-specific errors."""


class UnknownPolaritySurface(BvspError):
    """Surface polarity word is not one of ``great`` / ``ok`` / ``bad``."""


class MarkerCollision(BvspError):
    """A field value contains a template linking literal or the clause separator."""


class ScorerUnavailable(BvspError):
    """The remote scoring endpoint could not be reached."""


class ProtocolViolation(BvspError):
    """A remote scorer response failed a wire-protocol invariant."""


class SpanMismatch(BvspError):
    """Scored text does not match the target sequence it claims to score."""


class InvalidK(BvspError):
    """Requested template count is outside [1, T]."""


class InvalidTau(BvspError):
    """Voting threshold is outside [1, number of templates]."""


class DuplicateId(BvspError):
    """A sentence id occurs more than once."""


class ParseError(BvspError):
    """A data file line could not be parsed."""

    def __init__(self, message: str, line: int, column: int | None = None):
        loc = f"line {line}" if column is None else f"line {line}, column {column}"
        super().__init__(f"{loc}: {message}")
        self.line = line
        self.column = column


class EmptyFile(BvspError):
    """The data file contains no sentences."""


class EmptyPool(BvspError):
    """Episode sampling was asked to draw from an empty pool."""


class InvalidBuckets(BvspError):
    """Histogram buckets overlap, leave gaps, or fail to cover a count."""
