"""Exception types shared across the package."""

from __future__ import annotations


class BeliefStreamError(Exception):
    """Base class for all library errors."""


class LineError(BeliefStreamError):
    """A problem tied to one line of an input stream."""

    def __init__(self, detail: str, line_no: int = 0):
        super().__init__(detail)
        self.detail = detail
        self.line_no = line_no


class MalformedJson(LineError):
    """Line is not a single valid JSON document."""


class SchemaViolation(LineError):
    """Required field absent, wrong type, or invalid value."""


class BadTimestamp(LineError):
    """Timestamp field present but unparseable."""


class EmptyBody(BeliefStreamError):
    """Message body contains no word tokens."""


class OutOfCalendar(BeliefStreamError):
    """Timestamp falls outside the trading calendar's coverage."""


class DuplicateSymbol(BeliefStreamError):
    """Ticker catalog contains the same symbol twice."""


class UnknownSectorName(BeliefStreamError):
    """Sector name not in the closed sector taxonomy."""


class EmptyBucket(BeliefStreamError):
    """Sentiment requested for a bucket with zero classified messages."""


class DomainError(BeliefStreamError):
    """Numeric argument outside the operation's domain."""


class KindMismatch(BeliefStreamError):
    """Series of the wrong kind passed to a transform."""


class BadWindow(BeliefStreamError):
    """Rolling-window parameters out of range."""


class EmptyInput(BeliefStreamError):
    """Statistic requested over an empty collection."""


class InsufficientData(BeliefStreamError):
    """Correlation requested for a group with no defined days."""


class InvalidSpec(BeliefStreamError):
    """Synthetic-corpus spec fails validation."""


class ConfigError(BeliefStreamError):
    """Run configuration is invalid or a config file is malformed."""


class MissingUpstream(BeliefStreamError):
    """A pipeline stage's required upstream product does not exist."""


class RefusesOverwrite(BeliefStreamError):
    """Output bundle already exists and --force was not given."""
