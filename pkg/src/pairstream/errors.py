"""Exception types shared across the pipeline."""

from __future__ import annotations


class PairstreamError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(PairstreamError):
    """An invalid configuration value. Always names the offending field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class FeedFormatError(PairstreamError):
    """A malformed feed file row. Carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class FeedDataError(PairstreamError):
    """Structurally valid feed data that violates a stream invariant,
    e.g. non-monotonic per-symbol timestamps."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class PartialWindowError(PairstreamError):
    """The feed ended before the sampling window did. ``matrix`` holds the
    snapshot columns collected so far."""

    def __init__(self, message: str, matrix=None):
        super().__init__(message)
        self.matrix = matrix


class EmptyCohortError(PairstreamError):
    """Every series was filtered out; classification cannot proceed."""


class ContractError(PairstreamError):
    """A caller broke a documented precondition (e.g. passed an incomplete
    matrix where a filtered one is required)."""


class NotFoundError(PairstreamError):
    """Unknown symbol, node, or run id."""


class UndefinedCorrelationError(PairstreamError):
    """Pearson r requested for a zero-variance input. Never reported as 0."""


class StateError(PairstreamError):
    """An operation was invoked in a run state that does not allow it."""


class StoreError(PairstreamError):
    """Artifact store misuse, e.g. re-creating an existing run."""
