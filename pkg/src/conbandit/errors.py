"""Exception hierarchy shared across the package."""

from __future__ import annotations


class ConbanditError(Exception):
    """Base class for all package-specific failures."""


class DataFormatError(ConbanditError):
    """A dataset file could not be parsed; carries the offending line."""

    def __init__(self, path: str, line_no: int, message: str) -> None:
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class IntegrityError(ConbanditError):
    """A dataset references an entity that does not exist, or defines one twice."""


class ConfigError(ConbanditError):
    """Invalid configuration value(s); the message lists every problem found."""


class DegenerateSplitError(ConbanditError):
    """A cold-start split would leave one side of the partition empty."""


class EntityLookupError(ConbanditError):
    """An id has no embedding or catalog entry."""


class TrainingError(ConbanditError):
    """Embedding training cannot proceed (e.g. empty training set)."""


class ContractViolation(ConbanditError):
    """A caller broke an operation precondition (dimension mismatch, non-finite input, ...)."""


class InternalConsistencyError(ConbanditError):
    """State that should be impossible by construction was observed."""


class PoolExhaustedError(ConbanditError):
    """No candidate arms remain to play."""


class MetricsError(ConbanditError):
    """Metrics requested over an empty result set."""


class UndefinedTestError(ConbanditError):
    """A statistical test is undefined for the given inputs."""


class StartupError(ConbanditError):
    """A required input (embedding file, dataset file) is missing at run start."""
