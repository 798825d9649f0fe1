"""Exception taxonomy shared across the package."""

from __future__ import annotations


class TodserveError(Exception):
    """Base class for all package errors."""


class DataError(TodserveError):
    """The example-set file is missing, empty, or malformed."""


class ConfigError(TodserveError):
    """A training or serving configuration value violates an invariant."""


class TrainingError(TodserveError):
    """Training failed for an operational reason (resources, artifacts)."""


class DivergenceError(TrainingError):
    """The training loss stopped being finite; the run was aborted."""
