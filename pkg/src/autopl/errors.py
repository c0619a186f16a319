"""Exception types shared across the package."""

from __future__ import annotations


class DomainError(ValueError):
    """An input falls outside the domain a model is defined on."""


class DataError(ValueError):
    """A dataset or data file is missing, malformed, or degenerate."""


class TrainingError(RuntimeError):
    """Training could not proceed or produced no usable result."""


class CheckpointError(ValueError):
    """A checkpoint file is missing, truncated, or inconsistent."""
