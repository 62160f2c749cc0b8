"""Exception hierarchy shared across the package.

The three classes map onto the CLI exit codes: configuration problems
exit with 2, data problems with 3, and pipeline stage failures with 4.
"""

from __future__ import annotations


class AtlasError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(AtlasError):
    """Invalid parameter or configuration value."""

    exit_code = 2


class DataError(AtlasError):
    """Malformed or out-of-contract input data."""

    exit_code = 3


class StageFailure(AtlasError):
    """A pipeline stage aborted; carries the stage name."""

    exit_code = 4

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage '{stage}' failed: {message}")
        self.stage = stage
