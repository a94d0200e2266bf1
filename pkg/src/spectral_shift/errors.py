"""Exception hierarchy shared by every module.

Each class carries the process exit code the CLI maps it to.
"""

from __future__ import annotations


class SpectralShiftError(Exception):
    exit_code = 1


class ValidationError(SpectralShiftError, ValueError):
    """Bad input: malformed config, violated precondition, wrong argument."""

    exit_code = 2


class InconsistentLanguageError(ValidationError):
    """A word set that is not closed under one-letter restrictions."""


class InsufficientDataError(ValidationError):
    """The truncation is too shallow for the requested quantity."""


class NotFoundError(ValidationError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class PrecisionError(SpectralShiftError):
    """Certified arithmetic could not resolve a comparison or enclosure."""

    exit_code = 3


class NumericError(SpectralShiftError):
    """An iterative numerical method did not converge."""

    exit_code = 3


class InvariantError(SpectralShiftError):
    """Internal consistency check failed."""

    exit_code = 4
