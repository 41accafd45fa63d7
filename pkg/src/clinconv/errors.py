"""Exception hierarchy shared across the package.

``DataError`` subclasses signal problems with user-supplied inputs (parse
failures, schema violations, infeasible configurations) and map to CLI exit
code 2. Anything else escaping a command is treated as an internal error.
"""

from __future__ import annotations


class ClinconvError(Exception):
    """Base class for all package-specific errors."""


class DataError(ClinconvError):
    """Invalid input data or configuration derived from data."""


class ParseError(DataError):
    """Malformed serialized record. Carries the source line when known."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class ValidationError(DataError):
    """Structurally parseable input that violates a documented invariant."""


class LexiconError(DataError):
    """Concept lexicon that cannot be compiled (collisions, empty patterns)."""


class ConfigError(DataError):
    """Inconsistent run configuration, e.g. model/vocabulary hash mismatch."""


class FitError(DataError):
    """Feature fitting produced nothing usable (e.g. empty vocabulary)."""


class TrainingError(DataError):
    """Training request that cannot be satisfied (shape mismatch, bad targets)."""


class GenerationError(DataError):
    """Infeasible synthetic-corpus configuration."""
