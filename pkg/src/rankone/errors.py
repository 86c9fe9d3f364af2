"""Exception types shared across the package."""

from __future__ import annotations


class RankOneError(Exception):
    """Base class for every error raised by this package."""


class ParseError(RankOneError):
    def __init__(self, message: str, line: int = 1, column: int = 1):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(f"{message} (line {line}, column {column})")


class ValidationError(RankOneError):
    """Structurally parseable input that violates a domain constraint."""


class ResourceError(RankOneError):
    """A stage or height cap was reached before the requested accuracy.

    ``achieved`` carries the best unresolved mass reached (a Fraction) and
    ``partial`` the partial result, when one exists.
    """

    def __init__(self, message: str, achieved=None, partial=None):
        self.achieved = achieved
        self.partial = partial
        super().__init__(message)
