"""
Exception hierarchy for tape analysis.

Every error carries the process exit code the CLI reports for it:
1 for data, parse and usage problems, 2 for numerical failures.
Errors raised while reading a tape also carry the 1-based input line.
"""
from typing import Optional


class TapeError(Exception):
    """Base class for all errors raised by the package."""

    exit_code = 1
    default_message = ""

    def __init__(self, message: Optional[str] = None, line: Optional[int] = None):
        self.line = line
        message = message or self.default_message
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)

    def at_line(self, line: int) -> "TapeError":
        """Return a copy of this error attributed to an input line."""
        return type(self)(str(self), line=line)


class DataError(TapeError):
    """Input data, flags or specs are invalid."""

    exit_code = 1


class NumericalError(TapeError):
    """A computation cannot produce a finite, meaningful result."""

    exit_code = 2


class NonPositiveField(DataError):
    pass


class InconsistentValue(DataError):
    pass


class ParseError(DataError):
    pass


class OutOfOrderTimestamp(DataError):
    pass


class EmptyTape(DataError):
    default_message = "empty tape"


class EmptyWindow(DataError):
    default_message = "window contains no trades"


class EmptyWindowAll(DataError):
    default_message = "no agent traded inside the window"


class MissingExpectations(DataError):
    pass


class BadBins(DataError):
    pass


class BadGrid(DataError):
    pass


class BadSpec(DataError):
    pass


class InsufficientMoments(DataError):
    pass


class UsageError(DataError):
    pass


class Overflow(NumericalError):
    pass


class DegenerateVolume(NumericalError):
    pass


class NegativeVariance(NumericalError):
    pass


class ZeroVariance(NumericalError):
    pass


class QuadratureFailure(NumericalError):
    pass
