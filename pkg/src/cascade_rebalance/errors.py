"""Exception hierarchy.

Each class carries an ``exit_code`` so the CLI can map failures to a
category without inspecting messages.
"""


class RebalanceError(Exception):
    exit_code = 1


class ConfigError(RebalanceError):
    exit_code = 3


class DataError(RebalanceError):
    """Malformed or invalid input data."""

    exit_code = 4


class ParseError(DataError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class DegenerateError(DataError):
    """A statistic or measure is zero where a positive value is required."""


class CoverageError(DataError):
    pass


class SolverError(RebalanceError):
    exit_code = 5

    def __init__(self, message: str, residual: float | None = None):
        self.residual = residual
        if residual is not None:
            message = f"{message} (residual {residual:.3e})"
        super().__init__(message)


class SingularMatrixError(SolverError):
    pass


class InfeasibleError(RebalanceError):
    exit_code = 6


class UntradableError(DataError):
    pass


class BoundsConflictError(DataError):
    pass


class ReconciliationError(RebalanceError):
    exit_code = 7


class ReportIOError(RebalanceError):
    exit_code = 8
