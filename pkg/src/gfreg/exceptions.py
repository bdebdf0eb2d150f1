"""Exception types shared across the package.

The CLI maps these onto exit codes: invalid input and bad configuration
exit with 2, solver failures exit with 3.
"""


class GfregError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(GfregError, ValueError):
    """Malformed or inconsistent input (bad grids, shapes, files, partitions)."""


class ConfigurationError(GfregError, ValueError):
    """Solver/penalty configuration violating its validity conditions."""


class SolverFailureError(GfregError, RuntimeError):
    """Numerical failure inside an iterative solver."""

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration


class DegenerateRowError(GfregError, ValueError):
    """A coefficient row has zero norm where a direction is required."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class DegenerateTemplateError(GfregError, ValueError):
    """A template score vector has zero norm and cannot be normalized."""
