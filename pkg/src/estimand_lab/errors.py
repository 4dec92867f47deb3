"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line front end:
1 for invalid input, 2 for numerical failures.
"""

from __future__ import annotations


class EstimandError(Exception):
    """Base class for all errors raised by estimand_lab."""

    exit_code = 2

    def __init__(self, message: str, path: str | None = None):
        super().__init__(message)
        self.message = message
        self.path = path

    def to_dict(self) -> dict:
        out = {"type": type(self).__name__, "message": self.message}
        if self.path is not None:
            out["path"] = self.path
        return out


class ValidationError(EstimandError, ValueError):
    """Malformed model, population, table or configuration."""

    exit_code = 1


class UnknownTreatmentError(ValidationError):
    pass


class DimensionError(ValidationError):
    pass


class SchemeMismatchError(ValidationError):
    """Integration scheme cannot be applied to the covariate distribution."""


class ScenarioMismatchError(ValidationError):
    """A figure or analysis was requested for a config that cannot supply it."""


class DomainError(EstimandError, ArithmeticError):
    """A value fell outside the domain or range of a link function."""


class IntegrationError(EstimandError):
    """Non-finite integrand values or similar integration failures."""


class ConvergenceError(EstimandError):
    pass


class SingularityError(EstimandError, ZeroDivisionError):
    pass


class ZeroCellError(EstimandError, ZeroDivisionError):
    """A contingency-table cell with zero events or zero non-events."""

    def __init__(self, message: str, cell: tuple[str, str | None]):
        super().__init__(message, path=f"counts[{cell[0]},{'*' if cell[1] is None else cell[1]}]")
        self.cell = cell
