"""Exception hierarchy shared by the whole package."""


class RobustMDPError(Exception):
    """Base class for all package errors."""


class ValidationError(RobustMDPError, ValueError):
    """Input data violates a documented invariant."""


class DimensionMismatch(ValidationError):
    pass


class NonStochasticRow(ValidationError):
    """A kernel row or policy row is negative or does not sum to one."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class DiscountOutOfRange(ValidationError):
    pass


class RectangularityMismatch(ValidationError):
    pass


class InvalidConfig(ValidationError):
    pass


class DimensionTooLarge(ValidationError):
    pass


class ConvergenceError(RobustMDPError, RuntimeError):
    """Iteration hit its budget before reaching the requested accuracy.

    ``report`` carries the last iterate and residual history.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report

    @property
    def last_residual(self):
        if self.report is None or not self.report.residuals:
            return float("nan")
        return self.report.residuals[-1]
