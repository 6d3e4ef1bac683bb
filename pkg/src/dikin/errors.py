"""Exception hierarchy shared by every module."""


class DikinError(Exception):
    """Base class for all errors raised by this package."""


class UnsupportedTerm(DikinError):
    pass


class DimensionError(DikinError):
    pass


class FactorizationError(DikinError):
    pass


class NotInterior(DikinError):
    pass


class ShapeError(DikinError):
    pass


class ConvergenceError(DikinError):
    """Iterative solver failed; ``residual`` holds the last residual seen."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class MissingParameter(DikinError):
    pass


class InvalidScale(DikinError):
    pass


class SingularMetric(DikinError):
    pass


class InfeasibleBarrier(DikinError):
    pass


class NeedFeasiblePoint(DikinError):
    pass


class SamplingError(DikinError):
    pass


class ParseError(DikinError):
    """Problem file could not be parsed; ``location`` is a JSON path."""

    def __init__(self, message, location="$"):
        super().__init__(f"{location}: {message}")
        self.location = location


class OracleInfeasible(DikinError):
    pass


class StatisticsError(DikinError):
    pass
