"""Exception types shared across the package."""


class InverseClassificationError(Exception):
    """Base class for all errors raised by this package."""


class ModelFormatError(InverseClassificationError):
    """Model or instance data could not be parsed or failed validation."""


class LineSearchError(InverseClassificationError):
    """No acceptable step size was found within the search budget."""


class NumericalBreakdownError(InverseClassificationError):
    """A quantity that is positive in exact arithmetic lost positivity in floats."""


class InfeasibleTargetError(InverseClassificationError):
    """The requested probability level cannot be reached for this model and class."""


class PathSolveError(InverseClassificationError):
    """A grid-point solve inside a lambda path failed.

    The ``partial`` attribute holds the PathResult for the grid points that
    finished before the failure.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
