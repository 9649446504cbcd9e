"""Exception types raised across the package."""


class DecsError(Exception):
    """Base class for all package-specific errors."""


class InvalidInputError(DecsError, ValueError):
    """An argument violates a documented precondition (shape, finiteness, range)."""


class DegenerateInputError(DecsError, ValueError):
    """Input is structurally unusable, e.g. an all-zero data matrix."""


class SingularCovarianceError(DecsError, ValueError):
    """A population covariance matrix required to be invertible is singular."""


class SolverDivergedError(DecsError, RuntimeError):
    """The inner solver produced a non-finite objective.

    Carries the outer-iteration trace accumulated up to the failure.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class UndefinedMetricError(DecsError, ValueError):
    """A metric has no defined value for the given inputs (e.g. empty truth)."""
