"""Exception hierarchy shared by every module."""


class MeasentError(Exception):
    """Base class for all library errors."""


class InputError(MeasentError, ValueError):
    """Malformed or inconsistent input (shapes, ranges, file fields)."""


class DomainError(MeasentError, ValueError):
    """An operand lies outside the domain of a matrix function."""


class InfeasibleConstraintError(InputError):
    """A user-supplied constraint admits no feasible point."""


class NumericalFailure(MeasentError, RuntimeError):
    """An iterative routine failed to converge.

    The best iterate, when one exists, is attached as ``best``.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class AccuracyUnreachable(MeasentError):
    """No approximation within the caps reaches the requested accuracy."""

    def __init__(self, message, best_bound):
        super().__init__(message)
        self.best_bound = best_bound
