"""Exception hierarchy shared by every module."""


class SemihamError(Exception):
    """Base class for all package errors."""


class InvalidConfiguration(SemihamError, ValueError):
    """A run or integration was requested with unusable parameters."""


class PreconditionViolation(SemihamError, RuntimeError):
    """An engine move was called in a state where it is not defined.

    Raised only on internal logic errors; strategies never trigger it.
    """


class CleanupFailed(SemihamError, RuntimeError):
    """The clean-up stage ran out of its retry budget.

    ``partial`` carries whatever summary was available when it gave up.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class DomainError(SemihamError, ValueError):
    """A right-hand side was evaluated outside its domain."""


class NumericalFailure(SemihamError, ArithmeticError):
    """The integrator produced a non-finite value."""

    def __init__(self, message, s=None, state=None):
        super().__init__(message)
        self.s = s
        self.state = state


class BracketError(SemihamError, ValueError):
    """A root bracket does not contain a sign change."""
