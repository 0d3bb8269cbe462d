"""Semi-random process for building a Hamiltonian cycle fast."""

from .errors import (BracketError, CleanupFailed, DomainError, InvalidConfiguration,
                     NumericalFailure, PreconditionViolation, SemihamError)

__all__ = ["BracketError", "CleanupFailed", "DomainError", "InvalidConfiguration",
           "NumericalFailure", "PreconditionViolation", "SemihamError"]
__version__ = "0.1.0"
