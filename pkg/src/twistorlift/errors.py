"""Exception hierarchy shared by every module of the package."""


class TwistorLiftError(Exception):
    """Base class for all package errors."""


class DomainError(TwistorLiftError, ValueError):
    """An argument lies outside the domain of an operation."""


class CapacityError(TwistorLiftError, ValueError):
    """A degree or exponent cap was exceeded."""


class PoleError(TwistorLiftError, ZeroDivisionError):
    """Evaluation hit a pole of a rational function."""

    def __init__(self, message, component=None):
        super().__init__(message)
        self.component = component


class ContractError(TwistorLiftError):
    """A precondition or postcondition failed numerically."""

    def __init__(self, message, residual=None, index=None):
        super().__init__(message)
        self.residual = residual
        self.index = index


class GenericPointError(TwistorLiftError):
    """The requested point is not generic (pole or rank drop)."""


class NotNormalizedError(TwistorLiftError):
    """A lift has a zero leg, so the extended solution is not normalized."""
