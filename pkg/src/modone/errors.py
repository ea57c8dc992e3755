"""Exception hierarchy shared by every module."""


class ModoneError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(ModoneError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class RangeError(ModoneError, OverflowError):
    """A result cannot be represented exactly (integer range exceeded)."""


class ContractError(ModoneError, ValueError):
    """A caller violated a precondition (shapes, counts, ordering...)."""


class SingularityError(ModoneError, ZeroDivisionError):
    """phi was evaluated at one of its poles."""

    def __init__(self, t, message=None):
        self.t = t
        super().__init__(message or f"phi has a pole at t={t!r}")


class DegeneracyError(ModoneError, ValueError):
    """A matrix or limit object is singular where it must not be."""


class QuadratureError(ModoneError, RuntimeError):
    """Adaptive quadrature failed to reach its tolerance."""

    def __init__(self, message, trace=None):
        self.trace = trace or []
        super().__init__(message)


class BatchFailure(ModoneError, RuntimeError):
    """Too many exceptional samples in a Monte Carlo batch."""

    def __init__(self, message, result=None):
        self.result = result
        super().__init__(message)
