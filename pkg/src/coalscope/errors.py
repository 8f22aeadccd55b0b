"""Exception types shared across the package."""


class CoalscopeError(Exception):
    """Base class for all package errors."""


class ArgumentError(CoalscopeError, ValueError):
    """An argument lies outside the domain of the operation."""


class UnsupportedFamilyError(CoalscopeError, ValueError):
    """The operation is not defined for the given coalescent measure."""


class NumericError(CoalscopeError, ArithmeticError):
    """A numerical routine failed to reach its tolerance.

    Attributes
    ----------
    achieved : float or None
        Error estimate reported by the routine, when available.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved
