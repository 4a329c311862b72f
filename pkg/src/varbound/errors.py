"""Exception hierarchy shared by the library and the command line."""


class VarboundError(Exception):
    """Base class for every error raised by varbound."""


class PotentialSyntaxError(VarboundError, ValueError):
    """A potential expression could not be parsed.

    ``position`` is the 0-based character offset of the offending token.
    """

    def __init__(self, message, expression="", position=None):
        self.expression = expression
        self.position = position
        if position is not None:
            message = f"{message} at position {position}"
            if expression:
                message += f"\n  {expression}\n  {' ' * position}^"
        super().__init__(message)


class DomainError(VarboundError, ValueError):
    """Parameters fall outside the domain where the matrix elements exist."""


class NumericalError(VarboundError, ArithmeticError):
    """A numerical procedure failed (conditioning, bracketing, convergence)."""


class BasisDependenceError(NumericalError):
    """The normalization matrix is not positive definite to working precision."""

    def __init__(self, message, pivot_index=None, pivot=None):
        self.pivot_index = pivot_index
        self.pivot = pivot
        super().__init__(message)


class BracketError(NumericalError):
    """No minimum or eigenvalue could be bracketed inside the search range."""
