"""Exception hierarchy shared across fragilis."""


class FragilisError(Exception):
    """Base class for all fragilis errors."""


class InvalidInputError(FragilisError, ValueError):
    """Raised when an argument is malformed (non-finite, wrong shape, out of range)."""


class NumericFailureError(FragilisError, ArithmeticError):
    """Raised when an iterative numerical routine fails to converge."""

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class SingularResolventError(FragilisError, ArithmeticError):
    """Raised when ``z`` lies (numerically) on the spectrum of ``A``."""


class InfeasibleConstraintError(FragilisError, ArithmeticError):
    """Raised when ``B x = b`` has no solution.

    For fragility this means the target eigenvalue cannot be reached by a
    real rank-one row/column perturbation.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class PreconditionError(FragilisError, ValueError):
    """Raised when a bound is requested outside its hypotheses.

    ``flag`` names the failing precondition.
    """

    def __init__(self, message, flag=None):
        super().__init__(message)
        self.flag = flag


class SimulationOverflowError(FragilisError, OverflowError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ParseError(FragilisError, ValueError):
    """Raised for malformed input files; carries ``line`` or ``offset`` when known."""

    def __init__(self, message, line=None, offset=None):
        super().__init__(message)
        self.line = line
        self.offset = offset
