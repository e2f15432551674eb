"""Exception hierarchy shared across the package."""


class LphError(Exception):
    """Base class for all errors raised by lphfda."""


class DimensionError(LphError, ValueError):
    """Array shapes do not agree with what an operation requires."""


class NumericError(LphError, ArithmeticError):
    """A computation overflowed or produced non-finite values."""


class SingularMatrixError(NumericError):
    """A matrix is singular to working tolerance.

    Attributes
    ----------
    pivot : float
        Magnitude of the smallest LU pivot, relative to the largest one.
    """

    def __init__(self, message, pivot):
        super().__init__(f"{message} (relative pivot {pivot:.3e})")
        self.pivot = pivot


class SymmetryError(LphError, ValueError):
    """A matrix expected to be symmetric is not."""


class DomainError(LphError, ValueError):
    """An argument lies outside the domain of the function."""


class RepresentationError(LphError, ValueError):
    """A (PH or LPH) representation violates one of its invariants."""


class IncompatibleSlopeError(LphError, ValueError):
    """LPH summands do not share a common slope."""


class DivergenceError(LphError, ValueError):
    """Moment-generating function evaluated outside its convergence region."""


class FitError(LphError, RuntimeError):
    """A fitting procedure failed to produce a usable model."""
