"""Exception types shared across the package."""


class ProxRateError(Exception):
    """Base class for all errors raised by proxrate."""


class ParameterError(ProxRateError, ValueError):
    """A scalar parameter (step size, tolerance, ...) is out of range."""


class DimensionError(ProxRateError, ValueError):
    """An input vector does not match the problem dimension."""


class HypothesisError(ProxRateError, ValueError):
    """A bound was requested outside the hypothesis under which it is proven."""


class UndefinedBoundError(ProxRateError, ValueError):
    """A bound has no finite value at the requested iteration."""


class DivergenceError(ProxRateError, ArithmeticError):
    """A solver produced a non-finite iterate.

    ``last`` holds the last finite iterate record and ``k`` the step at which
    the non-finite value appeared.
    """

    def __init__(self, message, k, last):
        super().__init__(message)
        self.k = k
        self.last = last


class EstimationError(ProxRateError, RuntimeError):
    """Power iteration did not reach its tolerance; ``estimate`` is the last value."""

    def __init__(self, message, estimate):
        super().__init__(message)
        self.estimate = estimate


class ReferenceQualityError(ProxRateError, ValueError):
    """The reference minimizer is measurably worse than an observed iterate."""


class FormatError(ProxRateError, ValueError):
    """A file could not be parsed; ``offset`` is the byte position of the fault."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class PartialReferenceWarning(UserWarning):
    """Reference solver ran out of budget before reaching its target accuracy."""
