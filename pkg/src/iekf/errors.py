"""Exception types raised by the library."""


class ContractError(ValueError):
    """An argument violates a documented precondition (shape, group, SPD, ...)."""


class CutLocusError(ValueError):
    """The logarithm was requested outside the injectivity domain of exp."""


class NumericError(FloatingPointError):
    """A filter step produced a non-finite or singular quantity."""
