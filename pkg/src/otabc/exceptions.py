"""Exception hierarchy shared by every module of the package."""


class OTABCError(Exception):
    """Base class for errors raised by otabc."""


class InvalidInput(OTABCError, ValueError):
    """An argument violates a documented precondition."""


class Unsupported(OTABCError, NotImplementedError):
    """The operation is not defined for the given inputs (e.g. a CDF in d > 1)."""


class TooLarge(OTABCError, ValueError):
    """A problem exceeds a configured size cap."""


class NoPosterior(OTABCError, RuntimeError):
    """A posterior query was made on a run without any accepted draw."""


class HypothesisUnmet(UserWarning):
    """A hypothesis required by a lower bound does not hold for the estimates."""
