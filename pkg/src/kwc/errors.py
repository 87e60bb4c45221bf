"""Exception types raised across the package."""


class KWCError(Exception):
    """Base class for all package errors."""


class InvalidArgument(KWCError, ValueError):
    pass


class NumericFailure(KWCError, RuntimeError):
    """A numerical routine did not reach its tolerance.

    ``achieved`` carries the error estimate (or best objective) reached, and
    ``best`` optionally the best iterate found so far.
    """

    def __init__(self, message, achieved=None, best=None):
        super().__init__(message)
        self.achieved = achieved
        self.best = best


class DegenerateSlice(KWCError):
    """A slicing line runs along a jump segment."""


class EpsilonTooLarge(KWCError):
    """Recovery-profile supports overlap or leave the domain."""

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class PropertyViolation(KWCError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
