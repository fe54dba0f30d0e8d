"""Exception types raised across the package."""


class N2DError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(N2DError, ValueError):
    """A caller-supplied argument violates a documented precondition."""


class DegenerateProblemError(N2DError):
    """The continuous or discrete problem is singular or near-singular."""


class InsufficientSamplingError(N2DError):
    """Too few sample solutions to determine an operator; raise n_samp."""


class AccuracyError(N2DError):
    """A computed operator failed its residual tolerance."""


class MergeSingularityError(N2DError):
    """The shared-edge coupling matrix of a merge is numerically singular."""
