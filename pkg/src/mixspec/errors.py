"""Exception hierarchy shared by every module of the package."""


class MixspecError(Exception):
    """Base class for all package errors."""


class ParameterError(MixspecError, ValueError):
    """A model or configuration parameter is invalid."""


class DomainError(MixspecError, ValueError):
    """An argument lies outside the domain of the operation."""


class InsufficientDataError(MixspecError, ValueError):
    """Not enough samples for the requested estimate or matrix."""


class UnsupportedModelError(MixspecError):
    """The requested computation has no exact implementation for this model."""


class CovarianceError(MixspecError):
    """A covariance matrix is not positive semi-definite."""


class SchemeError(MixspecError, ValueError):
    """Block scheme parameters do not fit inside one column."""


class ShapeError(MixspecError, ValueError):
    """Matrix shape or symmetry requirement violated."""


class TruncationOrderError(MixspecError):
    """A truncated cosine series went negative beyond tolerance."""


class SolverError(MixspecError):
    """The fixed-point solver failed to converge.

    ``trace`` holds the residual history of the failing point.
    """

    def __init__(self, message, z=None, trace=None):
        super().__init__(message)
        self.z = z
        self.trace = list(trace) if trace is not None else []
