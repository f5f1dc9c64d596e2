"""Exception types shared across the library."""


class BsdeLabError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatchError(BsdeLabError):
    """Matrix or vector shapes are mutually inconsistent."""


class NonPSDError(BsdeLabError):
    """A matrix required to be symmetric positive semidefinite is not."""


class NonPDError(BsdeLabError):
    """A matrix required to be symmetric positive definite is not."""


class SingularSigmaError(BsdeLabError):
    """The diffusion matrix is singular or too ill-conditioned to invert."""


class NonFiniteError(BsdeLabError):
    """A computation produced or received NaN/Inf values."""


class SingularCovarianceError(BsdeLabError):
    """An empirical covariance is numerically singular."""


class TooFewSamplesError(BsdeLabError):
    """Not enough samples for the requested fit."""
