"""Exception types shared across the package."""


class GeoQKDError(Exception):
    """Base class for all simulator errors."""


class ParameterError(GeoQKDError, ValueError):
    """An input is outside its physical or structural domain."""


class NumericError(GeoQKDError, ArithmeticError):
    """A numerical procedure failed to converge or factorize."""


class ModelError(GeoQKDError):
    """A model produced an internally inconsistent result (e.g. an indefinite covariance)."""


class NearFieldWarning(UserWarning):
    """The far-field geometric-loss formula exceeded unity and was clamped."""
