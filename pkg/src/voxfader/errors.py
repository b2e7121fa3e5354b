"""Exception types shared across the package."""


class VoxFaderError(Exception):
    """Base class for all package errors."""


class DimensionError(VoxFaderError, ValueError):
    """Array shapes do not conform."""


class DomainError(VoxFaderError, ValueError):
    """A value lies outside the domain an operation accepts."""


class UsageError(VoxFaderError, RuntimeError):
    """An API was called in a way its contract forbids."""


class ValidationError(VoxFaderError, ValueError):
    """Input data or configuration failed validation."""


class NormalizationError(DomainError):
    """A zero-norm row was passed where L2 normalization is required."""


class NumericError(VoxFaderError, FloatingPointError):
    """A NaN or infinity appeared in a computation."""


class ConfigError(ValidationError):
    """A run configuration is malformed; the message names the offending field."""


class DataError(VoxFaderError, RuntimeError):
    """Input files are missing, corrupt, or inconsistent with each other."""
