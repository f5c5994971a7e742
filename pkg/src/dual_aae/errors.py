"""Exception types shared across the package."""


class DualAaeError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(DualAaeError, ValueError):
    """Invalid configuration value or inconsistent model/run setup."""


class DimensionError(DualAaeError, ValueError):
    """Shape or rank mismatch between tensors."""


class NumericError(DualAaeError, FloatingPointError):
    """Non-finite values or domain violations in numeric code."""


class DataFormatError(DualAaeError, ValueError):
    """Malformed dataset file (IDX or CSV)."""


class CheckpointError(DualAaeError, RuntimeError):
    """Unreadable, corrupt, or incompatible checkpoint file."""
