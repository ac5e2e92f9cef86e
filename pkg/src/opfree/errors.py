"""Exception types shared across the package."""


class OpfreeError(Exception):
    """Base class for all package errors."""


class ValidationError(OpfreeError, ValueError):
    """Input data violates a structural requirement (dimensions, closure, CP)."""


class SizeLimitError(OpfreeError):
    """A configured size cap (enumeration degree, Fock dimension) was exceeded."""


class ExactnessError(OpfreeError):
    """A requested quantity is not exact at the model's truncation depth."""


class ConfigError(OpfreeError):
    """A run configuration could not be parsed or is inconsistent."""
