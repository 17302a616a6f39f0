"""Exception types shared across the package."""


class DbarFiberError(Exception):
    """Base class for all package errors."""


class ConfigError(DbarFiberError):
    """Malformed or inconsistent run configuration (CLI exit code 2)."""


class NumericalError(DbarFiberError):
    """A numerical procedure failed (CLI exit code 3)."""


class NonFiniteSampleError(NumericalError):
    """A field evaluation produced NaN or infinity."""


class TruncationError(NumericalError):
    """No admissible truncation radius meets the tail tolerance."""


class MissingDerivativeError(DbarFiberError):
    """An operation required an analytic derivative that was not supplied."""
