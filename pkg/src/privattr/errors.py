"""Exception types shared across the package."""


class PrivattrError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(PrivattrError):
    """Bad input data, configuration, or file contents."""


class NumericalError(PrivattrError):
    """A numerical procedure failed to produce a usable result."""


class DivergenceError(NumericalError):
    """An iterative solver left its stability region."""
