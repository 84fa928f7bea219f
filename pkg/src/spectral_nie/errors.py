"""Exception types shared across the package."""


class SpectralNIEError(Exception):
    """Base class for package errors."""


class NonFiniteError(SpectralNIEError, ArithmeticError):
    """An iterate, loss or gradient contains NaN or Inf.

    ``sample`` carries the offending batch index when known.
    """

    def __init__(self, message: str, sample: int | None = None):
        super().__init__(message)
        self.sample = sample


class SingularSystemError(SpectralNIEError, ArithmeticError):
    """The quadrature linear system is singular (lambda at a characteristic value)."""


class DivergedError(SpectralNIEError, ArithmeticError):
    """A time integration blew up."""


class SchemaError(SpectralNIEError, ValueError):
    """A file on disk does not match its expected layout."""


class ChecksumError(SchemaError):
    """Checkpoint payload does not match the checksum in its manifest."""
