"""Exception types shared across the package."""


class AlfMassError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(AlfMassError, ValueError):
    """Input point or parameter outside the domain of validity."""


class ConfigError(AlfMassError, ValueError):
    """Invalid run configuration; the message names the offending key."""


class NumericError(AlfMassError, ArithmeticError):
    """Non-finite values or a failed numerical consistency check."""


class NonConvergenceError(AlfMassError, RuntimeError):
    """A limit or fit did not converge.  Carries the partial results."""

    def __init__(self, message, table=None, diagnostics=None):
        super().__init__(message)
        self.table = table if table is not None else []
        self.diagnostics = diagnostics if diagnostics is not None else {}


class UnsupportedModelError(AlfMassError, ValueError):
    """Operation defined only for a different fibration type."""


class SamplingError(AlfMassError, ValueError):
    """Too few samples for the requested Fourier index (aliasing)."""


class ResolutionError(AlfMassError, ValueError):
    """Grid too coarse for the finite-difference order in use."""


class DecayError(AlfMassError, ValueError):
    """Data does not decay fast enough for a tail integral to converge."""


class DegenerateInputError(AlfMassError, ValueError):
    """Input is degenerate for the requested quantity (e.g. zero denominator)."""


class IllPosedWindowError(AlfMassError, ValueError):
    """Least-squares window is too ill-conditioned to identify coefficients."""
