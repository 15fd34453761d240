"""
errors.py

Exception hierarchy shared by the aas_lab modules. The CLI maps each
family to a process exit code.
"""


class AASLabError(Exception):
    """Base class for all aas_lab errors."""

    exit_code = 1


class ConfigError(AASLabError, ValueError):
    """Raised when a run configuration fails validation."""

    exit_code = 2


class NumericalError(AASLabError, RuntimeError):
    """Raised when a numerical step cannot produce a trustworthy result."""

    exit_code = 3


class EigensolverError(NumericalError):
    """Raised when the tridiagonal eigensolver fails to converge.

    Attributes:
        index (int): Index of the eigenpair (or off-diagonal element) that
            failed, as reported by LAPACK.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class DegenerateGroundStateError(NumericalError):
    """Raised when the ground state is degenerate and the QFI is undefined."""


class CollapseError(NumericalError):
    """Raised when a data-collapse search has no usable flat window."""


class FitError(NumericalError):
    """Raised when a power-law fit cannot be performed."""


class OutputError(AASLabError, OSError):
    """Raised when an input or output file cannot be read or written."""

    exit_code = 4
