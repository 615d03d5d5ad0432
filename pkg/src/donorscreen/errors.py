"""Exception taxonomy shared across the package.

The CLI maps these onto process exit codes: usage/config errors exit 1,
data errors exit 2, numerical errors exit 3.
"""


class DonorScreenError(Exception):
    """Base class for all package errors."""


class UsageError(DonorScreenError):
    """Caller violated an argument or configuration contract."""


class DataError(DonorScreenError):
    """Input data violates a structural invariant (ragged panel, bad CSV, ...)."""


class NumericalError(DonorScreenError):
    """A numerical precondition failed (zero variance, non-convergence, ...).

    May carry a partial result, e.g. best-so-far solver weights.
    """

    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload


class InternalError(DonorScreenError):
    """Invariant the library itself should have upheld was broken."""
