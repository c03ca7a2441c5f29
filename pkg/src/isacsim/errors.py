"""Exception types raised by the simulator."""


class IsacError(Exception):
    """Base class for all package-specific errors."""


class SingularSystemError(IsacError):
    """Least-squares Gram matrix is numerically singular; no ridge fallback."""


class DegenerateCombinationError(IsacError):
    """Beamformer combination produced a (near-)zero vector that cannot be normalized."""


class CalibrationUnderpoweredError(IsacError):
    """Too few null-hypothesis samples to place the requested quantile reliably."""


class BudgetExhaustedError(IsacError):
    """A supervised phase requested more labeled episodes than the remaining budget."""


class NumericalFailureError(IsacError):
    """A numerical consistency check (e.g. finite-difference comparison) failed."""


class InvalidBatchError(IsacError):
    """A loss was evaluated on a batch that violates its conditioning requirements."""
