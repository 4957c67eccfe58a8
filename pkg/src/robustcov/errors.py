"""Exception types shared across the package."""


class RobustCovError(Exception):
    """Base class for all package-specific errors."""


class AdmissibilityError(RobustCovError):
    """The (weight, rho, c) combination violates (1 - rho) * phi_inf * c < 1."""


class PreconditionError(RobustCovError):
    """An operation was called outside its validity regime."""


class NonConvergenceError(RobustCovError):
    """An iterative solver hit its iteration cap before reaching tolerance.

    The partial result, when available, is attached as ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class SingularIterateError(RobustCovError):
    """A fixed-point iterate lost positive definiteness (violated preconditions)."""


class KinkError(RobustCovError):
    """Derivative requested exactly at a non-differentiable point."""
