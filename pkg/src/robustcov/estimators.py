"""Covariance estimators: SCM, linear shrinkage, and Maronna-type fixed points.

The Maronna-type estimators solve

    Z = (1/n) sum_i u((1/N) y_i^H Z^{-1} y_i) y_i y_i^H            (plain)
    Z = (1-rho) * (1/n) sum_i u(...) y_i y_i^H + rho I             (regularized)

by Picard iteration.  Convergence is declared on the relative
Frobenius equation residual ||RHS(Z) - Z||_F / ||Z||_F, not merely on
successive-iterate stalls.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (
    AdmissibilityError,
    NonConvergenceError,
    PreconditionError,
    SingularIterateError,
)
from .sampling import Dataset
from .weights import WeightFunction, WeightKind

__all__ = ["SolverOptions", "EstimatorResult", "scm", "rscm", "maronna", "regularized_maronna"]


@dataclass(frozen=True)
class SolverOptions:
    """Iteration controls for the fixed-point solvers."""

    tolerance: float = 1e-9
    max_iterations: int = 200
    initializer: str = "identity"  # "identity" or "scm"

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.initializer not in ("identity", "scm"):
            raise ValueError(f"unknown initializer {self.initializer!r}")


@dataclass
class EstimatorResult:
    """A converged (or diagnosed) fixed-point solve.

    ``weights`` are the per-sample u-values evaluated at ``estimate``,
    and ``quadratic_forms`` the matching (1/N) y_i^H Z^{-1} y_i, so the
    fixed-point self-consistency w == u(d) holds exactly.
    """

    estimate: np.ndarray
    iterations: int
    residual: float
    converged: bool
    weights: np.ndarray
    quadratic_forms: np.ndarray


def _as_samples(data) -> np.ndarray:
    if isinstance(data, Dataset):
        return data.samples
    arr = np.asarray(data)
    if arr.ndim != 2:
        raise ValueError("expected an N x n sample matrix")
    return arr


def scm(data) -> np.ndarray:
    """Sample covariance matrix (1/n) Y Y^H."""
    Y = _as_samples(data)
    if Y.shape[1] < 1:
        raise ValueError("need at least one sample")
    S = (Y @ Y.conj().T) / Y.shape[1]
    return 0.5 * (S + S.conj().T)


def rscm(data, beta: float) -> np.ndarray:
    """Linear shrinkage (1 - beta) * SCM + beta * I."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    S = scm(data)
    return (1.0 - beta) * S + beta * np.eye(S.shape[0], dtype=S.dtype)


def _solve(Y, weight, rho, options, initial):
    dim, n = Y.shape
    if initial is not None:
        Z0 = np.asarray(initial, dtype=Y.dtype)
        if Z0.shape != (dim, dim):
            raise ValueError("initial iterate has the wrong shape")
    elif options.initializer == "scm" and rho != 1.0:
        # shrink toward the identity so the start stays PD when n < N
        Z0 = (1.0 - rho) * scm(Y) + rho * np.eye(dim, dtype=Y.dtype)
    else:
        Z0 = np.eye(dim, dtype=Y.dtype)
    kind_code = _kernels.KIND_TYLER if weight.kind is WeightKind.M_TYLER else _kernels.KIND_HUBER
    try:
        Z, d, w, iterations, residual, converged = _kernels.fixed_point_solve(
            Y, rho, kind_code, weight.K, weight.t, options.tolerance, options.max_iterations, Z0
        )
    except np.linalg.LinAlgError as exc:
        raise SingularIterateError(
            "iterate lost positive definiteness; check sample count and phi_infinity regime"
        ) from exc
    result = EstimatorResult(Z, iterations, residual, converged, w, d)
    if not converged:
        raise NonConvergenceError(
            f"fixed point not reached after {iterations} iterations "
            f"(residual {residual:.3e} > tolerance {options.tolerance:.3e})",
            result=result,
        )
    return result


def maronna(data, weight: WeightFunction, options: SolverOptions | None = None, initial=None) -> EstimatorResult:
    """Solve the plain (non-regularized) M-estimator fixed point.

    Requires the under-determined regime c_N = N/n < 1 together with
    1 < phi_infinity < 1/c_N, outside of which a solution need not
    exist.

    Raises
    ------
    PreconditionError, SingularIterateError, NonConvergenceError
    """
    Y = _as_samples(data)
    options = options or SolverOptions()
    c_n = Y.shape[0] / Y.shape[1]
    if c_n >= 1.0:
        raise PreconditionError(f"c_N = {c_n:.3g} >= 1: use regularized_maronna instead")
    if not 1.0 < weight.phi_infinity < 1.0 / c_n:
        raise PreconditionError(
            f"phi_infinity = {weight.phi_infinity:.3g} outside (1, 1/c_N) = (1, {1.0 / c_n:.3g})"
        )
    return _solve(Y, weight, 0.0, options, initial)


def regularized_maronna(
    data,
    weight: WeightFunction,
    rho: float,
    options: SolverOptions | None = None,
    initial=None,
) -> EstimatorResult:
    """Solve the regularized M-estimator fixed point for rho in (0, 1].

    Admissibility (1 - rho) * phi_infinity * c_N < 1 is enforced.  At
    rho = 1 the equation collapses and the identity is returned after a
    single iteration.
    """
    Y = _as_samples(data)
    options = options or SolverOptions()
    if not 0.0 < rho <= 1.0:
        raise AdmissibilityError(f"rho must lie in (0, 1], got {rho}")
    c_n = Y.shape[0] / Y.shape[1]
    if (1.0 - rho) * weight.phi_infinity * c_n >= 1.0:
        raise AdmissibilityError(
            f"(1 - rho) * phi_inf * c_N = {(1.0 - rho) * weight.phi_infinity * c_n:.6g} >= 1"
        )
    return _solve(Y, weight, rho, options, initial)
