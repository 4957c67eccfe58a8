"""Shrinkage calibration: quadratic loss, rho mappings, and optima.

Any trace-normalized regularized M-estimator equivalent equals a
trace-normalized linear-shrinkage SCM with parameter

    rho_bar = rho / ((1 - rho) * v(gamma(rho)) + rho),

so the optimal shrinkage problem reduces to the classical one: with
M1, M2 the first two moments of the (unit-mean) spectral distribution,
the minimal quadratic loss is L* = c (M2 - 1) / (c + M2 - 1) attained
at rho_bar = rho* = c / (c + M2 - 1).  A data-driven estimate rho_hat
solves a trace identity requiring one matrix fixed-point solve per
evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .asymptotics import solve_gamma
from .errors import NonConvergenceError, PreconditionError
from .estimators import SolverOptions, regularized_maronna
from .sampling import CovarianceModel, Dataset
from .weights import RegularizedContext, WeightFunction

__all__ = [
    "CalibrationReport",
    "quadratic_loss",
    "rho_to_rho_bar",
    "rho_bar_to_rho",
    "oracle_optimum",
    "rho_star_estimate",
    "estimate_rho_hat",
]


@dataclass
class CalibrationReport:
    """Oracle and/or data-driven calibration quantities."""

    rho_star: float
    L_star: float
    M1: float
    M2: float
    rho_hat: float | None = None
    rho_bar_of_rho_hat: float | None = None
    diagnostics: tuple[str, ...] = field(default_factory=tuple)


def _as_matrix(A) -> np.ndarray:
    if isinstance(A, CovarianceModel):
        return A.matrix
    return np.asarray(A)


def quadratic_loss(A, C) -> float:
    """(1/N) || A / mean-tr(A) - C / mean-tr(C) ||_F^2.

    Scale-invariant in both arguments; zero iff A is proportional to C.
    """
    A = _as_matrix(A)
    C = _as_matrix(C)
    if A.shape != C.shape:
        raise ValueError(f"shape mismatch {A.shape} vs {C.shape}")
    dim = A.shape[0]
    tr_a = float(np.trace(A).real) / dim
    tr_c = float(np.trace(C).real) / dim
    if tr_a == 0.0 or tr_c == 0.0:
        raise ValueError("quadratic loss undefined for zero-trace matrices")
    diff = A / tr_a - C / tr_c
    return float(np.linalg.norm(diff, "fro") ** 2) / dim


def rho_to_rho_bar(ctx: RegularizedContext, cov) -> float:
    """Map rho to the equivalent linear-shrinkage parameter rho_bar."""
    gamma_state = solve_gamma(ctx, cov)
    v_gamma = gamma_state.v_gamma
    return ctx.rho / ((1.0 - ctx.rho) * v_gamma + ctx.rho)


def rho_bar_to_rho(
    weight: WeightFunction, rho_bar: float, c: float, cov, grid_points: int = 200
) -> float:
    """Invert the rho -> rho_bar map; returns the smallest solution in (0, 1].

    The map is continuous and onto (0, 1] but not guaranteed injective,
    so the admissible interval is scanned from the left for the first
    sign change, then the root is polished by Brent's method.
    """
    if not 0.0 < rho_bar <= 1.0:
        raise ValueError(f"rho_bar must lie in (0, 1], got {rho_bar}")
    if rho_bar == 1.0:
        return 1.0
    rho_lo = max(0.0, 1.0 - 1.0 / (c * weight.phi_infinity)) + 1e-8

    def objective(rho: float) -> float:
        return rho_to_rho_bar(RegularizedContext(weight, rho, c), cov) - rho_bar

    grid = np.linspace(rho_lo, 1.0, grid_points)
    values = [objective(r) for r in grid]
    for left, right, f_left, f_right in zip(grid, grid[1:], values, values[1:]):
        if f_left == 0.0:
            return float(left)
        if f_left * f_right <= 0.0:
            return float(brentq(objective, left, right, xtol=1e-12, rtol=1e-12))
    raise NonConvergenceError(
        f"no rho in ({rho_lo:.3g}, 1] maps to rho_bar = {rho_bar}"
    )


def oracle_optimum(c: float, cov) -> CalibrationReport:
    """Optimal shrinkage rho* and its minimal loss L* from a known spectrum.

    The spectrum is normalized to unit mean before applying the
    formulas (the optimum is stated for a unit-mean spectral
    distribution; the loss itself is scale-invariant).
    """
    if c <= 0:
        raise ValueError("aspect ratio c must be positive")
    cov = cov if isinstance(cov, CovarianceModel) else CovarianceModel(cov)
    m1 = cov.m1
    if m1 <= 0:
        raise ValueError("spectrum has zero mean")
    m2_norm = cov.m2 / m1**2
    if m2_norm < 1.0 - 1e-12:
        raise PreconditionError("normalized M2 < 1 is impossible (Jensen)")
    m2_norm = max(m2_norm, 1.0)
    rho_star = c / (c + m2_norm - 1.0)
    l_star = c * (m2_norm - 1.0) / (c + m2_norm - 1.0)
    return CalibrationReport(rho_star=rho_star, L_star=l_star, M1=m1, M2=cov.m2)


def _normalized_outer_square_trace(Y: np.ndarray) -> float:
    """(1/N) tr(T^2) for T = (1/n) sum_i y_i y_i^H / ((1/N) ||y_i||^2)."""
    dim, n = Y.shape
    norms = (np.abs(Y) ** 2).sum(axis=0) / dim
    T = (Y / norms) @ Y.conj().T / n
    return float(np.einsum("ij,ji->", T, T).real / dim)


def rho_star_estimate(data) -> float:
    """Consistent data-driven estimate of the optimal linear-shrinkage rho*.

    c_N / ((1/N) tr T^2 - 1) with T the self-normalized sample
    outer-product average; rho-independent, one pass over the data.
    """
    Y = data.samples if isinstance(data, Dataset) else np.asarray(data)
    dim, n = Y.shape
    return (dim / n) / (_normalized_outer_square_trace(Y) - 1.0)


def estimate_rho_hat(
    data,
    weight: WeightFunction,
    options: SolverOptions | None = None,
    max_evaluations: int = 40,
) -> CalibrationReport:
    """Data-driven optimal shrinkage for a Maronna-type estimator.

    Solves rho / ((1/N) tr Z(rho)) = target, where Z(rho) is the
    regularized fixed point on the data and the rho-independent target
    is c_N / ((1/N) tr T^2 - 1) with T the self-normalized sample
    outer-product average.  Each left-side evaluation costs one matrix
    solve; consecutive solves warm-start from the previous fixed point.

    When no sign change exists on the admissible interval the nearest
    boundary is returned with a diagnostic note.
    """
    Y = data.samples if isinstance(data, Dataset) else np.asarray(data)
    options = options or SolverOptions()
    dim, n = Y.shape
    c_n = dim / n
    target = rho_star_estimate(Y)
    m2_hat = c_n / target + 1.0 - c_n  # implied spectrum second moment
    diagnostics = []
    if isinstance(data, Dataset) and data.n_outlier > 0:
        diagnostics.append(
            "dataset is flagged as contaminated; rho_hat uses the clean-data identity"
        )

    rho_lo = max(max(0.0, 1.0 - 1.0 / (c_n * weight.phi_infinity)) + 1e-6, 1e-3)
    warm = {"Z": None}

    def left_side(rho: float) -> float:
        result = regularized_maronna(Y, weight, rho, options, initial=warm["Z"])
        warm["Z"] = result.estimate
        return rho / (float(np.trace(result.estimate).real) / dim)

    def objective(rho: float) -> float:
        return left_side(rho) - target

    f_hi = objective(1.0)  # equals 1 - target since Z(1) = I
    f_lo = objective(rho_lo)
    rho_hat = None
    if f_lo == 0.0:
        rho_hat = rho_lo
    elif f_hi == 0.0:
        rho_hat = 1.0
    elif f_lo * f_hi < 0.0:
        rho_hat = float(
            brentq(objective, rho_lo, 1.0, xtol=1e-8, maxiter=max_evaluations)
        )
    else:
        # scan a short geometric grid before giving up on a bracket
        grid = np.geomspace(rho_lo, 1.0, 8)
        prev_rho, prev_val = rho_lo, f_lo
        for rho in grid[1:]:
            val = objective(float(rho))
            if prev_val * val <= 0.0:
                rho_hat = float(
                    brentq(objective, prev_rho, float(rho), xtol=1e-8, maxiter=max_evaluations)
                )
                break
            prev_rho, prev_val = float(rho), val
        if rho_hat is None:
            rho_hat = 1.0 if abs(f_hi) <= abs(f_lo) else rho_lo
            diagnostics.append(
                f"no sign change on ({rho_lo:.3g}, 1]; returning the boundary {rho_hat:.3g}"
            )
    rho_bar_hat = left_side(rho_hat)
    l_star = c_n * (m2_hat - 1.0) / (c_n + m2_hat - 1.0) if m2_hat > 1.0 else 0.0
    return CalibrationReport(
        rho_star=target,
        L_star=l_star,
        M1=1.0,
        M2=m2_hat,
        rho_hat=rho_hat,
        rho_bar_of_rho_hat=rho_bar_hat,
        diagnostics=tuple(diagnostics),
    )
