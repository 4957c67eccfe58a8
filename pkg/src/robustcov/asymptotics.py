"""Deterministic equivalents of the Maronna-type estimators.

In the large-(N, n) limit the regularized estimator behaves like

    S(rho) = (1 - rho) * v(gamma) * SCM + rho * I,

where gamma solves a scalar fixed-point equation over the spectral
distribution of the population covariance.  Under cluster
contamination the equivalent splits the sample term into legitimate
and outlier blocks weighted by v(gamma) and v(alpha), with (gamma,
alpha) solving a coupled system.  This module computes those scalars
(by bisection and by standard-interference-function iteration) and
assembles the equivalent matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import NonConvergenceError, PreconditionError
from .sampling import CovarianceModel, Dataset
from .weights import RegularizedContext, WeightFunction

__all__ = [
    "AsymptoticState",
    "solve_gamma",
    "solve_gamma_alpha_reg",
    "solve_gamma_alpha_noreg",
    "limits_eps_zero",
    "equivalent_clean",
    "equivalent_contaminated",
]

_SCALAR_TOL = 1e-12
_SCALAR_MAX_ITER = 10_000


@dataclass(frozen=True)
class AsymptoticState:
    """Solved scalar fixed points for one (weight, rho, c, eps, C, D) setup."""

    gamma: float
    v_gamma: float
    rho: float
    c: float
    eps: float = 0.0
    alpha: float | None = None
    v_alpha: float | None = None
    residuals: tuple[float, ...] = ()


def _as_cov(cov) -> CovarianceModel:
    return cov if isinstance(cov, CovarianceModel) else CovarianceModel(cov)


def _gamma_equation(ctx: RegularizedContext, eig: np.ndarray, gamma: float) -> float:
    """Left side minus one of the rewritten scalar equation; decreasing in gamma."""
    w = ctx.g_inv(gamma)
    phi_w = ctx.weight.phi(w)
    return float(np.mean(eig / ((1.0 - ctx.rho) * phi_w * eig + ctx.rho * gamma)) - 1.0)


def solve_gamma(ctx: RegularizedContext, cov) -> AsymptoticState:
    """Solve the clean-data scalar fixed point gamma for a finite spectrum.

    The spectral distribution is always the empirical spectrum of the
    supplied covariance; integrals are eigenvalue averages.  For rho in
    (0, 1] the equation is solved by bisection on a bracket with a
    guaranteed sign change; rho = 0 (admissible only when
    phi_infinity * c < 1) has the closed form gamma = g(phi_inv(1)),
    which requires phi_infinity > 1.
    """
    cov = _as_cov(cov)
    eig = cov.eigenvalues
    if eig.max() <= 0:
        raise PreconditionError("degenerate spectrum: all eigenvalues are zero")
    if ctx.rho == 0.0:
        if ctx.weight.phi_infinity <= 1.0:
            raise PreconditionError(
                "the non-regularized fixed point needs phi_infinity > 1"
            )
        gamma = ctx.g(ctx.weight.phi_inv(1.0))
        residual = abs(1.0 / ctx.weight.phi(ctx.g_inv(gamma)) - 1.0)
    else:
        lo = 1e-12
        hi = float(eig.max()) / ctx.rho + 1.0
        f_lo = _gamma_equation(ctx, eig, lo)
        f_hi = _gamma_equation(ctx, eig, hi)
        if not (f_lo > 0.0 > f_hi):
            raise PreconditionError(
                f"no sign change on the gamma bracket [{lo:g}, {hi:g}]"
            )
        while hi - lo > 1e-15 * max(1.0, lo):
            mid = 0.5 * (lo + hi)
            if _gamma_equation(ctx, eig, mid) > 0.0:
                lo = mid
            else:
                hi = mid
        gamma = 0.5 * (lo + hi)
        residual = abs(_gamma_equation(ctx, eig, gamma))
    return AsymptoticState(
        gamma=gamma,
        v_gamma=float(ctx.v(gamma)),
        rho=ctx.rho,
        c=ctx.c,
        eps=0.0,
        residuals=(residual,),
    )


def _trace_pair(C: np.ndarray, D: np.ndarray, E: np.ndarray) -> tuple[float, float]:
    """(1/N) tr(C E^{-1}) and (1/N) tr(D E^{-1}) through one Cholesky of E."""
    dim = E.shape[0]
    factor = cho_factor(E, check_finite=False)
    Ei = cho_solve(factor, np.eye(dim, dtype=E.dtype), check_finite=False)
    trC = np.einsum("ij,ji->", C, Ei).real / dim
    trD = np.einsum("ij,ji->", D, Ei).real / dim
    return float(trC), float(trD)


def _f_over_x(ctx: RegularizedContext, x: float) -> float:
    """f(x)/x = v(x) / (1 + c (1-rho) x v(x)), the equivalent-system coefficient."""
    vx = float(ctx.v(x))
    return vx / (1.0 + ctx.c * (1.0 - ctx.rho) * x * vx)


def _interference_solve(
    ctx: RegularizedContext,
    eps: float,
    C: np.ndarray,
    D: np.ndarray,
    start: tuple[float, float] | None = None,
    trace: list | None = None,
) -> tuple[float, float, tuple[float, float], int]:
    dim = C.shape[0]
    eye = np.eye(dim)
    rho = ctx.rho

    def h(q0: float, q1: float) -> tuple[float, float]:
        E = (1.0 - rho) * (1.0 - eps) * _f_over_x(ctx, q0) * C
        E = E + (1.0 - rho) * eps * _f_over_x(ctx, q1) * D
        if rho != 0.0:
            E = E + rho * eye
        return _trace_pair(C, D, E)

    if start is not None:
        q0, q1 = start
    else:
        # feasible start in the regularized case: E >= rho I bounds h by tr/(N rho)
        start_scale = rho if rho > 0.0 else 1e-3
        q0 = float(np.trace(C).real) / dim / start_scale
        q1 = float(np.trace(D).real) / dim / start_scale
    step = 1.0
    prev_update = math.inf
    for iteration in range(1, _SCALAR_MAX_ITER + 1):
        h0, h1 = h(q0, q1)
        update = max(abs(h0 - q0), abs(h1 - q1))
        if trace is not None:
            trace.append(update)
        if update <= _SCALAR_TOL:
            q0, q1 = h0, h1
            break
        if update > prev_update:
            step = max(0.05, 0.5 * step)  # damp on oscillation
        q0 += step * (h0 - q0)
        q1 += step * (h1 - q1)
        prev_update = update
    else:
        raise NonConvergenceError(
            f"interference iteration stalled at update {update:.3e} "
            f"after {_SCALAR_MAX_ITER} iterations"
        )
    h0, h1 = h(q0, q1)
    return q0, q1, (abs(h0 - q0), abs(h1 - q1)), iteration


def solve_gamma_alpha_reg(
    ctx: RegularizedContext, eps: float, cov_legit, cov_outlier
) -> AsymptoticState:
    """Coupled (gamma, alpha) system of the regularized contaminated equivalent.

    Reduces to :func:`solve_gamma` at eps = 0 (alpha then comes from
    the closed limit formula rather than the degenerate coupled
    system) and to the non-regularized system at rho = 0.
    """
    cov_legit = _as_cov(cov_legit)
    cov_outlier = _as_cov(cov_outlier)
    if not 0.0 <= eps < 1.0:
        raise PreconditionError(f"eps must lie in [0, 1), got {eps}")
    if cov_legit.dim != cov_outlier.dim:
        raise PreconditionError("covariance dimensions differ")
    if eps == 0.0:
        base = solve_gamma(ctx, cov_legit)
        gamma0, alpha0 = limits_eps_zero(ctx, cov_legit, cov_outlier)
        C, D = cov_legit.matrix, cov_outlier.matrix
        E = _equivalent_resolvent(ctx, eps, gamma0, alpha0, C, D)
        h0, h1 = _trace_pair(C, D, E)
        return AsymptoticState(
            gamma=gamma0,
            v_gamma=float(ctx.v(gamma0)),
            rho=ctx.rho,
            c=ctx.c,
            eps=0.0,
            alpha=alpha0,
            v_alpha=float(ctx.v(alpha0)),
            residuals=(base.residuals[0], abs(h0 - gamma0), abs(h1 - alpha0)),
        )
    gamma, alpha, residuals, _ = _interference_solve(
        ctx, eps, cov_legit.matrix, cov_outlier.matrix
    )
    return AsymptoticState(
        gamma=gamma,
        v_gamma=float(ctx.v(gamma)),
        rho=ctx.rho,
        c=ctx.c,
        eps=eps,
        alpha=alpha,
        v_alpha=float(ctx.v(alpha)),
        residuals=residuals,
    )


def solve_gamma_alpha_noreg(
    weight: WeightFunction, c: float, eps: float, cov_legit, cov_outlier
) -> AsymptoticState:
    """Non-regularized coupled system; needs c < 1 and 1 < phi_infinity < 1/c."""
    if not 0.0 < c < 1.0:
        raise PreconditionError(f"the non-regularized system needs c in (0, 1), got {c}")
    if not 1.0 < weight.phi_infinity < 1.0 / c:
        raise PreconditionError(
            f"phi_infinity = {weight.phi_infinity:.3g} outside (1, 1/c) = (1, {1.0 / c:.3g})"
        )
    return solve_gamma_alpha_reg(RegularizedContext(weight, 0.0, c), eps, cov_legit, cov_outlier)


def _equivalent_resolvent(ctx, eps, gamma, alpha, C, D):
    E = (1.0 - ctx.rho) * (1.0 - eps) * _f_over_x(ctx, gamma) * C
    E = E + (1.0 - ctx.rho) * eps * _f_over_x(ctx, alpha) * D
    if ctx.rho != 0.0:
        E = E + ctx.rho * np.eye(C.shape[0])
    return E


def limits_eps_zero(ctx: RegularizedContext, cov_legit, cov_outlier) -> tuple[float, float]:
    """Vanishing-contamination limits (gamma0, alpha0).

    gamma0 is the clean fixed point; alpha0 = (1/N) tr(D A^{-1}) with
    A = (1-rho) v(gamma0) / (1 + (1-rho) c gamma0 v(gamma0)) C + rho I.
    At rho = 0 this reduces to gamma0 = phi_inv(1) / (1 - c) and
    alpha0 = gamma0 * (1/N) tr(C^{-1} D).
    """
    cov_legit = _as_cov(cov_legit)
    cov_outlier = _as_cov(cov_outlier)
    gamma0 = solve_gamma(ctx, cov_legit).gamma
    dim = cov_legit.dim
    A = _f_over_x(ctx, gamma0) * (1.0 - ctx.rho) * cov_legit.matrix
    if ctx.rho != 0.0:
        A = A + ctx.rho * np.eye(dim)
    elif cov_legit.eigenvalues.min() <= 0:
        raise PreconditionError("singular legitimate covariance in the rho = 0 branch")
    factor = cho_factor(A, check_finite=False)
    Ai = cho_solve(factor, np.eye(dim, dtype=A.dtype), check_finite=False)
    alpha0 = float(np.einsum("ij,ji->", cov_outlier.matrix, Ai).real / dim)
    return gamma0, alpha0


def _check_c(state: AsymptoticState, data) -> None:
    c_n = data.shape[0] / data.shape[1]
    if abs(state.c - c_n) > 1e-9:
        raise PreconditionError(
            f"state solved for c = {state.c:.6g} but data has c_N = {c_n:.6g}"
        )


def equivalent_clean(data, state: AsymptoticState) -> np.ndarray:
    """Assemble S(rho) = (1 - rho) v(gamma) SCM + rho I on the given samples."""
    Y = data.samples if isinstance(data, Dataset) else np.asarray(data)
    _check_c(state, Y)
    dim, n = Y.shape
    S = (1.0 - state.rho) * state.v_gamma / n * (Y @ Y.conj().T)
    S = 0.5 * (S + S.conj().T)
    if state.rho != 0.0:
        S += state.rho * np.eye(dim, dtype=S.dtype)
    return S


def equivalent_contaminated(dataset: Dataset, state: AsymptoticState) -> np.ndarray:
    """Contaminated equivalent with per-block weights v(gamma), v(alpha)."""
    if state.alpha is None or state.v_alpha is None:
        raise PreconditionError("state has no alpha component; solve the coupled system first")
    expected_outliers = int(math.floor(state.eps * dataset.n))
    if expected_outliers != dataset.n_outlier:
        raise PreconditionError(
            f"dataset has {dataset.n_outlier} outliers but state.eps = {state.eps} "
            f"implies {expected_outliers}"
        )
    _check_c(state, dataset.samples)
    dim, n = dataset.samples.shape
    Yl, Ya = dataset.legit, dataset.outliers
    S = (1.0 - state.rho) * state.v_gamma / n * (Yl @ Yl.conj().T)
    if dataset.n_outlier:
        S = S + (1.0 - state.rho) * state.v_alpha / n * (Ya @ Ya.conj().T)
    S = 0.5 * (S + S.conj().T)
    if state.rho != 0.0:
        S += state.rho * np.eye(dim, dtype=S.dtype)
    return S
