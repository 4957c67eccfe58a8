"""Hot fixed-point kernels with a numba lane and a pure-numpy fallback.

The Picard iteration behind the Maronna-type solvers is the only part
of the package whose runtime matters: Monte-Carlo sweeps call it
thousands of times.  Both lanes implement the identical update

    Z <- (1 - rho)/n * sum_i u((1/N) y_i^H Z^{-1} y_i) y_i y_i^H + rho I

(rho = 0 gives the non-regularized estimator).  Quadratic forms come
from one triangular solve per sample against a Cholesky factor of Z,
refactorized each iteration; iterates are re-Hermitized defensively.

Lane selection: ROBUSTCOV_BACKEND=numpy|numba|auto (default auto picks
numba when importable).  ``backend_name()`` reports the active lane;
``benchmarks/bench_kernels.py`` compares the two.
"""

from __future__ import annotations

import math
import os

import numpy as np
from scipy.linalg import solve_triangular

KIND_TYLER = 0
KIND_HUBER = 1

_requested = os.environ.get("ROBUSTCOV_BACKEND", "auto").lower()
if _requested not in ("auto", "numpy", "numba"):
    raise ValueError(
        f"ROBUSTCOV_BACKEND must be auto, numpy or numba, got {_requested!r}"
    )

_HAVE_NUMBA = False
if _requested != "numpy":
    try:
        import numba

        _HAVE_NUMBA = True
    except ImportError:
        if _requested == "numba":
            raise ImportError("ROBUSTCOV_BACKEND=numba but numba is not installed")


def backend_name() -> str:
    return "numba" if _HAVE_NUMBA else "numpy"


def _u_values(d, kind_code: int, K: float, t: float):
    hyper = K * (1.0 + t) / (t + d)
    if kind_code == KIND_TYLER:
        return hyper
    return np.minimum(K, hyper)


def _iterate_numpy(Y, rho, kind_code, K, t, tol, max_iter, Z0):
    dim, n = Y.shape
    eye = np.eye(dim, dtype=Y.dtype)
    Z = np.array(Z0, dtype=Y.dtype)
    scale = (1.0 - rho) / n
    d = np.empty(n)
    w = np.empty(n)
    residual = math.inf
    for it in range(1, max_iter + 1):
        L = np.linalg.cholesky(Z)
        X = solve_triangular(L, Y, lower=True, check_finite=False)
        d = (X.real**2 + X.imag**2).sum(axis=0) / dim if np.iscomplexobj(X) else (X**2).sum(axis=0) / dim
        w = _u_values(d, kind_code, K, t)
        Znext = scale * ((Y * w) @ Y.conj().T)
        if rho != 0.0:
            Znext += rho * eye
        Znext = 0.5 * (Znext + Znext.conj().T)
        residual = float(np.linalg.norm(Znext - Z) / np.linalg.norm(Z))
        if residual <= tol:
            return Z, d, w, it, residual, True
        Z = Znext
    return Z, d, w, max_iter, residual, False


if _HAVE_NUMBA:

    @numba.njit(cache=True, fastmath=False)
    def _iterate_numba(Y, rho, kind_code, K, t, tol, max_iter, Z0):  # pragma: no cover - jitted
        dim, n = Y.shape
        Z = Z0.copy()
        scale = (1.0 - rho) / n
        d = np.empty(n)
        w = np.empty(n)
        residual = 1e300
        for it in range(1, max_iter + 1):
            L = np.linalg.cholesky(Z)
            # forward substitution L X = Y, column by column
            X = Y.copy()
            for j in range(n):
                for i in range(dim):
                    acc = X[i, j]
                    for k in range(i):
                        acc -= L[i, k] * X[k, j]
                    X[i, j] = acc / L[i, i]
            for j in range(n):
                s = 0.0
                for i in range(dim):
                    val = X[i, j]
                    s += val.real * val.real + val.imag * val.imag
                d[j] = s / dim
            for j in range(n):
                hyper = K * (1.0 + t) / (t + d[j])
                if kind_code == KIND_TYLER:
                    w[j] = hyper
                else:
                    w[j] = min(K, hyper)
            W = Y * w.astype(Y.dtype)
            Znext = scale * (W @ Y.conj().T)
            if rho != 0.0:
                for i in range(dim):
                    Znext[i, i] += rho
            Znext = 0.5 * (Znext + Znext.conj().T)
            num = 0.0
            den = 0.0
            for i in range(dim):
                for j in range(dim):
                    diff = Znext[i, j] - Z[i, j]
                    num += diff.real * diff.real + diff.imag * diff.imag
                    zij = Z[i, j]
                    den += zij.real * zij.real + zij.imag * zij.imag
            residual = math.sqrt(num / den)
            if residual <= tol:
                return Z, d, w, it, residual, True
            Z = Znext
        return Z, d, w, max_iter, residual, False


def fixed_point_solve(Y, rho, kind_code, K, t, tol, max_iter, Z0):
    """Run the weighted fixed-point iteration on the active lane.

    Returns (Z, quadratic_forms, weights, iterations, residual,
    converged); the quadratic forms and weights are evaluated at the
    returned Z, so ``weights == u(quadratic_forms)`` holds exactly and
    ``residual`` is the relative Frobenius equation residual at Z.
    """
    Y = np.ascontiguousarray(Y)
    Z0 = np.ascontiguousarray(Z0, dtype=Y.dtype)
    if _HAVE_NUMBA and np.iscomplexobj(Y):
        return _iterate_numba(Y, float(rho), kind_code, float(K), float(t), float(tol), int(max_iter), Z0)
    if _HAVE_NUMBA:
        # the complex lane covers real input too; promote to keep one jit signature
        Yc = Y.astype(np.complex128)
        Z, d, w, it, res, ok = _iterate_numba(
            Yc, float(rho), kind_code, float(K), float(t), float(tol), int(max_iter), Z0.astype(np.complex128)
        )
        return Z.real.copy(), d, w, it, res, ok
    return _iterate_numpy(Y, float(rho), kind_code, float(K), float(t), float(tol), int(max_iter), Z0)
