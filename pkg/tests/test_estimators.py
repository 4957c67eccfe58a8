import json
import os
import subprocess
import sys

import numpy as np
import pytest

from robustcov import (
    AdmissibilityError,
    NonConvergenceError,
    PreconditionError,
    SolverOptions,
    WeightFunction,
    maronna,
    regularized_maronna,
    rscm,
    sample_clean,
    scm,
    toeplitz_cov,
)

TYLER = WeightFunction.tyler(K=1.0, t=0.1)


def rhs(Y, weight, rho, Z):
    """Direct fixed-point right-hand side, written independently of the solver."""
    dim, n = Y.shape
    d = np.einsum("ij,ji->i", Y.conj().T @ np.linalg.inv(Z), Y).real / dim
    W = (1.0 - rho) / n * ((Y * weight.u(d)) @ Y.conj().T)
    return W + rho * np.eye(dim)


class TestScmRscm:
    def test_single_column(self):
        y = np.array([[1.0 + 1j], [2.0 - 1j]])
        S = scm(y)
        np.testing.assert_allclose(S, y @ y.conj().T, atol=1e-15)
        assert np.linalg.matrix_rank(S) == 1

    def test_orthogonal_columns_diagonal(self):
        n = 3
        Y = np.sqrt(n) * np.eye(3)
        np.testing.assert_allclose(scm(Y), np.eye(3), atol=1e-15)

    def test_hermitian_psd(self):
        ds = sample_clean(toeplitz_cov(10, 0.5), 40, seed=0)
        S = scm(ds)
        assert np.abs(S - S.conj().T).max() < 1e-14
        assert np.linalg.eigvalsh(S).min() > -1e-12

    def test_rscm_endpoints(self):
        ds = sample_clean(toeplitz_cov(5, 0.5), 20, seed=1)
        np.testing.assert_array_equal(rscm(ds, 1.0), np.eye(5))
        np.testing.assert_allclose(rscm(ds, 0.0), scm(ds), atol=1e-15)
        Y = np.sqrt(3) * np.eye(3)
        np.testing.assert_allclose(rscm(Y, 0.5), 0.5 * np.eye(3) + 0.5 * np.eye(3), atol=1e-15)
        with pytest.raises(ValueError):
            rscm(ds, 1.5)

    def test_empty_dataset(self):
        with pytest.raises(ValueError):
            scm(np.zeros((4, 0)))


class TestMaronna:
    def test_self_consistency_of_weights(self):
        ds = sample_clean(toeplitz_cov(20, 0.5), 100, seed=2)
        res = maronna(ds, TYLER)
        np.testing.assert_array_equal(res.weights, np.asarray(TYLER.u(res.quadratic_forms)))

    def test_equation_residual(self):
        ds = sample_clean(toeplitz_cov(20, 0.5), 100, seed=3)
        res = maronna(ds, TYLER)
        R = rhs(ds.samples, TYLER, 0.0, res.estimate)
        assert np.linalg.norm(R - res.estimate) / np.linalg.norm(res.estimate) <= 1.1e-9

    def test_close_to_scm_for_unit_phi_inv(self):
        # phi_inv(1) = 1 for K = 1, so the fixed point tracks the SCM once
        # the quadratic forms concentrate (observed gap ~0.08 at N = 16)
        ds = sample_clean(toeplitz_cov(16, 0.0), 200, seed=4)
        res = maronna(ds, TYLER, SolverOptions(max_iterations=500))
        S = scm(ds)
        assert np.linalg.norm(res.estimate - S) / np.linalg.norm(S) < 0.2

    def test_restart_idempotence(self):
        ds = sample_clean(toeplitz_cov(15, 0.4), 80, seed=5)
        res = maronna(ds, TYLER)
        again = maronna(ds, TYLER, initial=res.estimate)
        assert again.iterations <= 2

    def test_preconditions(self):
        ds = sample_clean(toeplitz_cov(20, 0.5), 10, seed=6)  # c = 2
        with pytest.raises(PreconditionError):
            maronna(ds, TYLER)
        ds2 = sample_clean(toeplitz_cov(10, 0.5), 40, seed=7)
        with pytest.raises(PreconditionError):
            maronna(ds2, WeightFunction.tyler(K=0.5, t=0.1))  # phi_inf < 1

    def test_nonconvergence_carries_partial_result(self):
        ds = sample_clean(toeplitz_cov(20, 0.5), 100, seed=8)
        with pytest.raises(NonConvergenceError) as excinfo:
            maronna(ds, TYLER, SolverOptions(max_iterations=3))
        partial = excinfo.value.result
        assert partial is not None and partial.iterations == 3 and not partial.converged

    def test_theorem_shadow_decreases_with_dimension(self):
        # ||fixed point - SCM/phi_inv(1)|| / ||SCM|| shrinks as N grows at c = 1/2
        medians = []
        for N in (40, 80, 160):
            gaps = []
            for s in range(5):
                ds = sample_clean(toeplitz_cov(N, 0.9), 2 * N, seed=1000 + s)
                est = maronna(ds, TYLER, SolverOptions(max_iterations=500)).estimate
                S = scm(ds)
                gaps.append(np.linalg.norm(est - S, 2) / np.linalg.norm(S, 2))
            medians.append(np.median(gaps))
        assert medians[0] > medians[1] > medians[2]


class TestRegularizedMaronna:
    def test_rho_one_identity_single_iteration(self):
        ds = sample_clean(toeplitz_cov(30, 0.9), 20, seed=9)
        res = regularized_maronna(ds, TYLER, 1.0)
        assert res.iterations == 1
        np.testing.assert_array_equal(res.estimate, np.eye(30).astype(res.estimate.dtype))

    def test_small_rho_approaches_plain_solution(self):
        ds = sample_clean(toeplitz_cov(20, 0.5), 200, seed=10)
        plain = maronna(ds, TYLER, SolverOptions(max_iterations=1000))
        reg = regularized_maronna(ds, TYLER, 1e-3, SolverOptions(max_iterations=1000))
        gap = np.linalg.norm(reg.estimate - plain.estimate) / np.linalg.norm(plain.estimate)
        assert gap < 1e-2

    def test_fig1_setup_residual(self):
        w = WeightFunction.tyler(K=1.0 / 1.5, t=0.1)
        ds = sample_clean(toeplitz_cov(150, 0.9), 100, seed=11)
        res = regularized_maronna(ds, w, 0.5)
        assert res.converged and res.residual <= 1e-9
        R = rhs(ds.samples, w, 0.5, res.estimate)
        assert np.linalg.norm(R - res.estimate) / np.linalg.norm(res.estimate) <= 1.1e-9

    def test_eigenvalue_floor(self):
        w = WeightFunction.huber(K=1.0 / 1.5, t=0.1)
        ds = sample_clean(toeplitz_cov(40, 0.9), 27, seed=12)
        for rho in (0.2, 0.6):
            res = regularized_maronna(ds, w, rho)
            assert np.linalg.eigvalsh(res.estimate).min() >= rho - 1e-9

    def test_hermitian_iterates(self):
        ds = sample_clean(toeplitz_cov(25, 0.8), 30, seed=13)
        res = regularized_maronna(ds, TYLER, 0.4)
        Z = res.estimate
        assert np.abs(Z - Z.conj().T).max() < 1e-12

    def test_unitary_equivariance(self):
        ds = sample_clean(toeplitz_cov(12, 0.6), 30, seed=14)
        rng = np.random.default_rng(15)
        A = rng.standard_normal((12, 12)) + 1j * rng.standard_normal((12, 12))
        Q, _ = np.linalg.qr(A)
        base = regularized_maronna(ds.samples, TYLER, 0.3).estimate
        rotated = regularized_maronna(Q @ ds.samples, TYLER, 0.3).estimate
        assert np.linalg.norm(rotated - Q @ base @ Q.conj().T) / np.linalg.norm(base) < 1e-7

    def test_admissibility_errors(self):
        ds = sample_clean(toeplitz_cov(30, 0.5), 20, seed=16)  # c = 1.5
        with pytest.raises(AdmissibilityError):
            regularized_maronna(ds, TYLER, 0.05)
        with pytest.raises(AdmissibilityError):
            regularized_maronna(ds, TYLER, 0.0)

    def test_scm_initializer(self):
        ds = sample_clean(toeplitz_cov(30, 0.9), 20, seed=17)
        a = regularized_maronna(ds, TYLER, 0.5)
        b = regularized_maronna(ds, TYLER, 0.5, SolverOptions(initializer="scm"))
        assert np.linalg.norm(a.estimate - b.estimate) / np.linalg.norm(a.estimate) < 1e-7


class TestBackendLanes:
    def test_numpy_lane_matches_active_lane(self, tmp_path):
        # solve the same problem in a pure-numpy subprocess and compare
        ds = sample_clean(toeplitz_cov(25, 0.8), 60, seed=18)
        res = regularized_maronna(ds, TYLER, 0.4)
        data_path = tmp_path / "Y.npy"
        out_path = tmp_path / "Z.npy"
        np.save(data_path, ds.samples)
        script = (
            "import numpy as np, robustcov as rc\n"
            f"Y = np.load({str(data_path)!r})\n"
            "r = rc.regularized_maronna(Y, rc.WeightFunction.tyler(1.0, 0.1), 0.4)\n"
            f"np.save({str(out_path)!r}, r.estimate)\n"
            "print(rc.backend_name())\n"
        )
        env = dict(os.environ, ROBUSTCOV_BACKEND="numpy")
        proc = subprocess.run([sys.executable, "-c", script], env=env, capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        assert proc.stdout.strip() == "numpy"
        other = np.load(out_path)
        assert np.linalg.norm(other - res.estimate) / np.linalg.norm(res.estimate) < 1e-8

    def test_real_input_supported(self):
        ds = sample_clean(toeplitz_cov(10, 0.5), 50, seed=19, complex_data=False)
        res = regularized_maronna(ds, TYLER, 0.5)
        assert not np.iscomplexobj(res.estimate) or np.abs(res.estimate.imag).max() < 1e-14
        assert res.converged
