import numpy as np
import pytest

from robustcov import (
    CovarianceModel,
    Dataset,
    load_dataset,
    matrix_sqrt,
    sample_clean,
    sample_contaminated,
    save_dataset,
    scm,
    toeplitz_cov,
)


class TestCovarianceModel:
    def test_toeplitz_identity(self):
        C = toeplitz_cov(3, 0.0)
        np.testing.assert_array_equal(C.matrix, np.eye(3))
        assert C.trace_normalized

    def test_toeplitz_2x2_eigenvalues(self):
        C = toeplitz_cov(2, 0.9)
        np.testing.assert_allclose(C.matrix, [[1.0, 0.9], [0.9, 1.0]])
        np.testing.assert_allclose(C.eigenvalues, [0.1, 1.9], rtol=1e-12)

    def test_toeplitz_m2_matches_trace(self):
        C = toeplitz_cov(150, 0.9)
        direct = np.trace(C.matrix @ C.matrix) / 150
        assert C.m2 == pytest.approx(direct, rel=1e-12)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            toeplitz_cov(0, 0.5)
        with pytest.raises(ValueError):
            toeplitz_cov(4, 1.0)
        with pytest.raises(ValueError):
            CovarianceModel(np.array([[1.0, 0.5], [0.2, 1.0]]))  # not Hermitian
        with pytest.raises(ValueError):
            CovarianceModel(np.array([[1.0, 0.0], [0.0, -0.5]]))  # not PSD

    def test_trace_normalized_flag(self):
        with pytest.raises(ValueError):
            CovarianceModel(2.0 * np.eye(3), trace_normalized=True)
        assert not CovarianceModel(2.0 * np.eye(3)).trace_normalized


class TestMatrixSqrt:
    def test_identity_and_diagonal(self):
        np.testing.assert_allclose(matrix_sqrt(np.eye(4)), np.eye(4), atol=1e-14)
        np.testing.assert_allclose(
            matrix_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14
        )

    def test_multiply_back(self):
        rng = np.random.default_rng(3)
        A = rng.standard_normal((20, 20)) + 1j * rng.standard_normal((20, 20))
        C = A @ A.conj().T / 20
        root = matrix_sqrt(C)
        assert np.linalg.norm(root @ root - C) / np.linalg.norm(C) < 1e-10


class TestSampling:
    def test_eps_zero_no_outliers(self):
        C = toeplitz_cov(10, 0.5)
        ds = sample_contaminated(C, toeplitz_cov(10, 0.2), 40, 0.0, seed=1)
        assert ds.n_outlier == 0 and ds.n_legit == 40

    def test_outlier_count_is_floor(self):
        C = toeplitz_cov(8, 0.5)
        D = toeplitz_cov(8, 0.1)
        assert sample_contaminated(C, D, 30, 0.1, seed=1).n_outlier == 3
        assert sample_contaminated(C, D, 33, 0.1, seed=1).n_outlier == 3
        assert sample_contaminated(C, D, 39, 0.1, seed=1).n_outlier == 3

    def test_dimension_mismatch(self):
        from robustcov import PreconditionError

        with pytest.raises(PreconditionError):
            sample_contaminated(toeplitz_cov(8, 0.5), toeplitz_cov(9, 0.5), 30, 0.1, seed=1)

    def test_seed_reproducibility(self):
        C = toeplitz_cov(12, 0.7)
        D = toeplitz_cov(12, 0.2)
        a = sample_contaminated(C, D, 50, 0.1, seed=99)
        b = sample_contaminated(C, D, 50, 0.1, seed=99)
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_legit_prefix_shared_across_eps(self):
        # common random numbers: raising eps must not reshuffle the shared
        # legitimate prefix
        C = toeplitz_cov(12, 0.7)
        D = toeplitz_cov(12, 0.2)
        clean = sample_contaminated(C, D, 50, 0.0, seed=7)
        dirty = sample_contaminated(C, D, 50, 0.2, seed=7)
        np.testing.assert_array_equal(clean.samples[:, : dirty.n_legit], dirty.legit)

    def test_per_column_moment_concentration(self):
        # (1/N)||y||^2 concentrates near 1; frozen bound from this seed
        # (0.414 observed for the identity model at N=50, n=200)
        C = toeplitz_cov(50, 0.0)
        ds = sample_contaminated(C, C, 200, 0.1, seed=20240901)
        moments = (np.abs(ds.samples) ** 2).sum(axis=0) / 50
        assert np.abs(moments - 1.0).max() < 0.5
        assert abs(moments.mean() - 1.0) < 0.05

    def test_empirical_covariance_concentration(self):
        # relative Frobenius error of the SCM vs identity, averaged over
        # 10 seeds, within the loose 3*sqrt(N/n)*sqrt(2/N) envelope
        N, n = 16, 64
        C = toeplitz_cov(N, 0.0)
        errors = []
        for s in range(10):
            S = scm(sample_clean(C, n, seed=100 + s))
            errors.append(np.linalg.norm(S - np.eye(N)) / np.linalg.norm(np.eye(N)))
        assert np.mean(errors) < 3.0 * np.sqrt(N / n) * np.sqrt(2.0 / N)

    def test_real_mode(self):
        C = toeplitz_cov(6, 0.3)
        ds = sample_clean(C, 20, seed=4, complex_data=False)
        assert not np.iscomplexobj(ds.samples)

    def test_dataset_validation(self):
        with pytest.raises(ValueError):
            Dataset(np.zeros((3, 5)), n_legit=3, n_outlier=1, seed=0)


class TestDatasetIO:
    def test_round_trip_bit_exact(self, tmp_path):
        C = toeplitz_cov(7, 0.6)
        D = toeplitz_cov(7, 0.1)
        ds = sample_contaminated(C, D, 20, 0.15, seed=5)
        path = tmp_path / "dump.csv"
        save_dataset(ds, path)
        back = load_dataset(path)
        np.testing.assert_array_equal(back.samples, ds.samples)
        assert (back.n_legit, back.n_outlier, back.seed) == (ds.n_legit, ds.n_outlier, 5)

    def test_round_trip_real(self, tmp_path):
        ds = sample_clean(toeplitz_cov(4, 0.2), 9, seed=6, complex_data=False)
        path = tmp_path / "dump_real.csv"
        save_dataset(ds, path)
        np.testing.assert_array_equal(load_dataset(path).samples, ds.samples)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1,2\n0.0,0.0\n")
        with pytest.raises(ValueError):
            load_dataset(path)
