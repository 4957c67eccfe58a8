"""Covariance models and synthetic clean/contaminated sample generation.

Data follows the cluster contamination model: a sample matrix
Y = [y_1 .. y_{(1-eps)n} | a_1 .. a_{eps n}] whose leading block holds
legitimate samples y = C^{1/2} x and whose trailing block holds
independent outliers a = D^{1/2} x'.  Entries of x are i.i.d. zero
mean, unit variance (circular complex Gaussian by default).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz

from .errors import PreconditionError

__all__ = [
    "CovarianceModel",
    "Dataset",
    "toeplitz_cov",
    "matrix_sqrt",
    "sample_clean",
    "sample_contaminated",
    "save_dataset",
    "load_dataset",
]

_HERMITIAN_TOL = 1e-12
_EIG_CLAMP = -1e-10


class CovarianceModel:
    """Hermitian PSD matrix with a cached eigendecomposition.

    Eigenvalues are clamped to zero when they exceed -1e-10 from below;
    anything more negative is rejected.
    """

    def __init__(self, matrix, trace_normalized: bool | None = None):
        matrix = np.asarray(matrix)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {matrix.shape}")
        scale = max(1.0, float(np.abs(matrix).max()))
        if np.abs(matrix - matrix.conj().T).max() > _HERMITIAN_TOL * scale:
            raise ValueError("matrix is not Hermitian to 1e-12")
        matrix = 0.5 * (matrix + matrix.conj().T)
        if np.isrealobj(matrix):
            matrix = matrix.astype(float, copy=False)
        eigval, eigvec = np.linalg.eigh(matrix)
        if eigval.min() < _EIG_CLAMP * scale:
            raise ValueError(f"matrix is not PSD: min eigenvalue {eigval.min():.3e}")
        eigval = np.clip(eigval, 0.0, None)
        self.matrix = matrix
        self.eigenvalues = eigval
        self.eigenvectors = eigvec
        m1 = float(eigval.mean())
        if trace_normalized is None:
            trace_normalized = abs(m1 - 1.0) <= 1e-12
        elif trace_normalized and abs(m1 - 1.0) > 1e-12:
            raise ValueError(f"trace/N = {m1} but trace_normalized=True requested")
        self.trace_normalized = bool(trace_normalized)
        self._sqrt = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def m1(self) -> float:
        """First spectral moment (1/N) tr C."""
        return float(self.eigenvalues.mean())

    @property
    def m2(self) -> float:
        """Second spectral moment (1/N) tr C^2."""
        return float((self.eigenvalues**2).mean())

    def sqrt(self) -> np.ndarray:
        if self._sqrt is None:
            self._sqrt = matrix_sqrt(self)
        return self._sqrt

    def __repr__(self):
        return (
            f"CovarianceModel(dim={self.dim}, m1={self.m1:.6g}, m2={self.m2:.6g}, "
            f"trace_normalized={self.trace_normalized})"
        )


def toeplitz_cov(dim: int, b: float) -> CovarianceModel:
    """Toeplitz covariance [C]_ij = b**|i-j| with unit diagonal.

    PSD for 0 <= b < 1 and trace-normalized by construction.
    """
    if dim < 1:
        raise ValueError("dimension must be >= 1")
    if not 0.0 <= b < 1.0:
        raise ValueError(f"Toeplitz coefficient must lie in [0, 1), got {b}")
    return CovarianceModel(toeplitz(b ** np.arange(dim)), trace_normalized=True)


def matrix_sqrt(cov) -> np.ndarray:
    """Hermitian PSD square root via eigendecomposition."""
    if not isinstance(cov, CovarianceModel):
        cov = CovarianceModel(cov)
    root = (cov.eigenvectors * np.sqrt(cov.eigenvalues)) @ cov.eigenvectors.conj().T
    return 0.5 * (root + root.conj().T)


@dataclass
class Dataset:
    """An N x n sample matrix whose columns are [legitimate | outliers]."""

    samples: np.ndarray
    n_legit: int
    n_outlier: int
    seed: int | None = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples)
        if self.samples.ndim != 2:
            raise ValueError("samples must be an N x n matrix")
        if self.n_legit + self.n_outlier != self.samples.shape[1]:
            raise ValueError("n_legit + n_outlier must equal the number of columns")

    @property
    def dim(self) -> int:
        return self.samples.shape[0]

    @property
    def n(self) -> int:
        return self.samples.shape[1]

    @property
    def aspect_ratio(self) -> float:
        """c_N = N / n."""
        return self.dim / self.n

    @property
    def legit(self) -> np.ndarray:
        return self.samples[:, : self.n_legit]

    @property
    def outliers(self) -> np.ndarray:
        return self.samples[:, self.n_legit :]


def _draw(rng, n_cols: int, dim: int, complex_data: bool) -> np.ndarray:
    # rows are samples so that a shorter draw is a prefix of a longer one
    if complex_data:
        block = rng.standard_normal((n_cols, 2 * dim))
        x = (block[:, :dim] + 1j * block[:, dim:]) / math.sqrt(2.0)
    else:
        x = rng.standard_normal((n_cols, dim))
    return x.T


def sample_contaminated(
    cov_legit: CovarianceModel,
    cov_outlier: CovarianceModel | None,
    n: int,
    eps: float,
    seed: int,
    complex_data: bool = True,
) -> Dataset:
    """Draw n samples with an eps fraction of outliers.

    The number of outliers is floor(eps * n).  The legitimate and
    outlier RNG streams are split from the seed independently, so
    changing eps leaves the shared legitimate prefix bit-identical
    (common random numbers across contamination levels).
    """
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"eps must lie in [0, 1), got {eps}")
    if n < 1:
        raise ValueError("n must be >= 1")
    n_outlier = int(math.floor(eps * n))
    n_legit = n - n_outlier
    if n_outlier > 0 and cov_outlier is None:
        raise ValueError("cov_outlier is required when eps * n >= 1")
    if cov_outlier is not None and cov_outlier.dim != cov_legit.dim:
        raise PreconditionError(
            f"dimension mismatch: legit {cov_legit.dim} vs outlier {cov_outlier.dim}"
        )
    ss_legit, ss_out = np.random.SeedSequence(seed).spawn(2)
    y = cov_legit.sqrt() @ _draw(np.random.default_rng(ss_legit), n_legit, cov_legit.dim, complex_data)
    if n_outlier:
        a = cov_outlier.sqrt() @ _draw(
            np.random.default_rng(ss_out), n_outlier, cov_outlier.dim, complex_data
        )
        samples = np.concatenate([y, a], axis=1)
    else:
        samples = y
    return Dataset(samples, n_legit, n_outlier, seed)


def sample_clean(cov: CovarianceModel, n: int, seed: int, complex_data: bool = True) -> Dataset:
    """Draw n outlier-free samples from the legitimate model."""
    return sample_contaminated(cov, None, n, 0.0, seed, complex_data)


def _format_entry(z) -> str:
    if np.iscomplexobj(z):
        re, im = float(z.real), float(z.imag)
        sign = "+" if im >= 0 or math.isnan(im) else "-"
        return f"{re:.17g}{sign}{abs(im):.17g}i"
    return f"{float(z):.17g}"


def _parse_entry(text: str):
    text = text.strip()
    if text.endswith("i") or text.endswith("j") or "i" in text:
        return complex(text.replace("i", "j"))
    return float(text)


def save_dataset(dataset: Dataset, path) -> None:
    """Write a dataset as CSV: header row N,n,n_outlier,seed then the matrix.

    Complex entries are rendered as ``a+bi`` with 17 significant digits,
    which round-trips float64 exactly.
    """
    seed = -1 if dataset.seed is None else dataset.seed
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{dataset.dim},{dataset.n},{dataset.n_outlier},{seed}\n")
        for row in dataset.samples:
            fh.write(",".join(_format_entry(z) for z in row) + "\n")


def load_dataset(path) -> Dataset:
    """Read back a dataset written by :func:`save_dataset`."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if len(header) != 4:
            raise ValueError(f"bad dataset header: expected N,n,n_outlier,seed, got {header}")
        dim, n, n_outlier, seed = (int(v) for v in header)
        rows = []
        for line in fh:
            line = line.strip()
            if line:
                rows.append([_parse_entry(tok) for tok in line.split(",")])
    samples = np.asarray(rows)
    if samples.shape != (dim, n):
        raise ValueError(f"matrix shape {samples.shape} does not match header ({dim}, {n})")
    return Dataset(samples, n - n_outlier, n_outlier, None if seed < 0 else seed)
