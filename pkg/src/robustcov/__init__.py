"""Regularized Maronna M-estimators of covariance matrices.

Fixed-point solvers for robust shrinkage covariance estimation, their
large-dimensional deterministic equivalents, data-driven optimal
regularization, and outlier-influence analysis (measure of influence
and its infinitesimal limit).
"""

from ._kernels import backend_name
from .asymptotics import (
    AsymptoticState,
    equivalent_clean,
    equivalent_contaminated,
    limits_eps_zero,
    solve_gamma,
    solve_gamma_alpha_noreg,
    solve_gamma_alpha_reg,
)
from .calibration import (
    CalibrationReport,
    estimate_rho_hat,
    oracle_optimum,
    quadratic_loss,
    rho_bar_to_rho,
    rho_star_estimate,
    rho_to_rho_bar,
)
from .errors import (
    AdmissibilityError,
    KinkError,
    NonConvergenceError,
    PreconditionError,
    RobustCovError,
    SingularIterateError,
)
from .estimators import EstimatorResult, SolverOptions, maronna, regularized_maronna, rscm, scm
from .robustness import (
    InfluenceReport,
    imi_noreg,
    imi_reg,
    imi_rscm,
    imi_scm,
    mi_asymptotic_noreg,
    mi_asymptotic_reg,
    mi_empirical,
    mi_rscm,
    mi_scm,
    spectral_norm,
)
from .sampling import (
    CovarianceModel,
    Dataset,
    load_dataset,
    matrix_sqrt,
    sample_clean,
    sample_contaminated,
    save_dataset,
    toeplitz_cov,
)
from .weights import RegularizedContext, WeightFunction, WeightKind

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "backend_name",
    "AsymptoticState",
    "CalibrationReport",
    "CovarianceModel",
    "Dataset",
    "EstimatorResult",
    "InfluenceReport",
    "RegularizedContext",
    "SolverOptions",
    "WeightFunction",
    "WeightKind",
    "AdmissibilityError",
    "KinkError",
    "NonConvergenceError",
    "PreconditionError",
    "RobustCovError",
    "SingularIterateError",
    "equivalent_clean",
    "equivalent_contaminated",
    "estimate_rho_hat",
    "imi_noreg",
    "imi_reg",
    "imi_rscm",
    "imi_scm",
    "limits_eps_zero",
    "load_dataset",
    "maronna",
    "matrix_sqrt",
    "mi_asymptotic_noreg",
    "mi_asymptotic_reg",
    "mi_empirical",
    "mi_rscm",
    "mi_scm",
    "oracle_optimum",
    "quadratic_loss",
    "regularized_maronna",
    "rho_bar_to_rho",
    "rho_star_estimate",
    "rho_to_rho_bar",
    "rscm",
    "sample_clean",
    "sample_contaminated",
    "save_dataset",
    "scm",
    "solve_gamma",
    "solve_gamma_alpha_noreg",
    "solve_gamma_alpha_reg",
    "spectral_norm",
    "toeplitz_cov",
]
