"""Declarative experiment harness behind the CLI.

Experiments are described by a TOML file (key-value with nested
tables); unknown keys are rejected so config typos fail loudly.  Each
runner emits RFC-4180 CSV with 17-significant-digit decimals, a status
column per row (ok / out_of_regime / non_converged), and a companion
gnuplot script.  Identical config + seed reproduces the CSV byte for
byte, apart from an optional timestamped comment line.
"""

from __future__ import annotations

import csv
import datetime
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .asymptotics import solve_gamma
from .calibration import (
    estimate_rho_hat,
    oracle_optimum,
    quadratic_loss,
    rho_bar_to_rho,
    rho_star_estimate,
)
from .errors import (
    AdmissibilityError,
    NonConvergenceError,
    PreconditionError,
    RobustCovError,
    SingularIterateError,
)
from .estimators import SolverOptions, regularized_maronna, rscm, scm
from .matrixio import read_matrix, write_matrix
from .robustness import (
    imi_noreg,
    imi_reg,
    imi_rscm,
    imi_scm,
    mi_asymptotic_noreg,
    mi_asymptotic_reg,
    mi_empirical,
    mi_rscm,
    mi_scm,
)
from .sampling import CovarianceModel, sample_clean, toeplitz_cov
from .weights import RegularizedContext, WeightFunction

__all__ = [
    "ConfigError",
    "EstimatorSpec",
    "ExperimentConfig",
    "load_config",
    "run_loss_curve",
    "run_mi_curve",
    "run_imi_vs_aspect",
    "run_imi_vs_rho",
    "run_estimate",
    "run_calibrate",
]

EXPERIMENTS = ("loss-curve", "mi-curve", "imi-aspect", "imi-rho", "estimate", "calibrate")

_TOP_KEYS = {
    "experiment",
    "N",
    "n",
    "trials",
    "seed",
    "output",
    "cov_legit",
    "cov_outlier",
    "rho",
    "rho_grid",
    "eps_grid",
    "c_grid",
    "workers",
    "complex_data",
    "solver",
    "estimators",
}
_SOLVER_KEYS = {"tolerance", "max_iterations", "initializer"}
_ESTIMATOR_KEYS = {"kind", "K", "t"}
_KINDS = ("scm", "rscm", "m-tyler", "m-huber")


class ConfigError(RobustCovError):
    """Invalid experiment configuration (named key in the message)."""


@dataclass(frozen=True)
class EstimatorSpec:
    """One estimator requested by a config: kind plus family parameters.

    K may be a number or one of the strings "1/c" and "min(1,1/c)",
    resolved against the aspect ratio at run time.
    """

    kind: str
    K: float | str = 1.0
    t: float = 0.1

    def resolve(self, c: float) -> WeightFunction:
        if self.kind not in ("m-tyler", "m-huber"):
            raise ConfigError(f"estimator {self.kind!r} has no weight function")
        if self.K == "1/c":
            K = 1.0 / c
        elif self.K == "min(1,1/c)":
            K = min(1.0, 1.0 / c)
        else:
            K = float(self.K)
        factory = WeightFunction.tyler if self.kind == "m-tyler" else WeightFunction.huber
        return factory(K=K, t=self.t)


@dataclass
class ExperimentConfig:
    experiment: str
    N: int
    n: int
    trials: int
    seed: int
    output: str
    estimators: tuple[EstimatorSpec, ...]
    cov_legit: float | str = 0.9
    cov_outlier: float | str | None = None
    rho: float | str | None = None
    rho_grid: tuple[float, ...] = ()
    eps_grid: tuple[float, ...] = ()
    c_grid: tuple[float, ...] = ()
    workers: int = 1
    complex_data: bool = True
    solver: SolverOptions = field(default_factory=SolverOptions)

    @property
    def c_n(self) -> float:
        return self.N / self.n


def _check_grid(name: str, grid, low: float, high: float, allow_low_edge: bool):
    grid = tuple(float(v) for v in grid)
    if not grid:
        raise ConfigError(f"{name} must not be empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError(f"{name} must be strictly increasing")
    lo_ok = grid[0] >= low if allow_low_edge else grid[0] > low
    if not (lo_ok and grid[-1] <= high):
        raise ConfigError(f"{name} entries must lie in {'[' if allow_low_edge else '('}{low}, {high}]")
    return grid


_DEFAULT_GRIDS = {
    "rho_grid": tuple(np.round(np.linspace(0.1, 1.0, 10), 10)),
    "eps_grid": tuple(np.round(np.linspace(0.0, 0.15, 16), 10)),
    "c_grid": (0.05, 0.1, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0),
}

_DEFAULT_ESTIMATORS = {
    "loss-curve": (
        EstimatorSpec("m-tyler", "1/c", 0.1),
        EstimatorSpec("m-huber", "1/c", 0.1),
        EstimatorSpec("rscm"),
    ),
    "mi-curve": (
        EstimatorSpec("m-tyler", 1.0, 0.1),
        EstimatorSpec("m-huber", 1.0, 0.1),
        EstimatorSpec("scm"),
    ),
    "imi-aspect": (
        EstimatorSpec("m-tyler", "min(1,1/c)", 0.1),
        EstimatorSpec("m-huber", "min(1,1/c)", 0.1),
        EstimatorSpec("rscm"),
    ),
    "imi-rho": (
        EstimatorSpec("m-tyler", "1/c", 0.1),
        EstimatorSpec("m-huber", "1/c", 0.1),
        EstimatorSpec("rscm"),
    ),
}

_DEFAULT_SIZES = {
    "loss-curve": (150, 100, 100),
    "mi-curve": (50, 200, 0),
    "imi-aspect": (150, 100, 0),
    "imi-rho": (150, 100, 0),
    "estimate": (0, 0, 0),
    "calibrate": (0, 0, 0),
}


def load_config(path=None, raw: dict | None = None) -> ExperimentConfig:
    """Parse and validate a TOML experiment description."""
    if raw is None:
        with open(path, "rb") as fh:
            try:
                raw = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"config parse error: {exc}") from exc
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    experiment = raw.get("experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {experiment!r}")
    n_default, n_samples_default, trials_default = _DEFAULT_SIZES[experiment]
    N = int(raw.get("N", n_default))
    n = int(raw.get("n", n_samples_default))
    if experiment not in ("estimate", "calibrate") and (N < 1 or n < 1):
        raise ConfigError("N and n must be positive")
    trials = int(raw.get("trials", trials_default))
    if trials < 0:
        raise ConfigError("trials must be >= 0")
    seed = int(raw.get("seed", 20240901))
    output = str(raw.get("output", experiment.replace("-", "_")))

    solver_raw = raw.get("solver", {})
    unknown = set(solver_raw) - _SOLVER_KEYS
    if unknown:
        raise ConfigError(f"unknown solver keys: {sorted(unknown)}")
    solver = SolverOptions(
        tolerance=float(solver_raw.get("tolerance", 1e-9)),
        max_iterations=int(solver_raw.get("max_iterations", 200)),
        initializer=str(solver_raw.get("initializer", "identity")),
    )

    est_raw = raw.get("estimators")
    if est_raw is None:
        if experiment in _DEFAULT_ESTIMATORS:
            estimators = _DEFAULT_ESTIMATORS[experiment]
        else:
            raise ConfigError(f"{experiment} requires an estimators entry")
    else:
        if not est_raw:
            raise ConfigError("estimators must not be empty")
        estimators = []
        for index, entry in enumerate(est_raw):
            unknown = set(entry) - _ESTIMATOR_KEYS
            if unknown:
                raise ConfigError(f"estimators[{index}]: unknown keys {sorted(unknown)}")
            kind = entry.get("kind")
            if kind not in _KINDS:
                raise ConfigError(f"estimators[{index}]: kind must be one of {_KINDS}")
            K = entry.get("K", 1.0)
            if isinstance(K, str) and K not in ("1/c", "min(1,1/c)"):
                raise ConfigError(f"estimators[{index}]: K must be a number, '1/c' or 'min(1,1/c)'")
            estimators.append(EstimatorSpec(kind, K, float(entry.get("t", 0.1))))
        estimators = tuple(estimators)
    labels = [e.kind for e in estimators]
    if len(set(labels)) != len(labels):
        raise ConfigError("estimator kinds must be unique within one config")

    rho = raw.get("rho")
    if rho is not None and not (rho == "auto" or rho == "star" or isinstance(rho, (int, float))):
        raise ConfigError("rho must be a number, 'auto' or 'star'")

    cfg = ExperimentConfig(
        experiment=experiment,
        N=N,
        n=n,
        trials=trials,
        seed=seed,
        output=output,
        estimators=estimators,
        cov_legit=raw.get("cov_legit", 0.9),
        cov_outlier=raw.get("cov_outlier", 0.2 if experiment != "loss-curve" else None),
        rho=rho,
        rho_grid=_check_grid("rho_grid", raw.get("rho_grid", _DEFAULT_GRIDS["rho_grid"]), 0.0, 1.0, False)
        if experiment in ("loss-curve", "imi-rho")
        else tuple(raw.get("rho_grid", ())),
        eps_grid=_check_grid("eps_grid", raw.get("eps_grid", _DEFAULT_GRIDS["eps_grid"]), 0.0, 0.999, True)
        if experiment == "mi-curve"
        else tuple(raw.get("eps_grid", ())),
        c_grid=_check_grid("c_grid", raw.get("c_grid", _DEFAULT_GRIDS["c_grid"]), 0.0, 100.0, False)
        if experiment == "imi-aspect"
        else tuple(raw.get("c_grid", ())),
        workers=int(raw.get("workers", 1)),
        complex_data=bool(raw.get("complex_data", True)),
        solver=solver,
    )
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    return cfg


def _load_cov(spec, dim: int) -> CovarianceModel:
    if isinstance(spec, str):
        return CovarianceModel(read_matrix(spec))
    return toeplitz_cov(dim, float(spec))


def _fmt(value) -> str:
    if value is None or value == "":
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def _write_csv(path, header, rows, timestamp: bool) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if timestamp:
            fh.write(f"# generated {datetime.datetime.now().isoformat()}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_gnuplot(prefix: str, csv_name: str, title: str, xlabel: str, ylabel: str, series) -> str:
    """Emit a standalone gnuplot script selecting rows per estimator label."""
    lines = [
        f'# gnuplot script for {csv_name}',
        'set datafile separator ","',
        'set key top right',
        f'set title "{title}"',
        f'set xlabel "{xlabel}"',
        f'set ylabel "{ylabel}"',
        "plot \\",
    ]
    plots = []
    for label, xcol, ycol, filter_col, filter_val in series:
        cond = f"(strcol({filter_col}) eq '{filter_val}' ? column({xcol}) : 1/0)"
        plots.append(
            f"  '{csv_name}' using {cond}:(column({ycol})) with linespoints title '{label}'"
        )
    lines.append(", \\\n".join(plots))
    path = f"{prefix}.gp"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def _parallel_map(fn, items, workers: int):
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _mean_stderr(values) -> tuple[float | None, float | None]:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return None, None
    mean = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else None
    return mean, stderr


def run_loss_curve(cfg: ExperimentConfig, quick: bool = False, timestamp: bool = True) -> str:
    """Expected quadratic loss over a rho grid, with rho_hat arrows and L*.

    Columns: kind, rho, estimator, mean_loss, stderr, loss_of_equivalent,
    status.  kind is curve / rho_hat / l_star.
    """
    trials = max(1, cfg.trials // 10) if quick else cfg.trials
    cov = _load_cov(cfg.cov_legit, cfg.N)
    c_n = cfg.c_n
    oracle = oracle_optimum(c_n, cov)
    grid = cfg.rho_grid
    families = [spec for spec in cfg.estimators if spec.kind in ("m-tyler", "m-huber")]
    has_rscm = any(spec.kind == "rscm" for spec in cfg.estimators)

    v_of_rho = {}
    for spec in families:
        weight = spec.resolve(c_n)
        for rho in grid:
            try:
                ctx = RegularizedContext(weight, rho, c_n)
                v_of_rho[(spec.kind, rho)] = solve_gamma(ctx, cov).v_gamma
            except (AdmissibilityError, PreconditionError):
                v_of_rho[(spec.kind, rho)] = None

    seeds = np.random.SeedSequence(cfg.seed).generate_state(trials)

    def one_trial(trial_seed):
        data = sample_clean(cov, cfg.n, int(trial_seed), cfg.complex_data)
        sample_cov = scm(data)
        eye = np.eye(cfg.N, dtype=sample_cov.dtype)
        out = {}
        for spec in families:
            weight = spec.resolve(c_n)
            warm = None
            for rho in reversed(grid):
                if v_of_rho[(spec.kind, rho)] is None:
                    out[(spec.kind, rho)] = (None, None, "out_of_regime")
                    continue
                try:
                    result = regularized_maronna(data, weight, rho, cfg.solver, initial=warm)
                except (NonConvergenceError, SingularIterateError):
                    out[(spec.kind, rho)] = (None, None, "non_converged")
                    warm = None
                    continue
                warm = result.estimate
                equivalent = (1.0 - rho) * v_of_rho[(spec.kind, rho)] * sample_cov + rho * eye
                out[(spec.kind, rho)] = (
                    quadratic_loss(result.estimate, cov),
                    quadratic_loss(equivalent, cov),
                    "ok",
                )
            try:
                report = estimate_rho_hat(data, weight, cfg.solver)
                loss_at_hat = quadratic_loss(
                    regularized_maronna(data, weight, report.rho_hat, cfg.solver).estimate, cov
                )
                out[(spec.kind, "rho_hat")] = (report.rho_hat, loss_at_hat, "ok")
            except (NonConvergenceError, SingularIterateError, RobustCovError):
                out[(spec.kind, "rho_hat")] = (None, None, "non_converged")
        if has_rscm:
            for rho in grid:
                out[("rscm", rho)] = (quadratic_loss(rscm(data, rho), cov), None, "ok")
            beta_hat = min(1.0, rho_star_estimate(data))
            out[("rscm", "rho_hat")] = (beta_hat, quadratic_loss(rscm(data, beta_hat), cov), "ok")
        return out

    per_trial = _parallel_map(one_trial, list(seeds), cfg.workers)

    rows = []
    labels = [spec.kind for spec in cfg.estimators if spec.kind != "scm"]
    for label in labels:
        for rho in grid:
            entries = [trial[(label, rho)] for trial in per_trial if (label, rho) in trial]
            losses = [e[0] for e in entries if e[0] is not None]
            equiv = [e[1] for e in entries if e[1] is not None]
            failed = sum(1 for e in entries if e[2] != "ok")
            status = entries[0][2] if losses == [] else ("non_converged" if failed else "ok")
            mean_loss, stderr = _mean_stderr(losses)
            mean_equiv, _ = _mean_stderr(equiv) if equiv else (None, None)
            rows.append(["curve", rho, label, mean_loss, stderr, mean_equiv, status])
        hats = [trial[(label, "rho_hat")] for trial in per_trial if (label, "rho_hat") in trial]
        hat_vals = [h[0] for h in hats if h[0] is not None]
        hat_losses = [h[1] for h in hats if h[1] is not None]
        mean_hat, _ = _mean_stderr(hat_vals)
        mean_hat_loss, hat_stderr = _mean_stderr(hat_losses)
        status = "ok" if hat_vals else "non_converged"
        rows.append(["rho_hat", mean_hat, label, mean_hat_loss, hat_stderr, None, status])
    rows.append(["l_star", oracle.rho_star, "oracle", oracle.L_star, None, None, "ok"])
    rows.sort(key=lambda r: (r[0], str(r[2]), r[1] if isinstance(r[1], float) else -1.0))

    csv_path = f"{cfg.output}_loss_curve.csv"
    _write_csv(
        csv_path,
        ["kind", "rho", "estimator", "mean_loss", "stderr", "loss_of_equivalent", "status"],
        rows,
        timestamp,
    )
    _write_gnuplot(
        f"{cfg.output}_loss_curve",
        csv_path,
        "Expected quadratic loss vs shrinkage",
        "rho",
        "loss",
        [(label, 2, 4, 3, label) for label in labels],
    )
    return csv_path


def _imi_for(spec, weight, ctx, cov, cov_out, rho):
    if spec.kind == "scm":
        return imi_scm(cov, cov_out)
    if spec.kind == "rscm":
        return imi_rscm(rho, cov, cov_out)
    if rho == 0.0:
        return imi_noreg(weight, ctx.c, cov, cov_out)
    return imi_reg(ctx, cov, cov_out)


def run_mi_curve(cfg: ExperimentConfig, quick: bool = False, timestamp: bool = True) -> str:
    """Measure of influence over an eps grid (asymptotic, empirical, linear).

    rho = 0 runs the non-regularized estimators; rho = 'star' evaluates
    each estimator at its own clean-data-optimal shrinkage; a number
    fixes the same rho for every estimator.
    """
    trials = max(1, cfg.trials // 10) if quick and cfg.trials else cfg.trials
    cov = _load_cov(cfg.cov_legit, cfg.N)
    cov_out = _load_cov(cfg.cov_outlier, cfg.N)
    c_n = cfg.c_n
    rho_mode = 0.0 if cfg.rho is None else cfg.rho
    oracle = oracle_optimum(c_n, cov) if rho_mode == "star" else None

    def rho_for(spec, weight):
        if rho_mode == "star":
            if spec.kind in ("scm", "rscm"):
                return oracle.rho_star if spec.kind == "rscm" else 0.0
            return rho_bar_to_rho(weight, oracle.rho_star, c_n, cov)
        return float(rho_mode)

    def one_point(args):
        spec, eps = args
        weight = spec.resolve(c_n) if spec.kind in ("m-tyler", "m-huber") else None
        try:
            rho = rho_for(spec, weight)
            if spec.kind == "scm":
                asym = mi_scm(eps, cov, cov_out)
                imi = imi_scm(cov, cov_out)
                ctx = None
            elif spec.kind == "rscm":
                asym = mi_rscm(rho, eps, cov, cov_out)
                imi = imi_rscm(rho, cov, cov_out)
                ctx = None
            else:
                ctx = RegularizedContext(weight, rho, c_n)
                if rho == 0.0:
                    asym = mi_asymptotic_noreg(weight, c_n, eps, cov, cov_out)
                else:
                    asym = mi_asymptotic_reg(ctx, eps, cov, cov_out)
                imi = _imi_for(spec, weight, ctx, cov, cov_out, rho)
        except (PreconditionError, AdmissibilityError, NonConvergenceError):
            return [spec.kind, eps, None, None, None, None, None, "out_of_regime"]
        empirical = stderr = None
        failures = 0
        if trials:
            estimator = weight if weight is not None else spec.kind
            try:
                report = mi_empirical(
                    estimator, cov, cov_out, cfg.n, eps, rho, trials, cfg.seed,
                    cfg.solver, complex_data=cfg.complex_data,
                )
                empirical, stderr, failures = report.mi_empirical, report.mi_stderr, report.failures
            except (NonConvergenceError, PreconditionError):
                return [spec.kind, eps, rho, asym, None, None, eps * imi, "non_converged"]
        status = "non_converged" if failures else "ok"
        return [spec.kind, eps, rho, asym, empirical, stderr, eps * imi, status]

    points = [(spec, eps) for spec in cfg.estimators for eps in cfg.eps_grid]
    rows = _parallel_map(one_point, points, cfg.workers)
    rows.sort(key=lambda r: (str(r[0]), r[1]))
    csv_path = f"{cfg.output}_mi_curve.csv"
    _write_csv(
        csv_path,
        ["estimator", "eps", "rho", "mi_asymptotic", "mi_empirical", "stderr", "mi_linear", "status"],
        rows,
        timestamp,
    )
    _write_gnuplot(
        f"{cfg.output}_mi_curve",
        csv_path,
        "Measure of influence vs outlier fraction",
        "eps",
        "MI",
        [(spec.kind, 2, 4, 1, spec.kind) for spec in cfg.estimators],
    )
    return csv_path


def run_imi_vs_aspect(cfg: ExperimentConfig, quick: bool = False, timestamp: bool = True) -> str:
    """IMI at the per-estimator optimal shrinkage across aspect ratios.

    Weight scale is forced to K = min(1, 1/c) per grid point.  Rows of
    kind imi_noreg_ref carry the non-regularized reference values,
    flagged out_of_regime whenever phi_infinity <= 1 or c >= 1.
    """
    cov = _load_cov(cfg.cov_legit, cfg.N)
    cov_out = _load_cov(cfg.cov_outlier, cfg.N)

    def one_point(c):
        oracle = oracle_optimum(c, cov)
        out = []
        for spec in cfg.estimators:
            if spec.kind == "scm":
                continue
            if spec.kind == "rscm":
                out.append(
                    ["imi_at_rho_star", c, "rscm", oracle.rho_star,
                     imi_rscm(oracle.rho_star, cov, cov_out), "ok"]
                )
                out.append(["imi_noreg_ref", c, "rscm", 0.0, imi_scm(cov, cov_out), "ok"])
                continue
            forced = EstimatorSpec(spec.kind, "min(1,1/c)", spec.t)
            weight = forced.resolve(c)
            try:
                rho_star_est = rho_bar_to_rho(weight, oracle.rho_star, c, cov)
                ctx = RegularizedContext(weight, rho_star_est, c)
                value = imi_reg(ctx, cov, cov_out)
                out.append(["imi_at_rho_star", c, spec.kind, rho_star_est, value, "ok"])
            except (PreconditionError, AdmissibilityError, NonConvergenceError):
                out.append(["imi_at_rho_star", c, spec.kind, None, None, "out_of_regime"])
            try:
                ref = imi_noreg(weight, c, cov, cov_out)
                out.append(["imi_noreg_ref", c, spec.kind, 0.0, ref, "ok"])
            except (PreconditionError, AdmissibilityError):
                out.append(["imi_noreg_ref", c, spec.kind, None, None, "out_of_regime"])
        return out

    rows = [row for point in _parallel_map(one_point, list(cfg.c_grid), cfg.workers) for row in point]
    rows.sort(key=lambda r: (r[0], str(r[2]), r[1]))
    csv_path = f"{cfg.output}_imi_aspect.csv"
    _write_csv(csv_path, ["kind", "c", "estimator", "rho", "imi", "status"], rows, timestamp)
    _write_gnuplot(
        f"{cfg.output}_imi_aspect",
        csv_path,
        "IMI at optimal shrinkage vs aspect ratio",
        "c",
        "IMI",
        [(spec.kind, 2, 5, 3, spec.kind) for spec in cfg.estimators if spec.kind != "scm"],
    )
    return csv_path


def run_imi_vs_rho(cfg: ExperimentConfig, quick: bool = False, timestamp: bool = True) -> str:
    """IMI across the shrinkage grid, with the oracle-optimal arrows."""
    cov = _load_cov(cfg.cov_legit, cfg.N)
    cov_out = _load_cov(cfg.cov_outlier, cfg.N)
    c_n = cfg.c_n
    oracle = oracle_optimum(c_n, cov)

    def one_point(args):
        spec, rho = args
        if spec.kind == "rscm":
            return ["curve", rho, "rscm", imi_rscm(rho, cov, cov_out), "ok"]
        weight = spec.resolve(c_n)
        try:
            ctx = RegularizedContext(weight, rho, c_n)
            return ["curve", rho, spec.kind, imi_reg(ctx, cov, cov_out), "ok"]
        except (AdmissibilityError, PreconditionError, NonConvergenceError):
            return ["curve", rho, spec.kind, None, "out_of_regime"]

    points = [(spec, rho) for spec in cfg.estimators if spec.kind != "scm" for rho in cfg.rho_grid]
    rows = _parallel_map(one_point, points, cfg.workers)
    for spec in cfg.estimators:
        if spec.kind == "rscm":
            rows.append(
                ["rho_hat_star", oracle.rho_star, "rscm", imi_rscm(oracle.rho_star, cov, cov_out), "ok"]
            )
        elif spec.kind in ("m-tyler", "m-huber"):
            weight = spec.resolve(c_n)
            try:
                rho_star_est = rho_bar_to_rho(weight, oracle.rho_star, c_n, cov)
                ctx = RegularizedContext(weight, rho_star_est, c_n)
                rows.append(["rho_hat_star", rho_star_est, spec.kind, imi_reg(ctx, cov, cov_out), "ok"])
            except (PreconditionError, AdmissibilityError, NonConvergenceError):
                rows.append(["rho_hat_star", None, spec.kind, None, "out_of_regime"])
    rows.sort(key=lambda r: (r[0], str(r[2]), r[1] if isinstance(r[1], float) else -1.0))
    csv_path = f"{cfg.output}_imi_rho.csv"
    _write_csv(csv_path, ["kind", "rho", "estimator", "imi", "status"], rows, timestamp)
    _write_gnuplot(
        f"{cfg.output}_imi_rho",
        csv_path,
        "IMI vs shrinkage",
        "rho",
        "IMI",
        [(spec.kind, 2, 4, 3, spec.kind) for spec in cfg.estimators if spec.kind != "scm"],
    )
    return csv_path


def run_estimate(cfg: ExperimentConfig, input_path: str, timestamp: bool = True) -> tuple[str, str, int]:
    """Estimate a covariance matrix from a sample file.

    Writes the estimate matrix and a JSON report; returns (matrix_path,
    report_path, exit_code) with exit code 1 on solver failure.
    """
    Y = read_matrix(input_path)
    dim, n = Y.shape
    spec = cfg.estimators[0]
    report: dict = {"estimator": spec.kind, "N": dim, "n": n, "input": str(input_path)}
    code = 0
    if spec.kind == "scm":
        estimate = scm(Y)
        report.update({"converged": True, "iterations": 0, "residual": 0.0})
    elif spec.kind == "rscm":
        if not isinstance(cfg.rho, (int, float)):
            raise ConfigError("estimate with kind rscm needs a numeric rho")
        beta = float(cfg.rho)
        estimate = rscm(Y, beta)
        report.update({"converged": True, "iterations": 0, "residual": 0.0, "rho": beta})
    else:
        weight = spec.resolve(dim / n)
        rho = cfg.rho
        if rho == "auto" or rho is None:
            calib = estimate_rho_hat(Y, weight, cfg.solver)
            rho = calib.rho_hat
            report["rho_hat"] = calib.rho_hat
            report["rho_bar_of_rho_hat"] = calib.rho_bar_of_rho_hat
            report["diagnostics"] = list(calib.diagnostics)
        rho = float(rho)
        report["rho"] = rho
        try:
            result = regularized_maronna(Y, weight, rho, cfg.solver)
        except (NonConvergenceError, SingularIterateError) as exc:
            partial = getattr(exc, "result", None)
            report.update(
                {
                    "converged": False,
                    "error": str(exc),
                    "iterations": getattr(partial, "iterations", None),
                    "residual": getattr(partial, "residual", None),
                }
            )
            estimate = getattr(partial, "estimate", None)
            code = 1
        else:
            report.update(
                {
                    "converged": True,
                    "iterations": result.iterations,
                    "residual": result.residual,
                }
            )
            estimate = result.estimate
    matrix_path = f"{cfg.output}_estimate.csv"
    if estimate is not None:
        write_matrix(estimate, matrix_path)
    report_path = f"{cfg.output}_report.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return matrix_path, report_path, code


def run_calibrate(cfg: ExperimentConfig, input_path: str) -> tuple[str, int]:
    """Data-driven shrinkage calibration report for a sample file."""
    Y = read_matrix(input_path)
    spec = cfg.estimators[0]
    if spec.kind not in ("m-tyler", "m-huber"):
        raise ConfigError("calibrate requires an m-tyler or m-huber estimator")
    weight = spec.resolve(Y.shape[0] / Y.shape[1])
    code = 0
    try:
        calib = estimate_rho_hat(Y, weight, cfg.solver)
        payload = {
            "estimator": spec.kind,
            "rho_hat": calib.rho_hat,
            "rho_bar_of_rho_hat": calib.rho_bar_of_rho_hat,
            "rho_star_estimate": calib.rho_star,
            "L_star_estimate": calib.L_star,
            "M2_estimate": calib.M2,
            "diagnostics": list(calib.diagnostics),
        }
    except (NonConvergenceError, SingularIterateError) as exc:
        payload = {"estimator": spec.kind, "error": str(exc)}
        code = 1
    report_path = f"{cfg.output}_calibration.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report_path, code
