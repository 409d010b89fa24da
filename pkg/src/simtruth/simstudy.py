"""Finite-sample simulation studies evaluated against computed truth.

Repeatedly simulate draw-mode datasets from a mechanism, apply one or
more estimators to each, and summarize bias, empirical SE, MSE and CI
coverage against the true value computed by the ``truth`` module. The
whole loop is seed-derived and bit-reproducible, including which
replications fail to converge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.special import expit as _vexpit
from scipy.special import ndtri

from .dgm import Dgm
from .engine import Dataset, EvalMode, SeedSpec, derive_seed, simulate, substream
from .errors import (
    DegenerateProbabilityError,
    EstimationError,
    SeparationError,
    SingularityError,
)
from .truth import ContrastScale, EstimandSpec, TruthResult

__all__ = [
    "ConditionalLogistic",
    "MarginalStandardization",
    "IPW",
    "EstimatorSpec",
    "FitResult",
    "EstimateResult",
    "EstimatorPerformance",
    "PerformanceReport",
    "fit_logistic",
    "estimate",
    "run_study",
]

_SEPARATION_GUARD = 30.0  # expit saturates far below this coefficient size
_WALD_EXP_GUARD = 700.0  # exp overflows just past 709
_SEARCH_SKIP = 1e-6  # score size below which backtracking is skipped
_MAX_HALVINGS = 30

# Seed-derivation subkeys.
_STUDY_TAG = 20
_BOOT_TAG = 30


def _check_level(level: float) -> None:
    if not 0.0 < level < 1.0:
        raise ValueError(f"confidence_level must be in (0, 1), got {level}")


def _check_contrast(contrast: ContrastScale) -> None:
    if contrast not in (ContrastScale.ODDS_RATIO, ContrastScale.DIFFERENCE):
        raise ValueError("estimator contrasts are OddsRatio or Difference")


@dataclass(frozen=True)
class ConditionalLogistic:
    """exp of the exposure coefficient from a logistic outcome model,
    with a Wald interval on the log scale."""

    exposure: str
    confidence_level: float = 0.95

    def __post_init__(self):
        _check_level(self.confidence_level)

    def label(self) -> str:
        return f"conditional_logistic({self.exposure})"


@dataclass(frozen=True)
class MarginalStandardization:
    """Outcome-model standardization (g-computation) over the sample.

    Fits a logistic outcome model, predicts every row under
    exposure=a1 and exposure=a0, averages, and contrasts the averages.
    Intervals come from a nonparametric bootstrap percentile.
    """

    exposure: str
    a1: float = 1.0
    a0: float = 0.0
    contrast: ContrastScale = ContrastScale.ODDS_RATIO
    bootstrap_reps: int = 500
    confidence_level: float = 0.95

    def __post_init__(self):
        _check_level(self.confidence_level)
        _check_contrast(self.contrast)
        if self.a1 == self.a0:
            raise ValueError("a1 and a0 must differ")
        if self.bootstrap_reps < 1:
            raise ValueError(f"bootstrap_reps must be >= 1, got {self.bootstrap_reps}")

    def label(self) -> str:
        return f"marginal_standardization({self.exposure})"


@dataclass(frozen=True)
class IPW:
    """Inverse-probability-of-exposure weighting.

    Weights are 1/P(A=observed | covariates) from a logistic propensity
    model and are not truncated unless ``truncate_at`` is set; any weight
    above ``warn_weight`` attaches a warning to the result instead.
    """

    exposure: str
    propensity_covariates: tuple[str, ...]
    contrast: ContrastScale = ContrastScale.ODDS_RATIO
    bootstrap_reps: int = 500
    confidence_level: float = 0.95
    truncate_at: float | None = None
    warn_weight: float = 100.0

    def __post_init__(self):
        object.__setattr__(
            self, "propensity_covariates", tuple(str(c) for c in self.propensity_covariates)
        )
        _check_level(self.confidence_level)
        _check_contrast(self.contrast)
        if self.bootstrap_reps < 1:
            raise ValueError(f"bootstrap_reps must be >= 1, got {self.bootstrap_reps}")
        if self.truncate_at is not None and not self.truncate_at > 0:
            raise ValueError(f"truncate_at must be > 0, got {self.truncate_at}")

    def label(self) -> str:
        return f"ipw({self.exposure})"


EstimatorSpec = ConditionalLogistic | MarginalStandardization | IPW


@dataclass(frozen=True)
class FitResult:
    coefficients: np.ndarray
    covariance: np.ndarray
    converged: bool
    iterations: int


@dataclass(frozen=True)
class EstimateResult:
    point: float
    ci_low: float
    ci_high: float
    warnings: tuple[str, ...] = ()


def _loglik(eta: np.ndarray, y: np.ndarray) -> float:
    # sum(y*eta - log(1+exp(eta))), with the softplus kept stable.
    return float(np.sum(y * eta) - np.sum(np.logaddexp(0.0, eta)))


def fit_logistic(
    design: np.ndarray,
    response: np.ndarray,
    *,
    tol: float = 1e-10,
    max_iter: int = 50,
    start: np.ndarray | None = None,
) -> FitResult:
    """Maximum-likelihood logistic regression by IRLS.

    Parameters
    ----------
    design : (n, p) array
        Model matrix including the intercept column.
    response : (n,) array of 0/1
    tol : float
        Convergence is declared when the largest score component falls
        below this.
    max_iter : int
        Newton iteration cap; exceeding it returns converged=False.
    start : array, optional
        Warm-start coefficients (zeros by default).

    Returns
    -------
    FitResult
        Coefficients, inverse observed information as covariance, a
        convergence flag, and the iteration count.

    Raises
    ------
    SingularityError
        The information matrix is not positive definite (collinear
        design).
    SeparationError
        The response is constant, or a coefficient ran past a magnitude
        guard, the numerical signature of separated data.
    """
    X = np.asarray(design, dtype=np.float64)
    y = np.asarray(response, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("design must be a 2-d matrix")
    n, p = X.shape
    if n < p:
        raise ValueError(f"need at least as many rows as columns, got {n} rows, {p} columns")
    if y.shape != (n,):
        raise ValueError(f"response length {y.shape} does not match {n} design rows")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValueError("response must contain only 0 and 1")
    if np.all(y == y[0]):
        # A constant response pushes the intercept to infinity; catch it
        # up front rather than letting IRLS chase it.
        raise SeparationError("response is constant; the likelihood has no maximum")

    beta = np.zeros(p) if start is None else np.asarray(start, dtype=np.float64).copy()
    eta = X @ beta
    ll = _loglik(eta, y)

    factor = None
    for iteration in range(1, max_iter + 1):
        prob = _vexpit(eta)
        score = X.T @ (y - prob)
        weight = prob * (1.0 - prob)
        info = (X * weight[:, None]).T @ X
        try:
            factor = cho_factor(info)
        except LinAlgError:
            raise SingularityError(
                "information matrix is singular; the design is collinear"
            ) from None

        if np.max(np.abs(score)) < tol:
            covariance = cho_solve(factor, np.eye(p))
            return FitResult(beta, covariance, converged=True, iterations=iteration - 1)

        delta = cho_solve(factor, score)
        if float(np.max(np.abs(score))) < _SEARCH_SKIP:
            # Near the optimum the concave objective is flat at float
            # resolution, so a backtracking test only rejects the (safe)
            # full Newton step and stalls the score above tolerance.
            beta = beta + delta
            eta = X @ beta
            ll = _loglik(eta, y)
        else:
            step = 1.0
            for _ in range(_MAX_HALVINGS):
                candidate = beta + step * delta
                eta_new = X @ candidate
                ll_new = _loglik(eta_new, y)
                if ll_new >= ll:
                    break
                step *= 0.5
            beta, eta, ll = candidate, eta_new, ll_new
        if np.max(np.abs(beta)) > _SEPARATION_GUARD:
            raise SeparationError(
                "coefficients diverged past the separation guard; "
                "the data are (quasi-)separated"
            )

    covariance = cho_solve(factor, np.eye(p))
    return FitResult(beta, covariance, converged=False, iterations=max_iter)


def _design_from(data: Dataset, columns: Sequence[str]) -> np.ndarray:
    cols = [np.ones(data.n)]
    cols.extend(np.asarray(data.column(c), dtype=np.float64) for c in columns)
    return np.column_stack(cols)


def _require_binary(values: np.ndarray, what: str) -> None:
    if not np.all((values == 0.0) | (values == 1.0)):
        raise EstimationError(f"{what} must be binary 0/1 for this estimator")


def _fit_or_fail(design, response, start=None) -> FitResult:
    fit = fit_logistic(design, response, start=start)
    if not fit.converged:
        raise EstimationError("logistic fit did not converge")
    return fit


def _odds_contrast(p1: float, p0: float) -> float:
    for value in (p1, p0):
        if not 0.0 < value < 1.0:
            raise EstimationError(f"standardized mean {value} has undefined odds")
    return (p1 / (1.0 - p1)) / (p0 / (1.0 - p0))


def _percentile_ci(points: np.ndarray, level: float) -> tuple[float, float]:
    alpha = 100.0 * (1.0 - level) / 2.0
    lo, hi = np.percentile(points, [alpha, 100.0 - alpha])
    return float(lo), float(hi)


def _bootstrap_ci(point_fn, n: int, reps: int, level: float, seed: int) -> tuple[float, float]:
    """Percentile interval from resampled recomputations of ``point_fn``.

    Resamples that fail to fit are dropped; if more than half fail the
    interval is considered meaningless and an estimation error is raised.
    """
    rng = substream(seed, _BOOT_TAG)
    points = []
    for _ in range(reps):
        idx = rng.integers(0, n, size=n)
        try:
            points.append(point_fn(idx))
        except (SeparationError, SingularityError, EstimationError):
            continue
    if len(points) < max(2, reps // 2):
        raise EstimationError(
            f"bootstrap collapsed: only {len(points)} of {reps} resamples produced estimates"
        )
    return _percentile_ci(np.asarray(points), level)


def estimate(data: Dataset, estimator: EstimatorSpec, *, seed: int = 0) -> EstimateResult:
    """Apply one estimator to one dataset.

    The dataset's recorded outcome column is the response; every other
    column acts as a covariate where the estimator needs covariates.
    ``seed`` drives bootstrap resampling only.

    Raises EstimationError when the estimator cannot produce a usable
    estimate on this dataset (constant exposure, non-convergence,
    collapsed bootstrap), and propagates fit errors.
    """
    if data.outcome is None:
        raise EstimationError("dataset does not record which column is the outcome")
    outcome = data.outcome
    covariates = [name for name in data.columns if name != outcome]
    if estimator.exposure not in covariates:
        raise EstimationError(f"dataset has no exposure column {estimator.exposure!r}")
    y = np.asarray(data.column(outcome), dtype=np.float64)
    a = np.asarray(data.column(estimator.exposure), dtype=np.float64)
    if np.all(a == a[0]):
        raise EstimationError(f"exposure {estimator.exposure!r} is constant in this dataset")

    if isinstance(estimator, ConditionalLogistic):
        return _conditional_logistic(data, estimator, covariates, y)
    if isinstance(estimator, MarginalStandardization):
        return _marginal_standardization(data, estimator, covariates, y, seed)
    if isinstance(estimator, IPW):
        return _ipw(data, estimator, y, a, seed)
    raise ValueError(f"unknown estimator {type(estimator).__name__}")


def _conditional_logistic(data, est: ConditionalLogistic, covariates, y) -> EstimateResult:
    _require_binary(y, "outcome")
    X = _design_from(data, covariates)
    fit = _fit_or_fail(X, y)
    idx = 1 + covariates.index(est.exposure)
    se = math.sqrt(fit.covariance[idx, idx])
    z = float(ndtri(0.5 * (1.0 + est.confidence_level)))
    b = fit.coefficients[idx]
    if b + z * se > _WALD_EXP_GUARD:
        # exp() would overflow: the interval is unbounded in practice,
        # which only happens when the exposure carries no information.
        raise SeparationError(
            "Wald interval for the exposure coefficient overflows the "
            "odds-ratio scale; the coefficient is effectively unidentified"
        )
    return EstimateResult(
        point=math.exp(b), ci_low=math.exp(b - z * se), ci_high=math.exp(b + z * se)
    )


def _marginal_standardization(
    data, est: MarginalStandardization, covariates, y, seed: int
) -> EstimateResult:
    _require_binary(y, "outcome")
    X = _design_from(data, covariates)
    exposure_col = 1 + covariates.index(est.exposure)
    X1 = X.copy()
    X1[:, exposure_col] = est.a1
    X0 = X.copy()
    X0[:, exposure_col] = est.a0

    full = _fit_or_fail(X, y)

    def standardized(beta, rows=None) -> float:
        if rows is None:
            p1 = float(np.mean(_vexpit(X1 @ beta)))
            p0 = float(np.mean(_vexpit(X0 @ beta)))
        else:
            p1 = float(np.mean(_vexpit(X1[rows] @ beta)))
            p0 = float(np.mean(_vexpit(X0[rows] @ beta)))
        if est.contrast is ContrastScale.ODDS_RATIO:
            return _odds_contrast(p1, p0)
        return p1 - p0

    def boot_point(rows) -> float:
        fit = _fit_or_fail(X[rows], y[rows], start=full.coefficients)
        return standardized(fit.coefficients, rows)

    point = standardized(full.coefficients)
    ci_low, ci_high = _bootstrap_ci(
        boot_point, data.n, est.bootstrap_reps, est.confidence_level, seed
    )
    return EstimateResult(point=point, ci_low=ci_low, ci_high=ci_high)


def _ipw(data, est: IPW, y, a, seed: int) -> EstimateResult:
    _require_binary(a, "exposure")
    if est.contrast is ContrastScale.ODDS_RATIO:
        _require_binary(y, "outcome")
    missing = [c for c in est.propensity_covariates if c not in data.columns]
    if missing:
        raise EstimationError(f"dataset lacks propensity covariates {missing}")
    Xp = _design_from(data, list(est.propensity_covariates))

    warnings: list[str] = []

    def weighted_contrast(beta, rows) -> float:
        ps = _vexpit(Xp[rows] @ beta)
        ai, yi = a[rows], y[rows]
        w = np.where(ai == 1.0, 1.0 / ps, 1.0 / (1.0 - ps))
        if est.truncate_at is not None:
            w = np.minimum(w, est.truncate_at)
        exposed = ai == 1.0
        sw1, sw0 = float(np.sum(w[exposed])), float(np.sum(w[~exposed]))
        if sw1 == 0.0 or sw0 == 0.0:
            raise EstimationError("one exposure arm is empty; weighted means undefined")
        p1 = float(np.sum(w[exposed] * yi[exposed]) / sw1)
        p0 = float(np.sum(w[~exposed] * yi[~exposed]) / sw0)
        if est.contrast is ContrastScale.ODDS_RATIO:
            return _odds_contrast(p1, p0)
        return p1 - p0

    all_rows = np.arange(data.n)
    full = _fit_or_fail(Xp, a)
    ps_full = _vexpit(Xp @ full.coefficients)
    w_full = np.where(a == 1.0, 1.0 / ps_full, 1.0 / (1.0 - ps_full))
    if est.truncate_at is None and float(np.max(w_full)) > est.warn_weight:
        warnings.append(
            f"maximum weight {float(np.max(w_full)):.1f} exceeds {est.warn_weight:g}; "
            "estimates may be unstable"
        )

    def boot_point(rows) -> float:
        fit = _fit_or_fail(Xp[rows], a[rows], start=full.coefficients)
        return weighted_contrast(fit.coefficients, rows)

    point = weighted_contrast(full.coefficients, all_rows)
    ci_low, ci_high = _bootstrap_ci(
        boot_point, data.n, est.bootstrap_reps, est.confidence_level, seed
    )
    return EstimateResult(point=point, ci_low=ci_low, ci_high=ci_high, warnings=tuple(warnings))


@dataclass(frozen=True)
class EstimatorPerformance:
    """Performance summary for one estimator across surviving replications."""

    label: str
    truth_used: float
    n_sims: int
    n_failed: int
    bias: float | None = None
    bias_mcse: float | None = None
    empirical_se: float | None = None
    mse: float | None = None
    coverage: float | None = None
    coverage_mcse: float | None = None
    error: str | None = None
    points: tuple[float, ...] | None = None


@dataclass(frozen=True)
class PerformanceReport:
    truth_used: float
    n_sims: int
    sample_size: int
    master_seed: int
    estimators: tuple[EstimatorPerformance, ...]


def run_study(
    dgm: Dgm,
    estimand: EstimandSpec,
    truth: TruthResult | float,
    estimators: Sequence[EstimatorSpec],
    n_sims: int,
    sample_size: int,
    seed: SeedSpec,
    *,
    keep_points: bool = False,
    threads: int = 1,
) -> PerformanceReport:
    """Simulate, estimate, and score estimators against a fixed truth.

    Parameters
    ----------
    dgm, estimand
        The mechanism and the estimand the study targets. ``estimand``
        documents what ``truth`` is the truth of; it is not recomputed.
    truth : TruthResult or float
        The reference value performance is measured against.
    estimators : sequence of estimator specs
    n_sims : int
        Number of simulated datasets, at least 2.
    sample_size : int
        Observations per dataset (draw mode, outcome realized).
    seed : SeedSpec
        Master seed; each replication r derives its own seed from
        (master_seed, r), so the study is reproducible bit for bit,
        including which replications fail.
    keep_points : bool
        Retain per-replication point estimates in the report.

    Failed replications (non-convergence, separation, degenerate
    estimates) are excluded from the summaries and counted per
    estimator. An estimator with no surviving replications gets an
    error entry instead of statistics.
    """
    if n_sims < 2:
        raise ValueError(f"n_sims must be >= 2, got {n_sims}")
    if sample_size < 1:
        raise ValueError(f"sample_size must be >= 1, got {sample_size}")
    estimators = list(estimators)
    for est in estimators:
        if isinstance(est, (MarginalStandardization, IPW)) and est.bootstrap_reps < 100:
            raise ValueError(
                f"{est.label()}: bootstrap_reps must be >= 100 when coverage is reported"
            )
    truth_value = float(truth.value) if isinstance(truth, TruthResult) else float(truth)

    points: list[list[float]] = [[] for _ in estimators]
    hits: list[int] = [0 for _ in estimators]
    failed: list[int] = [0 for _ in estimators]

    for r in range(n_sims):
        rep_seed = SeedSpec(derive_seed(seed.master_seed, _STUDY_TAG, r), seed.chunk_size)
        data = simulate(
            dgm, sample_size, rep_seed, None, EvalMode.DRAW, threads=threads
        )
        for j, est in enumerate(estimators):
            try:
                result = estimate(
                    data, est, seed=derive_seed(rep_seed.master_seed, _BOOT_TAG, j)
                )
            except (
                SeparationError,
                SingularityError,
                EstimationError,
                DegenerateProbabilityError,
            ):
                failed[j] += 1
                continue
            points[j].append(result.point)
            if result.ci_low <= truth_value <= result.ci_high:
                hits[j] += 1

    rows = []
    for j, est in enumerate(estimators):
        n_eff = n_sims - failed[j]
        base = dict(
            label=est.label(), truth_used=truth_value, n_sims=n_sims, n_failed=failed[j]
        )
        if n_eff < 2:
            rows.append(
                EstimatorPerformance(
                    **base,
                    error=f"only {n_eff} of {n_sims} replications produced estimates",
                )
            )
            continue
        pts = np.asarray(points[j])
        empirical_se = float(np.std(pts, ddof=1))
        coverage = hits[j] / n_eff
        rows.append(
            EstimatorPerformance(
                **base,
                bias=float(np.mean(pts)) - truth_value,
                bias_mcse=empirical_se / math.sqrt(n_eff),
                empirical_se=empirical_se,
                mse=float(np.mean((pts - truth_value) ** 2)),
                coverage=coverage,
                coverage_mcse=math.sqrt(coverage * (1.0 - coverage) / n_eff),
                points=tuple(points[j]) if keep_points else None,
            )
        )

    return PerformanceReport(
        truth_used=truth_value,
        n_sims=n_sims,
        sample_size=sample_size,
        master_seed=seed.master_seed,
        estimators=tuple(rows),
    )
