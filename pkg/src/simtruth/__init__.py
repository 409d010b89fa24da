"""Simulation-based computation of true estimand values, with
quadrature cross-checks, Monte Carlo error diagnostics, and
repeated-sampling evaluation of estimators.
"""

from .errors import (
    ConfigError,
    ConfigParseError,
    DanglingReferenceError,
    DegenerateProbabilityError,
    EstimationError,
    IngestionError,
    RangeViolationError,
    SeparationError,
    SimtruthError,
    SingularityError,
    UnknownKeyError,
    ValidationError,
)
from .dgm import (
    Bernoulli,
    BernoulliDraw,
    Dgm,
    Empirical,
    EmpiricalSource,
    ExogenousNode,
    GaussianDraw,
    Intervention,
    Link,
    Normal,
    StructuralNode,
    Uniform,
    apply_link,
    as_intervention,
    check_dgm,
    conditional_odds_ratio,
    expit,
    validate_dgm,
)
from .engine import (
    Dataset,
    DrawAudit,
    EvalMode,
    SeedSpec,
    derive_seed,
    ingest_empirical,
    simulate,
    simulate_counterfactual_pair,
    substream,
)
from .oracle import (
    AdaptiveSimpson,
    GaussHermite,
    QuadratureSpec,
    gauss_hermite_rule,
    quadrature_mu,
    quadrature_psi,
)
from .truth import (
    ContrastScale,
    ControlledDirectEffect,
    MarginalOddsRatio,
    PotentialOutcomeContrast,
    TruthResult,
    compute_truth,
    controlled_direct_effect,
    marginal_odds_ratio,
    potential_outcome_contrast,
    potential_outcome_mean,
)
from .diagnostics import (
    ErrorCurve,
    ErrorPoint,
    KappaResult,
    SeedSweepResult,
    SweepPoint,
    detect_kappa,
    error_vs_n,
    seed_sweep,
)
from .simstudy import (
    IPW,
    ConditionalLogistic,
    EstimateResult,
    EstimatorPerformance,
    FitResult,
    MarginalStandardization,
    PerformanceReport,
    estimate,
    fit_logistic,
    run_study,
)
from .config import RunConfig, parse_config
from .reports import (
    OracleReport,
    diagnose_report,
    estimand_from_dict,
    estimand_to_dict,
    load_report,
    oracle_report,
    render_csv,
    render_json,
    simstudy_report,
    truth_report,
    validation_report,
    write_output,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "SimtruthError",
    "ValidationError",
    "DegenerateProbabilityError",
    "IngestionError",
    "SeparationError",
    "SingularityError",
    "EstimationError",
    "ConfigError",
    "ConfigParseError",
    "UnknownKeyError",
    "RangeViolationError",
    "DanglingReferenceError",
    # data-generating mechanisms
    "Normal",
    "Bernoulli",
    "Uniform",
    "Empirical",
    "EmpiricalSource",
    "BernoulliDraw",
    "GaussianDraw",
    "ExogenousNode",
    "StructuralNode",
    "Link",
    "Dgm",
    "Intervention",
    "as_intervention",
    "expit",
    "apply_link",
    "validate_dgm",
    "check_dgm",
    "conditional_odds_ratio",
    # engine
    "SeedSpec",
    "EvalMode",
    "Dataset",
    "DrawAudit",
    "simulate",
    "simulate_counterfactual_pair",
    "ingest_empirical",
    "substream",
    "derive_seed",
    # quadrature
    "GaussHermite",
    "AdaptiveSimpson",
    "QuadratureSpec",
    "gauss_hermite_rule",
    "quadrature_mu",
    "quadrature_psi",
    # true values
    "ContrastScale",
    "MarginalOddsRatio",
    "ControlledDirectEffect",
    "PotentialOutcomeContrast",
    "TruthResult",
    "marginal_odds_ratio",
    "controlled_direct_effect",
    "potential_outcome_contrast",
    "potential_outcome_mean",
    "compute_truth",
    # diagnostics
    "ErrorPoint",
    "ErrorCurve",
    "KappaResult",
    "SweepPoint",
    "SeedSweepResult",
    "error_vs_n",
    "detect_kappa",
    "seed_sweep",
    # estimators and studies
    "ConditionalLogistic",
    "MarginalStandardization",
    "IPW",
    "FitResult",
    "EstimateResult",
    "fit_logistic",
    "estimate",
    "EstimatorPerformance",
    "PerformanceReport",
    "run_study",
    # config
    "RunConfig",
    "parse_config",
    # reports
    "OracleReport",
    "estimand_to_dict",
    "estimand_from_dict",
    "truth_report",
    "oracle_report",
    "diagnose_report",
    "simstudy_report",
    "validation_report",
    "render_json",
    "render_csv",
    "load_report",
    "write_output",
]
