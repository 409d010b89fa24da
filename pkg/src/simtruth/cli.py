"""Command-line interface.

Five subcommands, all driven by a config file:

* ``truth``     simulate the true value of the configured estimand
* ``oracle``    quadrature cross-check for the marginal odds ratio
* ``diagnose``  simulation-error curve over a grid of n, with the
                stable-digits sample size
* ``simstudy``  repeated-sampling performance of configured estimators
* ``validate``  structural checks on the configured data model,
                reported as data rather than as a failure

Exit codes: 0 success, 2 config problems, 3 invalid data model,
4 numerical or estimation failure, 5 file I/O trouble. ``--threads``
affects wall time only, never results.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import OracleBlock, RunConfig, parse_config
from .dgm import Dgm, ExogenousNode, Link, Normal, StructuralNode, check_dgm, validate_dgm
from .diagnostics import detect_kappa, error_vs_n
from .engine import SeedSpec
from .errors import (
    ConfigError,
    DegenerateProbabilityError,
    EstimationError,
    IngestionError,
    SeparationError,
    SimtruthError,
    SingularityError,
    ValidationError,
)
from .oracle import quadrature_mu
from .reports import (
    OracleReport,
    diagnose_report,
    oracle_report,
    render_csv,
    render_json,
    simstudy_report,
    truth_report,
    validation_report,
    write_output,
)
from .simstudy import run_study
from .truth import MarginalOddsRatio, compute_truth

__all__ = ["main"]

_THREADS_ENV = "SIMTRUTH_THREADS"
_U64 = 2**64


def _seed_value(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}")
    if not 0 <= value < _U64:
        raise argparse.ArgumentTypeError(f"seed must be in [0, 2**64), got {value}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simtruth",
        description="Simulate true estimand values and audit them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("truth", "simulate the true value of the configured estimand"),
        ("oracle", "cross-check the marginal odds ratio by quadrature"),
        ("diagnose", "simulation-error curve and stable-digits sample size"),
        ("simstudy", "estimator performance under repeated sampling"),
        ("validate", "report structural violations in the data model"),
    ]:
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="path to a TOML config file")
        cmd.add_argument("--output", help="write the report here (default: stdout)")
        cmd.add_argument("--format", choices=["csv", "json"], help="report format")
        cmd.add_argument(
            "--threads",
            type=_positive_int,
            help=f"worker threads (default: ${_THREADS_ENV} or 1); never changes results",
        )
        cmd.add_argument("--seed", type=_seed_value, help="override the config master seed")
    return parser


def _default_threads() -> int:
    raw = os.environ.get(_THREADS_ENV)
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{_THREADS_ENV} must be an integer, got {raw!r}")
    if value < 1:
        raise ConfigError(f"{_THREADS_ENV} must be >= 1, got {value}")
    return value


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def _run_inputs(cfg: RunConfig, command: str, seed_override: int | None):
    _require(cfg.seed is not None and cfg.n is not None,
             f"the {command} command needs a [run] section with n and master_seed")
    seed = cfg.seed
    if seed_override is not None:
        seed = SeedSpec(seed_override, seed.chunk_size)
    return cfg.n, seed


def _logistic_normal_shape(dgm: Dgm, exposure: str):
    """Read (b0, b1, b2, mu, sigma) off a logistic outcome with one
    Normal confounder; reject anything else."""
    outcome = dgm.outcome_node()
    _require(
        isinstance(outcome, StructuralNode) and outcome.link is Link.EXPIT,
        "oracle needs a structural outcome with an expit link",
    )
    others = [(name, coef) for name, coef in outcome.terms if name != exposure]
    has_exposure = any(name == exposure for name, _ in outcome.terms)
    _require(
        has_exposure and len(others) == 1,
        "oracle needs an outcome with exactly two terms: the exposure and one confounder",
    )
    confounder_name, b2 = others[0]
    confounder = dgm.node(confounder_name)
    _require(
        isinstance(confounder, ExogenousNode) and isinstance(confounder.dist, Normal),
        f"oracle needs confounder {confounder_name!r} to be exogenous Normal",
    )
    b1 = outcome.coefficient(exposure)
    return outcome.intercept, b1, b2, confounder.dist.mean, confounder.dist.sd


def _cmd_truth(cfg: RunConfig, args) -> dict:
    _require(cfg.estimand is not None, "the truth command needs an [estimand] section")
    n, seed = _run_inputs(cfg, "truth", args.seed)
    result = compute_truth(
        cfg.dgm,
        cfg.estimand,
        n,
        seed,
        replicates=cfg.replicates,
        outcome_mode=cfg.outcome_mode,
        threads=args.threads,
    )
    return truth_report(cfg.estimand, result)


def _cmd_oracle(cfg: RunConfig, args) -> dict:
    block = cfg.oracle
    _require(block is not None, "the oracle command needs an [oracle] section")
    estimand = cfg.estimand
    _require(
        isinstance(estimand, MarginalOddsRatio),
        "the oracle command needs a marginal_odds_ratio estimand",
    )
    b0, b1, b2, mu, sigma = _logistic_normal_shape(cfg.dgm, estimand.exposure)
    mu1 = quadrature_mu(b0, b1, b2, estimand.a1, mu, sigma, block.spec)
    mu0 = quadrature_mu(b0, b1, b2, estimand.a0, mu, sigma, block.spec)
    for value in (mu1, mu0):
        if not 0.0 < value < 1.0:
            raise DegenerateProbabilityError(
                f"marginal probability {value} leaves the odds undefined"
            )
    psi_q = (mu1 / (1.0 - mu1)) / (mu0 / (1.0 - mu0))
    report = OracleReport(
        method=block.spec, mu1_quadrature=mu1, mu0_quadrature=mu0, psi_quadrature=psi_q
    )
    if block.compare_mc:
        n, seed = _run_inputs(cfg, "oracle", args.seed)
        mc = compute_truth(
            cfg.dgm,
            estimand,
            n,
            seed,
            replicates=cfg.replicates,
            outcome_mode=cfg.outcome_mode,
            threads=args.threads,
        )
        report = OracleReport(
            method=block.spec,
            mu1_quadrature=mu1,
            mu0_quadrature=mu0,
            psi_quadrature=psi_q,
            psi_mc=mc.value,
            replicate_se=mc.replicate_se,
            abs_delta=abs(psi_q - mc.value),
        )
    return oracle_report(estimand, report)


def _cmd_diagnose(cfg: RunConfig, args) -> dict:
    block = cfg.diagnostics
    _require(block is not None, "the diagnose command needs a [diagnostics] section")
    _require(cfg.estimand is not None, "the diagnose command needs an [estimand] section")
    _require(cfg.seed is not None,
             "the diagnose command needs a [run] section with n and master_seed")
    seed = cfg.seed
    if args.seed is not None:
        seed = SeedSpec(args.seed, seed.chunk_size)
    curve = error_vs_n(
        cfg.dgm,
        cfg.estimand,
        block.n_grid,
        block.replicates_per_n,
        seed,
        threads=args.threads,
    )
    kappa = detect_kappa(curve, block.decimal_places)
    return diagnose_report(cfg.estimand, kappa, seed.master_seed)


def _cmd_simstudy(cfg: RunConfig, args) -> dict:
    block = cfg.simstudy
    _require(block is not None, "the simstudy command needs a [simstudy] section")
    _require(cfg.estimand is not None, "the simstudy command needs an [estimand] section")
    n, seed = _run_inputs(cfg, "simstudy", args.seed)
    truth = compute_truth(
        cfg.dgm,
        cfg.estimand,
        n,
        seed,
        replicates=cfg.replicates,
        outcome_mode=cfg.outcome_mode,
        threads=args.threads,
    )
    report = run_study(
        cfg.dgm,
        cfg.estimand,
        truth,
        block.estimators,
        block.n_sims,
        block.sample_size,
        seed,
        keep_points=block.keep_points,
        threads=args.threads,
    )
    return simstudy_report(cfg.estimand, report)


def _cmd_validate(cfg: RunConfig, args) -> dict:
    return validation_report(validate_dgm(cfg.dgm))


_COMMANDS = {
    "truth": _cmd_truth,
    "oracle": _cmd_oracle,
    "diagnose": _cmd_diagnose,
    "simstudy": _cmd_simstudy,
    "validate": _cmd_validate,
}


def _run(argv) -> int:
    args = _build_parser().parse_args(argv)
    if args.threads is None:
        args.threads = _default_threads()
    cfg = parse_config(args.config)
    if args.command != "validate":
        check_dgm(cfg.dgm)
    report = _COMMANDS[args.command](cfg, args)
    fmt = args.format or cfg.output_format
    text = render_json(report) if fmt == "json" else render_csv(report)
    write_output(text, args.output or cfg.output_path)
    return 0


def _fail(message: str, code: int) -> int:
    print(f"simtruth: error: {message}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        return _run(argv)
    except ConfigError as exc:
        return _fail(str(exc), 2)
    except ValidationError as exc:
        lines = "".join(f"\n  - {v}" for v in exc.violations)
        return _fail(f"{exc}{lines}", 3)
    except (
        DegenerateProbabilityError,
        SeparationError,
        SingularityError,
        EstimationError,
    ) as exc:
        return _fail(str(exc), 4)
    except IngestionError as exc:
        return _fail(str(exc), 5)
    except OSError as exc:
        return _fail(str(exc), 5)
    except ValueError as exc:
        return _fail(str(exc), 4)
    except SimtruthError as exc:
        return _fail(str(exc), 4)


if __name__ == "__main__":
    sys.exit(main())
