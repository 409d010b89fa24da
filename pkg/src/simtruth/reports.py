"""Report construction, serialization, and round-trip parsing.

Every CLI command produces a report that can be rendered as JSON or
CSV. Rendering is deterministic: field order is fixed at construction,
floats serialize via ``repr`` (JSON) or ``%.17g`` (CSV), and nothing
environment-dependent (timestamps, hostnames, thread counts) is ever
embedded. JSON reports can be parsed back into the in-memory
structures they came from; ``load_report`` dispatches on the
``command`` field.
"""

from __future__ import annotations

import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass

from .diagnostics import ErrorCurve, ErrorPoint, KappaResult
from .oracle import AdaptiveSimpson, GaussHermite, QuadratureSpec
from .simstudy import EstimatorPerformance, PerformanceReport
from .truth import (
    ContrastScale,
    ControlledDirectEffect,
    EstimandSpec,
    MarginalOddsRatio,
    PotentialOutcomeContrast,
    TruthResult,
)
from .dgm import Intervention

__all__ = [
    "OracleReport",
    "estimand_to_dict",
    "estimand_from_dict",
    "truth_report",
    "oracle_report",
    "diagnose_report",
    "simstudy_report",
    "validation_report",
    "load_report",
    "render_json",
    "render_csv",
    "write_output",
]


def _fmt(x) -> str:
    # CSV cell formatting: 17 significant digits round-trips any double.
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def estimand_to_dict(estimand: EstimandSpec) -> dict:
    if isinstance(estimand, MarginalOddsRatio):
        return {
            "kind": "marginal_odds_ratio",
            "exposure": estimand.exposure,
            "a1": estimand.a1,
            "a0": estimand.a0,
        }
    if isinstance(estimand, ControlledDirectEffect):
        return {
            "kind": "controlled_direct_effect",
            "exposure": estimand.exposure,
            "mediator": estimand.mediator,
            "m": estimand.m,
            "a1": estimand.a1,
            "a0": estimand.a0,
            "scale": estimand.scale.value,
        }
    if isinstance(estimand, PotentialOutcomeContrast):
        return {
            "kind": "potential_outcome_contrast",
            "intervention_a": dict(estimand.intervention_a.assignments),
            "intervention_b": dict(estimand.intervention_b.assignments),
            "contrast": estimand.contrast.value,
        }
    raise TypeError(f"unsupported estimand type: {type(estimand).__name__}")


def estimand_from_dict(d: dict) -> EstimandSpec:
    kind = d["kind"]
    if kind == "marginal_odds_ratio":
        return MarginalOddsRatio(exposure=d["exposure"], a1=d["a1"], a0=d["a0"])
    if kind == "controlled_direct_effect":
        return ControlledDirectEffect(
            exposure=d["exposure"],
            mediator=d["mediator"],
            m=d["m"],
            a1=d["a1"],
            a0=d["a0"],
            scale=ContrastScale(d["scale"]),
        )
    if kind == "potential_outcome_contrast":
        return PotentialOutcomeContrast(
            intervention_a=Intervention(d["intervention_a"]),
            intervention_b=Intervention(d["intervention_b"]),
            contrast=ContrastScale(d["contrast"]),
        )
    raise ValueError(f"unknown estimand kind: {kind!r}")


# --- truth ---------------------------------------------------------------


def truth_report(estimand: EstimandSpec, result: TruthResult) -> dict:
    return {
        "command": "truth",
        "estimand": estimand_to_dict(estimand),
        "result": {
            "value": result.value,
            "replicate_se": result.replicate_se,
            "potential_means": dict(result.potential_means),
            "n": result.n,
            "master_seed": result.master_seed,
            "replicates": result.replicates,
        },
    }


def _load_truth(d: dict):
    r = d["result"]
    result = TruthResult(
        value=r["value"],
        potential_means=dict(r["potential_means"]),
        n=r["n"],
        master_seed=r["master_seed"],
        replicates=r["replicates"],
        replicate_se=r["replicate_se"],
    )
    return estimand_from_dict(d["estimand"]), result


def _truth_csv(d: dict, out) -> None:
    r = d["result"]
    means = r["potential_means"]
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(
        ["value", "replicate_se", "n", "replicates", "master_seed"]
        + [f"mean[{label}]" for label in means]
    )
    writer.writerow(
        [_fmt(r["value"]), _fmt(r["replicate_se"]), r["n"], r["replicates"], r["master_seed"]]
        + [_fmt(v) for v in means.values()]
    )


# --- oracle --------------------------------------------------------------


@dataclass(frozen=True)
class OracleReport:
    """Quadrature value for the marginal odds ratio, with an optional
    simulation cross-check."""

    method: QuadratureSpec
    mu1_quadrature: float
    mu0_quadrature: float
    psi_quadrature: float
    psi_mc: float | None = None
    replicate_se: float | None = None
    abs_delta: float | None = None


def _method_to_dict(spec: QuadratureSpec) -> dict:
    if isinstance(spec, GaussHermite):
        return {"method": "gauss_hermite", "nodes": spec.nodes}
    return {
        "method": "adaptive_simpson",
        "abs_tol": spec.abs_tol,
        "range_sigmas": spec.range_sigmas,
    }


def _method_from_dict(d: dict) -> QuadratureSpec:
    if d["method"] == "gauss_hermite":
        return GaussHermite(nodes=d["nodes"])
    return AdaptiveSimpson(abs_tol=d["abs_tol"], range_sigmas=d["range_sigmas"])


def oracle_report(estimand: EstimandSpec, report: OracleReport) -> dict:
    d = {
        "command": "oracle",
        "estimand": estimand_to_dict(estimand),
        "method": _method_to_dict(report.method),
        "mu1_quadrature": report.mu1_quadrature,
        "mu0_quadrature": report.mu0_quadrature,
        "psi_quadrature": report.psi_quadrature,
    }
    if report.psi_mc is not None:
        d["psi_mc"] = report.psi_mc
        d["replicate_se"] = report.replicate_se
        d["abs_delta"] = report.abs_delta
    return d


def _load_oracle(d: dict):
    report = OracleReport(
        method=_method_from_dict(d["method"]),
        mu1_quadrature=d["mu1_quadrature"],
        mu0_quadrature=d["mu0_quadrature"],
        psi_quadrature=d["psi_quadrature"],
        psi_mc=d.get("psi_mc"),
        replicate_se=d.get("replicate_se"),
        abs_delta=d.get("abs_delta"),
    )
    return estimand_from_dict(d["estimand"]), report


def _oracle_csv(d: dict, out) -> None:
    writer = csv.writer(out, lineterminator="\n")
    method = d["method"]
    header = ["method", "mu1_quadrature", "mu0_quadrature", "psi_quadrature"]
    row = [method["method"], _fmt(d["mu1_quadrature"]), _fmt(d["mu0_quadrature"]),
           _fmt(d["psi_quadrature"])]
    if "psi_mc" in d:
        header += ["psi_mc", "replicate_se", "abs_delta"]
        row += [_fmt(d["psi_mc"]), _fmt(d["replicate_se"]), _fmt(d["abs_delta"])]
    writer.writerow(header)
    writer.writerow(row)


# --- diagnose ------------------------------------------------------------


def diagnose_report(estimand: EstimandSpec, kappa: KappaResult, master_seed: int) -> dict:
    return {
        "command": "diagnose",
        "estimand": estimand_to_dict(estimand),
        "master_seed": master_seed,
        "curve": [
            {"n": row.n, "mean": row.mean, "sd": row.sd, "replicates": row.replicates}
            for row in kappa.grid.rows
        ],
        "kappa": kappa.kappa,
        "decimal_places": kappa.decimal_places,
    }


def _load_diagnose(d: dict):
    curve = ErrorCurve(
        tuple(
            ErrorPoint(n=row["n"], mean=row["mean"], sd=row["sd"], replicates=row["replicates"])
            for row in d["curve"]
        )
    )
    kappa = KappaResult(kappa=d["kappa"], decimal_places=d["decimal_places"], grid=curve)
    return estimand_from_dict(d["estimand"]), kappa, d["master_seed"]


def _diagnose_csv(d: dict, out) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["n", "mean", "sd", "replicates", "kappa", "decimal_places"])
    kappa = "not found" if d["kappa"] is None else d["kappa"]
    for row in d["curve"]:
        writer.writerow(
            [row["n"], _fmt(row["mean"]), _fmt(row["sd"]), row["replicates"],
             kappa, d["decimal_places"]]
        )


# --- simstudy ------------------------------------------------------------

_PERF_FIELDS = (
    "bias",
    "bias_mcse",
    "empirical_se",
    "mse",
    "coverage",
    "coverage_mcse",
)


def simstudy_report(estimand: EstimandSpec, report: PerformanceReport) -> dict:
    rows = []
    for est in report.estimators:
        row = {"estimator": est.label, "n_failed": est.n_failed}
        for field in _PERF_FIELDS:
            row[field] = getattr(est, field)
        row["error"] = est.error
        if est.points is not None:
            row["points"] = list(est.points)
        rows.append(row)
    return {
        "command": "simstudy",
        "estimand": estimand_to_dict(estimand),
        "truth_used": report.truth_used,
        "n_sims": report.n_sims,
        "sample_size": report.sample_size,
        "master_seed": report.master_seed,
        "estimators": rows,
    }


def _load_simstudy(d: dict):
    performances = tuple(
        EstimatorPerformance(
            label=row["estimator"],
            truth_used=d["truth_used"],
            n_sims=d["n_sims"],
            n_failed=row["n_failed"],
            error=row["error"],
            points=tuple(row["points"]) if "points" in row else None,
            **{field: row[field] for field in _PERF_FIELDS},
        )
        for row in d["estimators"]
    )
    report = PerformanceReport(
        truth_used=d["truth_used"],
        n_sims=d["n_sims"],
        sample_size=d["sample_size"],
        master_seed=d["master_seed"],
        estimators=performances,
    )
    return estimand_from_dict(d["estimand"]), report


def _simstudy_csv(d: dict, out) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(
        ["estimator", "truth_used", "n_sims", "sample_size", "n_failed"]
        + list(_PERF_FIELDS)
        + ["error"]
    )
    for row in d["estimators"]:
        writer.writerow(
            [row["estimator"], _fmt(d["truth_used"]), d["n_sims"], d["sample_size"],
             row["n_failed"]]
            + [_fmt(row[field]) for field in _PERF_FIELDS]
            + [row["error"] if row["error"] is not None else ""]
        )


# --- validate ------------------------------------------------------------


def validation_report(violations: list[str]) -> dict:
    return {"command": "validate", "valid": not violations, "violations": list(violations)}


def _load_validate(d: dict):
    return list(d["violations"])


def _validate_csv(d: dict, out) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["violation"])
    for violation in d["violations"]:
        writer.writerow([violation])


# --- rendering and IO ----------------------------------------------------


def render_json(report: dict) -> str:
    return json.dumps(report, indent=2, allow_nan=False) + "\n"


_CSV_RENDERERS = {
    "truth": _truth_csv,
    "oracle": _oracle_csv,
    "diagnose": _diagnose_csv,
    "simstudy": _simstudy_csv,
    "validate": _validate_csv,
}

_LOADERS = {
    "truth": _load_truth,
    "oracle": _load_oracle,
    "diagnose": _load_diagnose,
    "simstudy": _load_simstudy,
    "validate": _load_validate,
}


def render_csv(report: dict) -> str:
    out = io.StringIO()
    _CSV_RENDERERS[report["command"]](report, out)
    return out.getvalue()


def load_report(text: str):
    """Parse a JSON report back into typed objects.

    Returns (estimand, TruthResult) for truth, (estimand, OracleReport)
    for oracle, (estimand, KappaResult, master_seed) for diagnose,
    (estimand, PerformanceReport) for simstudy, and the violation list
    for validate.
    """
    d = json.loads(text)
    return _LOADERS[d["command"]](d)


def write_output(text: str, path: str | None) -> None:
    """Write to ``path`` atomically, or to stdout when no path is given.

    The file either keeps its old content or holds the complete new
    report; a crash mid-write never leaves a truncated file behind.
    """
    if path is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".simtruth-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
