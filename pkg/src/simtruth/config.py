"""Config-file parsing for the command-line interface.

Configs are TOML text (conventionally ``.cfg``). The schema is strict:
every key is checked against the documented set and unknown keys are
hard errors, numeric fields are range-checked at parse time, and
cross-references (estimand nodes, empirical sources, estimator
covariates) must resolve. Each failure mode has its own error class so
callers can tell a typo from an out-of-range value.

The full schema is documented field by field in the project README.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Mapping

try:
    import tomllib as _toml
except ModuleNotFoundError:  # Python 3.10
    import tomli as _toml

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
)
from .engine import EvalMode, SeedSpec, ingest_empirical
from .errors import (
    ConfigError,
    ConfigParseError,
    DanglingReferenceError,
    RangeViolationError,
    UnknownKeyError,
)
from .oracle import AdaptiveSimpson, GaussHermite, QuadratureSpec
from .simstudy import IPW, ConditionalLogistic, EstimatorSpec, MarginalStandardization
from .truth import (
    ContrastScale,
    ControlledDirectEffect,
    EstimandSpec,
    MarginalOddsRatio,
    PotentialOutcomeContrast,
)

__all__ = [
    "RunConfig",
    "OracleBlock",
    "DiagnosticsBlock",
    "SimstudyBlock",
    "parse_config",
]

_U64 = 2**64


@dataclass(frozen=True)
class OracleBlock:
    spec: QuadratureSpec
    compare_mc: bool = False


@dataclass(frozen=True)
class DiagnosticsBlock:
    n_grid: tuple[int, ...]
    replicates_per_n: int
    decimal_places: int = 5


@dataclass(frozen=True)
class SimstudyBlock:
    n_sims: int
    sample_size: int
    estimators: tuple[EstimatorSpec, ...]
    keep_points: bool = False


@dataclass(frozen=True)
class RunConfig:
    """Everything one CLI invocation needs, parsed and cross-checked.

    ``estimand`` and the run parameters are optional at parse time;
    commands that need them fail with a config error if they are absent.
    At most one of the oracle, diagnostics and simstudy blocks may be
    present.
    """

    dgm: Dgm
    estimand: EstimandSpec | None = None
    n: int | None = None
    seed: SeedSpec | None = None
    replicates: int = 1
    outcome_mode: EvalMode = EvalMode.EXPECTATION
    oracle: OracleBlock | None = None
    diagnostics: DiagnosticsBlock | None = None
    simstudy: SimstudyBlock | None = None
    output_format: str = "json"
    output_path: str | None = None


def _expect_table(value, where: str) -> Mapping[str, Any]:
    if not isinstance(value, dict):
        raise RangeViolationError(f"{where}: expected a table, got {type(value).__name__}")
    return value


def _check_keys(table: Mapping[str, Any], allowed: set[str], required: set[str], where: str):
    for key in table:
        if key not in allowed:
            raise UnknownKeyError(f"{where}: unknown key {key!r}")
    for key in sorted(required):
        if key not in table:
            raise RangeViolationError(f"{where}: missing required key {key!r}")


def _real(table, key, where, *, default=None) -> float:
    if key not in table:
        if default is None:
            raise RangeViolationError(f"{where}: missing required key {key!r}")
        return default
    value = table[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise RangeViolationError(
            f"{where}.{key}: expected a number, got {type(value).__name__}"
        )
    value = float(value)
    if not math.isfinite(value):
        raise RangeViolationError(f"{where}.{key}: must be finite, got {value}")
    return value


def _count(table, key, where, *, minimum=1, maximum=None, default=None) -> int:
    if key not in table:
        if default is None:
            raise RangeViolationError(f"{where}: missing required key {key!r}")
        return default
    value = table[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise RangeViolationError(
            f"{where}.{key}: expected an integer, got {type(value).__name__}"
        )
    if value < minimum or (maximum is not None and value > maximum):
        bound = f">= {minimum}" if maximum is None else f"in [{minimum}, {maximum}]"
        raise RangeViolationError(f"{where}.{key}: must be {bound}, got {value}")
    return value


def _text(table, key, where, *, default=None, choices=None) -> str:
    if key not in table:
        if default is None:
            raise RangeViolationError(f"{where}: missing required key {key!r}")
        return default
    value = table[key]
    if not isinstance(value, str):
        raise RangeViolationError(
            f"{where}.{key}: expected a string, got {type(value).__name__}"
        )
    if choices is not None and value not in choices:
        raise RangeViolationError(
            f"{where}.{key}: must be one of {sorted(choices)}, got {value!r}"
        )
    return value


def _flag(table, key, where, *, default=False) -> bool:
    if key not in table:
        return default
    value = table[key]
    if not isinstance(value, bool):
        raise RangeViolationError(
            f"{where}.{key}: expected true or false, got {type(value).__name__}"
        )
    return value


def _parse_empirical(table, where: str) -> dict[str, EmpiricalSource]:
    sources = {}
    for name, body in _expect_table(table, where).items():
        sub = _expect_table(body, f"{where}.{name}")
        _check_keys(sub, {"path", "columns"}, {"path", "columns"}, f"{where}.{name}")
        path = _text(sub, "path", f"{where}.{name}")
        columns = sub["columns"]
        if not isinstance(columns, list) or not all(isinstance(c, str) for c in columns):
            raise RangeViolationError(
                f"{where}.{name}.columns: expected a list of column names"
            )
        sources[name] = ingest_empirical(path, columns, name=name)
    return sources


def _parse_node(table, where: str, sources: dict[str, EmpiricalSource]):
    _expect_table(table, where)
    kind = _text(table, "kind", where, choices={"exogenous", "structural"})
    name = _text(table, "name", where)

    if kind == "exogenous":
        dist_kind = _text(
            table, "dist", where, choices={"normal", "bernoulli", "uniform", "empirical"}
        )
        common = {"name", "kind", "dist"}
        if dist_kind == "normal":
            _check_keys(table, common | {"mean", "sd"}, {"mean", "sd"}, where)
            dist = Normal(mean=_real(table, "mean", where), sd=_real(table, "sd", where))
        elif dist_kind == "bernoulli":
            _check_keys(table, common | {"p"}, {"p"}, where)
            dist = Bernoulli(p=_real(table, "p", where))
        elif dist_kind == "uniform":
            _check_keys(table, common | {"low", "high"}, {"low", "high"}, where)
            dist = Uniform(low=_real(table, "low", where), high=_real(table, "high", where))
        else:
            _check_keys(table, common | {"source", "column"}, {"source", "column"}, where)
            source_name = _text(table, "source", where)
            if source_name not in sources:
                raise DanglingReferenceError(
                    f"{where}.source: no [empirical.{source_name}] section is declared"
                )
            dist = Empirical(source=sources[source_name], column=_text(table, "column", where))
        return ExogenousNode(name=name, dist=dist)

    allowed = {"name", "kind", "intercept", "terms", "link", "noise", "noise_sd"}
    _check_keys(table, allowed, {"intercept", "terms", "link"}, where)
    terms_table = _expect_table(table["terms"], f"{where}.terms")
    terms = tuple((parent, _real(terms_table, parent, f"{where}.terms")) for parent in terms_table)
    link = Link(_text(table, "link", where, choices={"identity", "expit", "exp"}))
    noise_kind = _text(table, "noise", where, default="none", choices={"none", "bernoulli", "gaussian"})
    if noise_kind == "gaussian":
        noise = GaussianDraw(sd=_real(table, "noise_sd", where))
    else:
        if "noise_sd" in table:
            raise UnknownKeyError(f"{where}.noise_sd: only valid with noise = \"gaussian\"")
        noise = BernoulliDraw() if noise_kind == "bernoulli" else None
    return StructuralNode(
        name=name,
        intercept=_real(table, "intercept", where),
        terms=terms,
        link=link,
        noise=noise,
    )


def _parse_intervention(value, where: str) -> Intervention:
    table = _expect_table(value, where)
    assignments = {}
    for node, assigned in table.items():
        if isinstance(assigned, bool) or not isinstance(assigned, (int, float)):
            raise RangeViolationError(f"{where}.{node}: expected a number")
        assignments[node] = float(assigned)
    return Intervention(assignments)


_CONTRASTS = {"difference": ContrastScale.DIFFERENCE, "ratio": ContrastScale.RATIO,
              "odds_ratio": ContrastScale.ODDS_RATIO}


def _parse_estimand(table, where: str) -> EstimandSpec:
    _expect_table(table, where)
    kind = _text(
        table,
        "kind",
        where,
        choices={"marginal_odds_ratio", "controlled_direct_effect", "potential_outcome_contrast"},
    )
    try:
        if kind == "marginal_odds_ratio":
            _check_keys(table, {"kind", "exposure", "a1", "a0"}, {"exposure"}, where)
            return MarginalOddsRatio(
                exposure=_text(table, "exposure", where),
                a1=_real(table, "a1", where, default=1.0),
                a0=_real(table, "a0", where, default=0.0),
            )
        if kind == "controlled_direct_effect":
            _check_keys(
                table,
                {"kind", "exposure", "mediator", "m", "a1", "a0", "scale"},
                {"exposure", "mediator"},
                where,
            )
            return ControlledDirectEffect(
                exposure=_text(table, "exposure", where),
                mediator=_text(table, "mediator", where),
                m=_real(table, "m", where, default=0.0),
                a1=_real(table, "a1", where, default=1.0),
                a0=_real(table, "a0", where, default=0.0),
                scale=_CONTRASTS[_text(table, "scale", where, default="difference",
                                       choices={"difference", "ratio"})],
            )
        _check_keys(
            table,
            {"kind", "intervention_a", "intervention_b", "contrast"},
            {"intervention_a", "intervention_b"},
            where,
        )
        return PotentialOutcomeContrast(
            intervention_a=_parse_intervention(table["intervention_a"], f"{where}.intervention_a"),
            intervention_b=_parse_intervention(table["intervention_b"], f"{where}.intervention_b"),
            contrast=_CONTRASTS[_text(table, "contrast", where, default="difference",
                                      choices=set(_CONTRASTS))],
        )
    except ValueError as exc:
        raise RangeViolationError(f"{where}: {exc}") from None


def _parse_oracle(table, where: str) -> OracleBlock:
    _expect_table(table, where)
    method = _text(table, "method", where, choices={"gauss_hermite", "adaptive_simpson"})
    try:
        if method == "gauss_hermite":
            _check_keys(table, {"method", "nodes", "compare_mc"}, set(), where)
            spec = GaussHermite(nodes=_count(table, "nodes", where, minimum=2, maximum=200, default=64))
        else:
            _check_keys(table, {"method", "abs_tol", "range_sigmas", "compare_mc"}, set(), where)
            spec = AdaptiveSimpson(
                abs_tol=_real(table, "abs_tol", where, default=1e-12),
                range_sigmas=_real(table, "range_sigmas", where, default=10.0),
            )
    except ValueError as exc:
        raise RangeViolationError(f"{where}: {exc}") from None
    return OracleBlock(spec=spec, compare_mc=_flag(table, "compare_mc", where))


def _parse_diagnostics(table, where: str) -> DiagnosticsBlock:
    _expect_table(table, where)
    _check_keys(
        table,
        {"n_grid", "replicates_per_n", "decimal_places"},
        {"n_grid", "replicates_per_n"},
        where,
    )
    grid_raw = table["n_grid"]
    if (
        not isinstance(grid_raw, list)
        or not grid_raw
        or not all(isinstance(n, int) and not isinstance(n, bool) and n >= 1 for n in grid_raw)
    ):
        raise RangeViolationError(f"{where}.n_grid: expected a nonempty list of counts >= 1")
    if any(b <= a for a, b in zip(grid_raw, grid_raw[1:])):
        raise RangeViolationError(f"{where}.n_grid: must be strictly increasing, got {grid_raw}")
    return DiagnosticsBlock(
        n_grid=tuple(grid_raw),
        replicates_per_n=_count(table, "replicates_per_n", where, minimum=2),
        decimal_places=_count(table, "decimal_places", where, minimum=1, default=5),
    )


def _parse_estimator(table, where: str) -> EstimatorSpec:
    _expect_table(table, where)
    kind = _text(
        table,
        "kind",
        where,
        choices={"conditional_logistic", "marginal_standardization", "ipw"},
    )
    level = _real(table, "confidence_level", where, default=0.95)
    try:
        if kind == "conditional_logistic":
            _check_keys(table, {"kind", "exposure", "confidence_level"}, {"exposure"}, where)
            return ConditionalLogistic(
                exposure=_text(table, "exposure", where), confidence_level=level
            )
        if kind == "marginal_standardization":
            _check_keys(
                table,
                {"kind", "exposure", "a1", "a0", "contrast", "bootstrap_reps", "confidence_level"},
                {"exposure"},
                where,
            )
            return MarginalStandardization(
                exposure=_text(table, "exposure", where),
                a1=_real(table, "a1", where, default=1.0),
                a0=_real(table, "a0", where, default=0.0),
                contrast=_CONTRASTS[_text(table, "contrast", where, default="odds_ratio",
                                          choices={"odds_ratio", "difference"})],
                bootstrap_reps=_count(table, "bootstrap_reps", where, minimum=100, default=500),
                confidence_level=level,
            )
        _check_keys(
            table,
            {"kind", "exposure", "propensity_covariates", "contrast", "bootstrap_reps",
             "confidence_level", "truncate_at", "warn_weight"},
            {"exposure", "propensity_covariates"},
            where,
        )
        covs = table["propensity_covariates"]
        if not isinstance(covs, list) or not covs or not all(isinstance(c, str) for c in covs):
            raise RangeViolationError(
                f"{where}.propensity_covariates: expected a nonempty list of node names"
            )
        truncate = None
        if "truncate_at" in table:
            truncate = _real(table, "truncate_at", where)
        return IPW(
            exposure=_text(table, "exposure", where),
            propensity_covariates=tuple(covs),
            contrast=_CONTRASTS[_text(table, "contrast", where, default="odds_ratio",
                                      choices={"odds_ratio", "difference"})],
            bootstrap_reps=_count(table, "bootstrap_reps", where, minimum=100, default=500),
            confidence_level=level,
            truncate_at=truncate,
            warn_weight=_real(table, "warn_weight", where, default=100.0),
        )
    except ValueError as exc:
        raise RangeViolationError(f"{where}: {exc}") from None


def _parse_simstudy(table, where: str) -> SimstudyBlock:
    _expect_table(table, where)
    _check_keys(
        table,
        {"n_sims", "sample_size", "keep_points", "estimator"},
        {"n_sims", "sample_size", "estimator"},
        where,
    )
    raw = table["estimator"]
    if not isinstance(raw, list) or not raw:
        raise RangeViolationError(f"{where}.estimator: expected at least one [[{where}.estimator]]")
    estimators = tuple(
        _parse_estimator(entry, f"{where}.estimator[{i}]") for i, entry in enumerate(raw)
    )
    return SimstudyBlock(
        n_sims=_count(table, "n_sims", where, minimum=2),
        sample_size=_count(table, "sample_size", where, minimum=1),
        estimators=estimators,
        keep_points=_flag(table, "keep_points", where),
    )


def _estimand_nodes(estimand: EstimandSpec) -> set[str]:
    if isinstance(estimand, MarginalOddsRatio):
        return {estimand.exposure}
    if isinstance(estimand, ControlledDirectEffect):
        return {estimand.exposure, estimand.mediator}
    names = set(estimand.intervention_a.assignments)
    names.update(estimand.intervention_b.assignments)
    return names


def parse_config(path: str) -> RunConfig:
    """Parse and cross-check one config file.

    Raises ConfigParseError (bad TOML, with the position in the
    message), UnknownKeyError, RangeViolationError, or
    DanglingReferenceError. Empirical data files referenced by the
    config are ingested here, so IngestionError can propagate too.
    """
    try:
        with open(path, "rb") as handle:
            raw = _toml.load(handle)
    except _toml.TOMLDecodeError as exc:
        raise ConfigParseError(f"{path}: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None

    _check_keys(
        raw,
        {"dgm", "estimand", "run", "empirical", "oracle", "diagnostics", "simstudy", "output"},
        {"dgm"},
        "config",
    )

    sources = _parse_empirical(raw.get("empirical", {}), "empirical")

    dgm_table = _expect_table(raw["dgm"], "dgm")
    _check_keys(dgm_table, {"outcome", "node"}, {"outcome", "node"}, "dgm")
    nodes_raw = dgm_table["node"]
    if not isinstance(nodes_raw, list) or not nodes_raw:
        raise RangeViolationError("dgm.node: expected at least one [[dgm.node]]")
    nodes = tuple(
        _parse_node(entry, f"dgm.node[{i}]", sources) for i, entry in enumerate(nodes_raw)
    )
    dgm = Dgm(nodes=nodes, outcome=_text(dgm_table, "outcome", "dgm"))

    estimand = None
    if "estimand" in raw:
        estimand = _parse_estimand(raw["estimand"], "estimand")
        missing = sorted(_estimand_nodes(estimand) - set(dgm.names))
        if missing:
            raise DanglingReferenceError(
                f"estimand references undeclared nodes: {', '.join(missing)}"
            )

    n = None
    seed = None
    replicates = 1
    outcome_mode = EvalMode.EXPECTATION
    if "run" in raw:
        run = _expect_table(raw["run"], "run")
        _check_keys(
            run,
            {"n", "master_seed", "chunk_size", "replicates", "outcome_mode"},
            {"n", "master_seed"},
            "run",
        )
        n = _count(run, "n", "run", minimum=1)
        master_seed = _count(run, "master_seed", "run", minimum=0, maximum=_U64 - 1)
        chunk_size = _count(run, "chunk_size", "run", minimum=1, default=1 << 20)
        replicates = _count(run, "replicates", "run", minimum=1, default=1)
        outcome_mode = EvalMode(
            _text(run, "outcome_mode", "run", default="expectation",
                  choices={"expectation", "draw"})
        )
        seed = SeedSpec(master_seed, chunk_size)

    oracle_block = _parse_oracle(raw["oracle"], "oracle") if "oracle" in raw else None
    diagnostics_block = (
        _parse_diagnostics(raw["diagnostics"], "diagnostics") if "diagnostics" in raw else None
    )
    simstudy_block = _parse_simstudy(raw["simstudy"], "simstudy") if "simstudy" in raw else None
    present = [
        name
        for name, block in [
            ("oracle", oracle_block),
            ("diagnostics", diagnostics_block),
            ("simstudy", simstudy_block),
        ]
        if block is not None
    ]
    if len(present) > 1:
        raise ConfigError(
            f"at most one command block is allowed per config, found {', '.join(present)}"
        )

    if simstudy_block is not None:
        names = set(dgm.names)
        for est in simstudy_block.estimators:
            referenced = {est.exposure}
            if isinstance(est, IPW):
                referenced.update(est.propensity_covariates)
            missing = sorted(referenced - names)
            if missing:
                raise DanglingReferenceError(
                    f"estimator {est.label()} references undeclared nodes: {', '.join(missing)}"
                )

    output_format = "json"
    output_path = None
    if "output" in raw:
        out = _expect_table(raw["output"], "output")
        _check_keys(out, {"format", "path"}, set(), "output")
        output_format = _text(out, "format", "output", default="json", choices={"csv", "json"})
        if "path" in out:
            output_path = _text(out, "path", "output")

    return RunConfig(
        dgm=dgm,
        estimand=estimand,
        n=n,
        seed=seed,
        replicates=replicates,
        outcome_mode=outcome_mode,
        oracle=oracle_block,
        diagnostics=diagnostics_block,
        simstudy=simstudy_block,
        output_format=output_format,
        output_path=output_path,
    )
