"""Seeded simulation of data-generating mechanisms.

Reproducibility scheme
----------------------
Every random draw comes from a counter-based Philox stream addressed by
``(master_seed, domain, key, chunk_index)`` through numpy's SeedSequence.
Observations are split into fixed-size chunks; chunk k of node X always
sees the same stream no matter how many worker threads run, how many
other nodes exist, or which other chunks were computed first. That gives:

* bit-identical output for identical ``(master_seed, chunk_size, n)``,
  with any thread count;
* per-node substreams keyed by a hash of the node *name*, so adding or
  removing a node never shifts the draws of the others;
* shared streams across counterfactual branches: a pair of intervened
  worlds reuses one set of noise draws and differs only through the
  structural equations (common random numbers).

One uniform per variate: Normal draws go through the inverse CDF, 0/1
draws threshold a uniform, empirical draws turn one uniform into a row
index. A node evaluated in expectation mode, or held fixed by an
intervention, consumes nothing, which keeps the draw count auditable.

Uniforms are offset by 2**-54 to lie strictly inside (0, 1) so the
inverse CDF stays finite.
"""

from __future__ import annotations

import csv
import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.special import ndtri

from .dgm import (
    Bernoulli,
    BernoulliDraw,
    Dgm,
    Empirical,
    EmpiricalSource,
    ExogenousNode,
    GaussianDraw,
    Intervention,
    Normal,
    StructuralNode,
    Uniform,
    apply_link,
    as_intervention,
    check_dgm,
)
from .errors import IngestionError, ValidationError

__all__ = [
    "SeedSpec",
    "EvalMode",
    "Dataset",
    "DrawAudit",
    "simulate",
    "simulate_counterfactual_pair",
    "ingest_empirical",
    "derive_seed",
    "substream",
]

_U64 = 2**64

# Stream domains. Distinct leading tags keep node streams, empirical row
# streams, and derived seeds from ever colliding.
_DOMAIN_NODE = 1
_DOMAIN_EMPIRICAL = 2
_DOMAIN_DERIVE = 3

# Half the spacing of the 53-bit uniform lattice; see module docstring.
_OPEN_OFFSET = 2.0**-54


def _name_key(name: str) -> int:
    """Stable 64-bit key for a node or source name."""
    return int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:8], "little")


def substream(master_seed: int, *key: int) -> np.random.Generator:
    """Philox generator for one addressed stream."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(master_seed: int, *key: int) -> int:
    """Collapse an address into a fresh 64-bit master seed."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(_DOMAIN_DERIVE, *map(int, key)))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class SeedSpec:
    """Master seed plus the chunk size the stream layout is built on.

    Two runs agree bit for bit exactly when master_seed, chunk_size and
    the observation count all agree. The chunk size trades scheduling
    granularity against per-chunk overhead; results never depend on how
    chunks are assigned to threads.
    """

    master_seed: int
    chunk_size: int = 1 << 20

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < _U64:
            raise ValueError(f"master_seed must be a 64-bit unsigned int, got {self.master_seed}")
        if int(self.chunk_size) < 1:
            raise ValueError(f"chunk_size must be >= 1, got {self.chunk_size}")
        object.__setattr__(self, "master_seed", int(self.master_seed))
        object.__setattr__(self, "chunk_size", int(self.chunk_size))


class EvalMode(Enum):
    """How the terminal outcome node is evaluated.

    DRAW realizes the outcome's stochastic draw. EXPECTATION returns the
    link-transformed linear predictor itself (the conditional mean given
    the parents) and consumes no randomness for the outcome, removing
    that draw's contribution to Monte Carlo error entirely.
    """

    DRAW = "draw"
    EXPECTATION = "expectation"


@dataclass(frozen=True)
class Dataset:
    """Column store produced by one simulation run.

    ``outcome`` records which column the generating mechanism treats as
    the outcome, so downstream consumers need no side channel.
    """

    columns: Mapping[str, np.ndarray]
    n: int
    outcome: str | None = None

    def __post_init__(self):
        for name, col in self.columns.items():
            if len(col) != self.n:
                raise ValueError(
                    f"column {name!r} has length {len(col)}, expected n={self.n}"
                )

    def column(self, name: str) -> np.ndarray:
        return self.columns[name]


@dataclass
class DrawAudit:
    """Tally of uniforms consumed per stream during one simulation call.

    Keys are node names, or ``"empirical:<source>"`` for shared row-index
    streams. Useful for asserting that expectation mode and interventions
    really consume nothing.
    """

    counts: dict[str, int] = field(default_factory=dict)

    def _add(self, label: str, k: int) -> None:
        self.counts[label] = self.counts.get(label, 0) + k

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def _chunk_bounds(n: int, chunk_size: int) -> list[tuple[int, int, int]]:
    return [(k, lo, min(lo + chunk_size, n)) for k, lo in enumerate(range(0, n, chunk_size))]


def _node_uniforms(seed: SeedSpec, key: int, chunk: int, m: int) -> np.ndarray:
    rng = substream(seed.master_seed, _DOMAIN_NODE, key, chunk)
    return rng.random(m) + _OPEN_OFFSET


def _source_rows(seed: SeedSpec, source: EmpiricalSource, chunk: int, m: int) -> np.ndarray:
    rng = substream(seed.master_seed, _DOMAIN_EMPIRICAL, _name_key(source.name), chunk)
    u = rng.random(m) + _OPEN_OFFSET
    idx = (u * source.n_rows).astype(np.int64)
    # u < 1 makes overflow all but impossible; clip anyway.
    return np.minimum(idx, source.n_rows - 1)


def _check_interventions(dgm: Dgm, interventions: Sequence[Intervention]) -> None:
    names = set(dgm.names)
    bad = sorted(
        {a for itv in interventions for a in itv.assignments if a not in names}
    )
    if bad:
        raise ValidationError(
            [f"intervention assigns undeclared node {name!r}" for name in bad]
        )


def _exogenous_expectation(dist) -> float:
    if isinstance(dist, Normal):
        return dist.mean
    if isinstance(dist, Bernoulli):
        return dist.p
    if isinstance(dist, Uniform):
        return 0.5 * (dist.low + dist.high)
    if isinstance(dist, Empirical):
        return float(np.mean(dist.source.columns[dist.column]))
    raise ValueError(f"unknown distribution {type(dist).__name__}")


def _simulate_branches(
    dgm: Dgm,
    n: int,
    seed: SeedSpec,
    interventions: Sequence[Intervention],
    outcome_mode: EvalMode,
    threads: int,
    audit: DrawAudit | None,
) -> list[dict[str, np.ndarray]]:
    check_dgm(dgm)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    _check_interventions(dgm, interventions)

    n_br = len(interventions)
    out = [
        {node.name: np.empty(n, dtype=np.float64) for node in dgm.nodes}
        for _ in range(n_br)
    ]
    fixed = [itv.assignments for itv in interventions]

    def run_chunk(task: tuple[int, int, int]) -> dict[str, int]:
        chunk, lo, hi = task
        m = hi - lo
        consumed: dict[str, int] = {}
        cols: list[dict[str, np.ndarray]] = [{} for _ in range(n_br)]
        row_idx: dict[str, np.ndarray] = {}

        # Row indices are drawn once per source so that every empirical
        # node of that source lands on the same resampled rows.
        sources_needed: dict[str, EmpiricalSource] = {}
        for node in dgm.nodes:
            if isinstance(node, ExogenousNode) and isinstance(node.dist, Empirical):
                if node.name == dgm.outcome and outcome_mode is EvalMode.EXPECTATION:
                    continue
                if any(node.name not in fx for fx in fixed):
                    src = node.dist.source
                    sources_needed.setdefault(src.name, src)
        for sname, src in sources_needed.items():
            row_idx[sname] = _source_rows(seed, src, chunk, m)
            consumed[f"empirical:{sname}"] = m

        for node in dgm.nodes:
            expectation_here = node.name == dgm.outcome and outcome_mode is EvalMode.EXPECTATION
            live = [b for b in range(n_br) if node.name not in fixed[b]]

            u: np.ndarray | None = None
            z: np.ndarray | None = None

            def uniforms() -> np.ndarray:
                # Drawn at most once per node and chunk; branches share.
                nonlocal u
                if u is None:
                    u = _node_uniforms(seed, _name_key(node.name), chunk, m)
                    consumed[node.name] = consumed.get(node.name, 0) + m
                return u

            def gaussians() -> np.ndarray:
                nonlocal z
                if z is None:
                    z = ndtri(uniforms())
                return z

            for b in range(n_br):
                if node.name in fixed[b]:
                    cols[b][node.name] = np.full(m, fixed[b][node.name])
                    continue
                if isinstance(node, ExogenousNode):
                    if b != live[0]:
                        # Branches share the stream, so the value is
                        # identical by construction; reuse the array.
                        cols[b][node.name] = cols[live[0]][node.name]
                        continue
                    dist = node.dist
                    if expectation_here:
                        value = np.full(m, _exogenous_expectation(dist))
                    elif isinstance(dist, Normal):
                        value = dist.mean + dist.sd * gaussians()
                    elif isinstance(dist, Bernoulli):
                        value = (uniforms() < dist.p).astype(np.float64)
                    elif isinstance(dist, Uniform):
                        value = dist.low + (dist.high - dist.low) * uniforms()
                    elif isinstance(dist, Empirical):
                        rows = row_idx[dist.source.name]
                        value = np.asarray(
                            dist.source.columns[dist.column], dtype=np.float64
                        )[rows]
                    else:
                        raise ValueError(f"unknown distribution {type(dist).__name__}")
                else:
                    lp = np.full(m, node.intercept)
                    for parent, coef in node.terms:
                        lp += coef * cols[b][parent]
                    value = apply_link(node.link, lp)
                    if node.noise is None or expectation_here:
                        pass
                    elif isinstance(node.noise, BernoulliDraw):
                        value = (uniforms() < value).astype(np.float64)
                    elif isinstance(node.noise, GaussianDraw):
                        value = value + node.noise.sd * gaussians()
                    else:
                        raise ValueError(f"unknown noise {type(node.noise).__name__}")
                cols[b][node.name] = value

            for b in range(n_br):
                out[b][node.name][lo:hi] = cols[b][node.name]

        return consumed

    tasks = _chunk_bounds(n, seed.chunk_size)
    if threads > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            tallies = list(pool.map(run_chunk, tasks))
    else:
        tallies = [run_chunk(t) for t in tasks]

    if audit is not None:
        for tally in tallies:
            for label, k in tally.items():
                audit._add(label, k)

    for branch in out:
        for arr in branch.values():
            arr.flags.writeable = False
    return out


def simulate(
    dgm: Dgm,
    n: int,
    seed: SeedSpec,
    intervention: Intervention | Mapping[str, float] | None = None,
    outcome_mode: EvalMode = EvalMode.DRAW,
    *,
    threads: int = 1,
    audit: DrawAudit | None = None,
) -> Dataset:
    """Simulate n observations of a mechanism under an optional intervention.

    Nodes are evaluated in declaration order. Intervened nodes become the
    assigned constant and never touch their random stream, so the draws of
    every other node are exactly those of the unintervened run.

    Parameters
    ----------
    dgm : Dgm
        Mechanism to simulate; must pass validation.
    n : int
        Observation count, at least 1.
    seed : SeedSpec
        Master seed and chunk layout. Fixing (master_seed, chunk_size, n)
        fixes the output bit for bit, with any ``threads`` value.
    intervention : mapping or Intervention, optional
        Node name to fixed value.
    outcome_mode : EvalMode
        DRAW realizes the outcome; EXPECTATION stores its conditional
        mean instead and consumes no randomness for it.
    threads : int
        Worker threads for chunk evaluation. Affects wall time only.
    audit : DrawAudit, optional
        If given, receives per-stream counts of consumed uniforms.
    """
    branch = _simulate_branches(
        dgm, n, seed, [as_intervention(intervention)], outcome_mode, threads, audit
    )[0]
    return Dataset(columns=branch, n=n, outcome=dgm.outcome)


def simulate_counterfactual_pair(
    dgm: Dgm,
    n: int,
    seed: SeedSpec,
    intervention_a: Intervention | Mapping[str, float],
    intervention_b: Intervention | Mapping[str, float],
    outcome_mode: EvalMode = EvalMode.DRAW,
    *,
    threads: int = 1,
    audit: DrawAudit | None = None,
) -> tuple[Dataset, Dataset]:
    """Simulate two intervened worlds on one set of noise draws.

    Branches share every stream: exogenous draws, structural noise, and
    empirical row picks all coincide, so the branches differ only where
    the interventions make them differ. Each branch is bit-identical to
    the single ``simulate`` call with the same arguments; running the
    pair together just avoids paying for the shared draws twice.

    With equal interventions the two datasets are identical, and any
    node whose inputs agree across branches gets identical columns.
    """
    a, b = as_intervention(intervention_a), as_intervention(intervention_b)
    cols_a, cols_b = _simulate_branches(dgm, n, seed, [a, b], outcome_mode, threads, audit)
    return (
        Dataset(columns=cols_a, n=n, outcome=dgm.outcome),
        Dataset(columns=cols_b, n=n, outcome=dgm.outcome),
    )


def ingest_empirical(
    path: str | os.PathLike, columns: Sequence[str], name: str | None = None
) -> EmpiricalSource:
    """Load columns of a CSV file as a joint empirical source.

    The file needs a header row; requested columns are parsed as decimal
    reals. Any row where a requested cell fails to parse is a hard error
    naming the row and column, never silently skipped. A file with a
    header but no data rows is rejected.

    Nodes built on the returned source resample whole rows, so the
    associations between its columns are preserved in simulated data.
    """
    columns = list(columns)
    if not columns:
        raise ValueError("at least one column must be requested")
    try:
        handle = open(path, "r", newline="", encoding="utf-8")
    except OSError as exc:
        raise IngestionError(f"cannot open {os.fspath(path)!r}: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{os.fspath(path)!r} is empty, expected a header row") from None
        header = [h.strip() for h in header]
        missing = [c for c in columns if c not in header]
        if missing:
            raise IngestionError(
                f"{os.fspath(path)!r} is missing requested columns {missing} "
                f"(header has {header})"
            )
        pos = {c: header.index(c) for c in columns}
        data: dict[str, list[float]] = {c: [] for c in columns}
        for rownum, row in enumerate(reader, start=2):
            for c in columns:
                try:
                    cell = row[pos[c]]
                except IndexError:
                    raise IngestionError(
                        f"{os.fspath(path)!r} line {rownum}: row too short for column {c!r}"
                    ) from None
                try:
                    data[c].append(float(cell))
                except ValueError:
                    raise IngestionError(
                        f"{os.fspath(path)!r} line {rownum}: cannot parse {cell!r} "
                        f"in column {c!r} as a real number"
                    ) from None
    if not data[columns[0]]:
        raise IngestionError(f"{os.fspath(path)!r} has no data rows")
    arrays = {}
    for c in columns:
        arr = np.asarray(data[c], dtype=np.float64)
        arr.flags.writeable = False
        arrays[c] = arr
    return EmpiricalSource(name=name if name is not None else os.fspath(path), columns=arrays)
