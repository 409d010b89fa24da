"""Monte Carlo error diagnostics: error-vs-N curves, stability boundaries,
and seed sweeps.

A truth value computed by simulation carries Monte Carlo error that
shrinks as the simulation size N grows. These tools quantify it: run the
same estimand at several N with replicated seeds (``error_vs_n``), find
the smallest N past which the value stops moving at a chosen decimal
place (``detect_kappa``), and check sensitivity to the master seed
directly (``seed_sweep``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dgm import Dgm
from .engine import SeedSpec
from .truth import EstimandSpec, compute_truth

__all__ = [
    "ErrorPoint",
    "ErrorCurve",
    "KappaResult",
    "SweepPoint",
    "SeedSweepResult",
    "error_vs_n",
    "detect_kappa",
    "seed_sweep",
]


@dataclass(frozen=True)
class ErrorPoint:
    n: int
    mean: float
    sd: float
    replicates: int


@dataclass(frozen=True)
class ErrorCurve:
    """Replicate mean and SD of an estimand at increasing simulation sizes."""

    rows: tuple[ErrorPoint, ...]

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        ns = [row.n for row in self.rows]
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValueError(f"rows must have strictly increasing n, got {ns}")
        for row in self.rows:
            if row.sd < 0:
                raise ValueError(f"negative sd at n={row.n}")
            if row.replicates < 2:
                raise ValueError(f"need >= 2 replicates per row, got {row.replicates} at n={row.n}")


@dataclass(frozen=True)
class KappaResult:
    """Stability boundary of an error curve at a decimal-place tolerance.

    ``kappa`` is the smallest grid n whose mean every larger grid point
    stays within 10**(-decimal_places) of, or None when the grid never
    settles ("not found"). The largest grid point cannot be the answer:
    with nothing larger to compare against it carries no evidence of
    stability.
    """

    kappa: int | None
    decimal_places: int
    grid: ErrorCurve

    @property
    def found(self) -> bool:
        return self.kappa is not None


def error_vs_n(
    dgm: Dgm,
    estimand: EstimandSpec,
    n_grid: Sequence[int],
    replicates_per_n: int,
    seed: SeedSpec,
    *,
    threads: int = 1,
) -> ErrorCurve:
    """Estimand mean and SD across seed replicates at each grid size.

    The grid must be nonempty and strictly increasing, and at least two
    replicates per size are needed for an SD. Fixed inputs reproduce the
    curve bit for bit.
    """
    grid = [int(n) for n in n_grid]
    if not grid:
        raise ValueError("n_grid must be nonempty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError(f"n_grid must be strictly increasing, got {grid}")
    if replicates_per_n < 2:
        raise ValueError(f"replicates_per_n must be >= 2, got {replicates_per_n}")

    rows = []
    for n in grid:
        result = compute_truth(
            dgm, estimand, n, seed, replicates=replicates_per_n, threads=threads
        )
        rows.append(
            ErrorPoint(
                n=n, mean=result.value, sd=result.replicate_se, replicates=replicates_per_n
            )
        )
    return ErrorCurve(rows=tuple(rows))


def detect_kappa(curve: ErrorCurve, decimal_places: int = 5) -> KappaResult:
    """Smallest grid n past which the mean stops moving at a decimal place.

    Suffix-stable definition: a grid point qualifies when every LARGER
    grid point's mean differs from its own by less than
    10**(-decimal_places). Checking all larger points, not just the
    neighbor, keeps a lucky adjacent pair from declaring stability the
    rest of the grid contradicts.

    Pure function of the curve's means and ``decimal_places``.
    """
    if decimal_places < 1:
        raise ValueError(f"decimal_places must be >= 1, got {decimal_places}")
    if len(curve.rows) < 2:
        raise ValueError("need at least 2 grid points to assess stability")
    tol = 10.0 ** (-decimal_places)
    means = [row.mean for row in curve.rows]
    for i, row in enumerate(curve.rows[:-1]):
        if all(abs(m - means[i]) < tol for m in means[i + 1 :]):
            return KappaResult(kappa=row.n, decimal_places=decimal_places, grid=curve)
    return KappaResult(kappa=None, decimal_places=decimal_places, grid=curve)


@dataclass(frozen=True)
class SweepPoint:
    seed: int
    value: float


@dataclass(frozen=True)
class SeedSweepResult:
    """One truth evaluation per master seed, plus the max-min range."""

    points: tuple[SweepPoint, ...]
    range: float


def seed_sweep(
    dgm: Dgm,
    estimand: EstimandSpec,
    n: int,
    seeds: Sequence[int],
    *,
    chunk_size: int = 1 << 20,
    threads: int = 1,
) -> SeedSweepResult:
    """Recompute one truth value under each listed master seed.

    Listing a seed twice reproduces its value exactly; the range says
    how much the computed truth moves with the seed at this n.
    """
    seeds = [int(s) for s in seeds]
    if len(seeds) < 2:
        raise ValueError(f"need at least 2 seeds, got {len(seeds)}")
    points = []
    for s in seeds:
        result = compute_truth(
            dgm, estimand, n, SeedSpec(s, chunk_size), replicates=1, threads=threads
        )
        points.append(SweepPoint(seed=s, value=result.value))
    values = [p.value for p in points]
    return SeedSweepResult(points=tuple(points), range=float(np.max(values) - np.min(values)))
