"""True estimand values by Monte Carlo integration.

The recipe behind every operation here is the same: intervene on the
mechanism, simulate a large number of observations with the outcome in
expectation mode (so the terminal draw contributes no extra Monte Carlo
error), average the outcome column, and contrast the averages between
two intervened worlds. Uncertainty in the computed value is measured by
repeating the whole procedure under independently derived seeds and
taking the standard deviation across those replicates.

Both intervened worlds run on common random numbers: the same underlying
draws feed both branches, which removes between-branch noise from the
contrast entirely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping

import numpy as np

from .dgm import Dgm, Intervention, Link, StructuralNode, as_intervention
from .engine import EvalMode, SeedSpec, derive_seed, simulate, simulate_counterfactual_pair
from .errors import DegenerateProbabilityError

__all__ = [
    "ContrastScale",
    "MarginalOddsRatio",
    "ControlledDirectEffect",
    "PotentialOutcomeContrast",
    "EstimandSpec",
    "TruthResult",
    "potential_outcome_mean",
    "marginal_odds_ratio",
    "controlled_direct_effect",
    "potential_outcome_contrast",
    "compute_truth",
]

# Subkey under which per-replicate master seeds are derived.
_REPLICATE_TAG = 10


class ContrastScale(Enum):
    DIFFERENCE = "difference"
    RATIO = "ratio"
    ODDS_RATIO = "odds_ratio"


@dataclass(frozen=True)
class MarginalOddsRatio:
    """Marginally adjusted odds ratio between do(exposure=a1) and do(exposure=a0)."""

    exposure: str
    a1: float = 1.0
    a0: float = 0.0

    def __post_init__(self):
        if self.a1 == self.a0:
            raise ValueError("a1 and a0 must differ")


@dataclass(frozen=True)
class ControlledDirectEffect:
    """Effect of the exposure on the outcome with the mediator held at m."""

    exposure: str
    mediator: str
    m: float = 0.0
    a1: float = 1.0
    a0: float = 0.0
    scale: ContrastScale = ContrastScale.DIFFERENCE

    def __post_init__(self):
        if self.a1 == self.a0:
            raise ValueError("a1 and a0 must differ")
        if self.exposure == self.mediator:
            raise ValueError("exposure and mediator must be distinct nodes")
        if self.scale not in (ContrastScale.DIFFERENCE, ContrastScale.RATIO):
            raise ValueError("controlled direct effects use Difference or Ratio scale")


@dataclass(frozen=True)
class PotentialOutcomeContrast:
    """Arbitrary contrast of outcome means under two interventions."""

    intervention_a: Intervention
    intervention_b: Intervention
    contrast: ContrastScale = ContrastScale.DIFFERENCE

    def __post_init__(self):
        object.__setattr__(self, "intervention_a", as_intervention(self.intervention_a))
        object.__setattr__(self, "intervention_b", as_intervention(self.intervention_b))


EstimandSpec = MarginalOddsRatio | ControlledDirectEffect | PotentialOutcomeContrast


@dataclass(frozen=True)
class TruthResult:
    """A computed true value plus the bookkeeping needed to reproduce it.

    ``value`` is the mean of the estimand over seed replicates and
    ``replicate_se`` the standard deviation across them (None when only
    one replicate was run). ``potential_means`` holds the replicate-mean
    outcome under each intervention, keyed by its canonical label.
    """

    value: float
    potential_means: Mapping[str, float]
    n: int
    master_seed: int
    replicates: int
    replicate_se: float | None = None


def _contrast_value(scale: ContrastScale, mean_a: float, mean_b: float) -> float:
    if scale is ContrastScale.DIFFERENCE:
        return mean_a - mean_b
    if scale is ContrastScale.RATIO:
        if mean_b == 0.0:
            raise DegenerateProbabilityError("ratio contrast undefined: denominator mean is 0")
        return mean_a / mean_b
    if scale is ContrastScale.ODDS_RATIO:
        for value in (mean_a, mean_b):
            if not 0.0 < value < 1.0:
                raise DegenerateProbabilityError(
                    f"potential-outcome mean {value} has undefined odds"
                )
        return (mean_a / (1.0 - mean_a)) / (mean_b / (1.0 - mean_b))
    raise ValueError(f"unknown contrast {scale!r}")


def potential_outcome_mean(
    dgm: Dgm,
    intervention: Intervention | Mapping[str, float] | None,
    n: int,
    seed: SeedSpec,
    *,
    threads: int = 1,
) -> float:
    """Mean outcome under an intervention, with the outcome in expectation mode.

    The terminal outcome is never drawn; its conditional mean given the
    simulated parents is averaged directly.
    """
    data = simulate(
        dgm, n, seed, intervention, EvalMode.EXPECTATION, threads=threads
    )
    return float(data.column(dgm.outcome).mean())


def _replicated_contrast(
    dgm: Dgm,
    intervention_a: Intervention,
    intervention_b: Intervention,
    scale: ContrastScale,
    n: int,
    seed: SeedSpec,
    replicates: int,
    outcome_mode: EvalMode,
    threads: int,
) -> TruthResult:
    if replicates < 1:
        raise ValueError(f"replicates must be >= 1, got {replicates}")
    values: list[float] = []
    means_a: list[float] = []
    means_b: list[float] = []
    # Replicates are reduced in index order so the result is bit-stable.
    for r in range(replicates):
        seed_r = SeedSpec(derive_seed(seed.master_seed, _REPLICATE_TAG, r), seed.chunk_size)
        data_a, data_b = simulate_counterfactual_pair(
            dgm, n, seed_r, intervention_a, intervention_b, outcome_mode, threads=threads
        )
        mean_a = float(data_a.column(dgm.outcome).mean())
        mean_b = float(data_b.column(dgm.outcome).mean())
        values.append(_contrast_value(scale, mean_a, mean_b))
        means_a.append(mean_a)
        means_b.append(mean_b)

    potential_means = {
        intervention_a.label(): float(np.mean(means_a)),
        intervention_b.label(): float(np.mean(means_b)),
    }
    replicate_se = float(np.std(values, ddof=1)) if replicates > 1 else None
    return TruthResult(
        value=float(np.mean(values)),
        potential_means=potential_means,
        n=n,
        master_seed=seed.master_seed,
        replicates=replicates,
        replicate_se=replicate_se,
    )


def marginal_odds_ratio(
    dgm: Dgm,
    spec: MarginalOddsRatio,
    n: int,
    seed: SeedSpec,
    replicates: int = 1,
    *,
    outcome_mode: EvalMode = EvalMode.EXPECTATION,
    threads: int = 1,
) -> TruthResult:
    """Marginally adjusted odds ratio by Monte Carlo integration.

    Per replicate, the outcome mean is computed under do(exposure=a1)
    and do(exposure=a0) on shared draws and the two means are turned
    into an odds ratio. ``outcome_mode`` defaults to expectation; DRAW
    realizes the terminal outcome instead, which is statistically valid
    but strictly noisier, and exists mainly so that the two modes can be
    compared.
    """
    outcome = dgm.outcome_node()
    if not (isinstance(outcome, StructuralNode) and outcome.link is Link.EXPIT):
        raise ValueError(
            "marginal odds ratio requires an expit-link structural outcome node"
        )
    return _replicated_contrast(
        dgm,
        Intervention({spec.exposure: spec.a1}),
        Intervention({spec.exposure: spec.a0}),
        ContrastScale.ODDS_RATIO,
        n,
        seed,
        replicates,
        outcome_mode,
        threads,
    )


def controlled_direct_effect(
    dgm: Dgm,
    spec: ControlledDirectEffect,
    n: int,
    seed: SeedSpec,
    replicates: int = 1,
    *,
    outcome_mode: EvalMode = EvalMode.EXPECTATION,
    threads: int = 1,
) -> TruthResult:
    """Controlled direct effect with the mediator held fixed at spec.m.

    Both worlds intervene on the mediator identically and differ only in
    the exposure; any mediator-dependent path is thereby cut, and shared
    draws keep intermediate variables comparable across worlds.
    """
    return _replicated_contrast(
        dgm,
        Intervention({spec.exposure: spec.a1, spec.mediator: spec.m}),
        Intervention({spec.exposure: spec.a0, spec.mediator: spec.m}),
        ContrastScale.DIFFERENCE if spec.scale is ContrastScale.DIFFERENCE else ContrastScale.RATIO,
        n,
        seed,
        replicates,
        outcome_mode,
        threads,
    )


def potential_outcome_contrast(
    dgm: Dgm,
    spec: PotentialOutcomeContrast,
    n: int,
    seed: SeedSpec,
    replicates: int = 1,
    *,
    outcome_mode: EvalMode = EvalMode.EXPECTATION,
    threads: int = 1,
) -> TruthResult:
    """Contrast of outcome means under two arbitrary interventions."""
    return _replicated_contrast(
        dgm,
        spec.intervention_a,
        spec.intervention_b,
        spec.contrast,
        n,
        seed,
        replicates,
        outcome_mode,
        threads,
    )


def compute_truth(
    dgm: Dgm,
    spec: EstimandSpec,
    n: int,
    seed: SeedSpec,
    replicates: int = 1,
    *,
    outcome_mode: EvalMode = EvalMode.EXPECTATION,
    threads: int = 1,
) -> TruthResult:
    """Dispatch on the estimand kind."""
    if isinstance(spec, MarginalOddsRatio):
        fn = marginal_odds_ratio
    elif isinstance(spec, ControlledDirectEffect):
        fn = controlled_direct_effect
    elif isinstance(spec, PotentialOutcomeContrast):
        fn = potential_outcome_contrast
    else:
        raise TypeError(f"unknown estimand spec {type(spec).__name__}")
    return fn(dgm, spec, n, seed, replicates, outcome_mode=outcome_mode, threads=threads)
