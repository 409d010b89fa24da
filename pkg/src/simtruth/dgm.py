"""Declarative description of a data-generating mechanism.

A DGM is an ordered list of named nodes. Exogenous nodes carry a marginal
distribution; structural nodes carry a linear predictor over earlier nodes,
a link, and an optional stochastic draw. Declaration order is the
evaluation order, so a node may only reference nodes declared before it.

Nothing here draws random numbers. Simulation lives in ``engine``; this
module only describes mechanisms and checks them for structural sanity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import ValidationError

__all__ = [
    "Link",
    "Normal",
    "Bernoulli",
    "Uniform",
    "Empirical",
    "EmpiricalSource",
    "BernoulliDraw",
    "GaussianDraw",
    "ExogenousNode",
    "StructuralNode",
    "Node",
    "Dgm",
    "Intervention",
    "expit",
    "apply_link",
    "validate_dgm",
    "check_dgm",
    "conditional_odds_ratio",
]


class Link(Enum):
    """Inverse-link applied to a structural node's linear predictor."""

    IDENTITY = "identity"
    EXPIT = "expit"
    EXP = "exp"


@dataclass(frozen=True)
class Normal:
    mean: float
    sd: float


@dataclass(frozen=True)
class Bernoulli:
    p: float


@dataclass(frozen=True)
class Uniform:
    low: float
    high: float


@dataclass(frozen=True)
class EmpiricalSource:
    """Rows ingested from a data file, kept jointly.

    ``columns`` maps column name to a float vector; all vectors share one
    length. Resampling always picks whole rows so that the associations
    between columns in the source survive into simulated data.
    """

    name: str
    columns: Mapping[str, np.ndarray]

    @property
    def n_rows(self) -> int:
        for v in self.columns.values():
            return int(len(v))
        return 0


@dataclass(frozen=True)
class Empirical:
    """Marginal taken from one column of an ingested source.

    Nodes that share a ``source`` are resampled on common row indices,
    which preserves the joint distribution of the source columns.
    """

    source: EmpiricalSource
    column: str


Distribution = Union[Normal, Bernoulli, Uniform, Empirical]


@dataclass(frozen=True)
class BernoulliDraw:
    """Draw 0/1 with probability equal to the link-transformed predictor."""


@dataclass(frozen=True)
class GaussianDraw:
    """Add centered Gaussian noise with the given sd to the predictor."""

    sd: float


Noise = Union[BernoulliDraw, GaussianDraw, None]


@dataclass(frozen=True)
class ExogenousNode:
    name: str
    dist: Distribution


def _as_terms(terms) -> tuple[tuple[str, float], ...]:
    if isinstance(terms, Mapping):
        items = terms.items()
    else:
        items = terms
    return tuple((str(p), float(c)) for p, c in items)


@dataclass(frozen=True)
class StructuralNode:
    """value = link(intercept + sum(coef * parent)) then optional noise."""

    name: str
    intercept: float
    terms: tuple[tuple[str, float], ...]
    link: Link
    noise: Noise = None

    def __post_init__(self):
        object.__setattr__(self, "terms", _as_terms(self.terms))

    def coefficient(self, parent: str) -> float:
        for p, c in self.terms:
            if p == parent:
                return c
        raise KeyError(parent)


Node = Union[ExogenousNode, StructuralNode]


@dataclass(frozen=True)
class Dgm:
    """Ordered node list plus the name of the terminal outcome node.

    Construction never validates; ``validate_dgm`` reports every problem
    of a malformed mechanism in one pass.
    """

    nodes: tuple[Node, ...]
    outcome: str

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(node.name for node in self.nodes)

    def node(self, name: str) -> Node:
        for node in self.nodes:
            if node.name == name:
                return node
        raise KeyError(name)

    def outcome_node(self) -> Node:
        return self.node(self.outcome)


@dataclass(frozen=True)
class Intervention:
    """Fixed assignments applied to nodes before simulation.

    An intervened node is severed from its declared mechanism: its column
    is the assigned constant and its own randomness is never consumed.
    """

    assignments: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self, "assignments", {str(k): float(v) for k, v in dict(self.assignments).items()}
        )

    def label(self) -> str:
        """Canonical text form, e.g. ``"A=1, M=0"`` (sorted by name)."""
        return ", ".join(f"{k}={v:g}" for k, v in sorted(self.assignments.items()))

    def __bool__(self) -> bool:
        return bool(self.assignments)


def as_intervention(x: Intervention | Mapping[str, float] | None) -> Intervention:
    if x is None:
        return Intervention({})
    if isinstance(x, Intervention):
        return x
    return Intervention(x)


def expit(x: float) -> float:
    """Inverse logit of a finite real, computed without overflow.

    The two branches keep the exponential argument non-positive, so the
    result is exact to double precision over the whole real line.
    """
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"expit requires a finite input, got {x!r}")
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def apply_link(link: Link, values: np.ndarray) -> np.ndarray:
    # scipy's expit uses the same non-positive-argument trick vectorized.
    if link is Link.IDENTITY:
        return values
    if link is Link.EXPIT:
        from scipy.special import expit as _vexpit

        return _vexpit(values)
    if link is Link.EXP:
        return np.exp(values)
    raise ValueError(f"unknown link {link!r}")


def validate_dgm(dgm: Dgm) -> list[str]:
    """Collect every structural violation in a mechanism.

    Returns a list of human-readable messages, empty when the DGM is
    well formed. Never raises on malformed input: callers that want an
    exception use ``check_dgm``.

    Checks, in declaration order per node:

    * node names are nonempty and unique
    * distribution parameters are in range (Normal sd > 0, Bernoulli p
      in [0, 1], Uniform low < high, Empirical source has rows and the
      named column)
    * structural terms reference only nodes declared earlier
    * coefficients and intercepts are finite
    * a Bernoulli draw sits behind an Expit link
    * a Gaussian draw has sd > 0
    * the declared outcome is one of the nodes
    """
    violations: list[str] = []
    seen: set[str] = set()

    for index, node in enumerate(dgm.nodes):
        where = f"node {index} ({node.name!r})"
        if not node.name:
            violations.append(f"node {index}: empty name")
        if node.name in seen:
            violations.append(f"{where}: duplicate node name")

        if isinstance(node, ExogenousNode):
            violations.extend(f"{where}: {v}" for v in _check_dist(node.dist))
        elif isinstance(node, StructuralNode):
            if not math.isfinite(node.intercept):
                violations.append(f"{where}: non-finite intercept")
            for parent, coef in node.terms:
                if parent not in seen:
                    violations.append(
                        f"{where}: term references {parent!r}, which is not declared earlier"
                    )
                if not math.isfinite(coef):
                    violations.append(f"{where}: non-finite coefficient on {parent!r}")
            if isinstance(node.noise, BernoulliDraw) and node.link is not Link.EXPIT:
                violations.append(
                    f"{where}: Bernoulli draw requires an expit link, got {node.link.value}"
                )
            if isinstance(node.noise, GaussianDraw) and not node.noise.sd > 0:
                violations.append(f"{where}: Gaussian draw sd must be > 0, got {node.noise.sd}")
        else:
            violations.append(f"{where}: unknown node kind {type(node).__name__}")

        seen.add(node.name)

    if dgm.outcome not in seen:
        violations.append(f"outcome {dgm.outcome!r} is not a declared node")

    return violations


def _check_dist(dist: Distribution) -> list[str]:
    problems = []
    if isinstance(dist, Normal):
        if not (math.isfinite(dist.sd) and dist.sd > 0):
            problems.append(f"Normal sd must be > 0, got {dist.sd}")
        if not math.isfinite(dist.mean):
            problems.append(f"Normal mean must be finite, got {dist.mean}")
    elif isinstance(dist, Bernoulli):
        if not (0.0 <= dist.p <= 1.0):
            problems.append(f"Bernoulli p must be in [0, 1], got {dist.p}")
    elif isinstance(dist, Uniform):
        if not dist.low < dist.high:
            problems.append(f"Uniform requires low < high, got [{dist.low}, {dist.high}]")
    elif isinstance(dist, Empirical):
        if dist.source.n_rows < 1:
            problems.append(f"empirical source {dist.source.name!r} has no rows")
        elif dist.column not in dist.source.columns:
            problems.append(
                f"empirical source {dist.source.name!r} has no column {dist.column!r}"
            )
    else:
        problems.append(f"unknown distribution {type(dist).__name__}")
    return problems


def check_dgm(dgm: Dgm) -> None:
    """Raise ValidationError with every violation if the DGM is malformed."""
    violations = validate_dgm(dgm)
    if violations:
        raise ValidationError(violations)


def conditional_odds_ratio(dgm: Dgm, exposure: str) -> float:
    """Read the conditional odds ratio off a logistic outcome equation.

    This is exp of the exposure coefficient in the outcome node. It only
    means anything when the outcome is structural with an Expit link and
    the exposure appears as a term; anything else raises ValueError.
    Useful as the collapsible reference point that a marginal odds ratio
    is compared against.
    """
    outcome = dgm.outcome_node()
    if not isinstance(outcome, StructuralNode):
        raise ValueError(f"outcome {dgm.outcome!r} is not a structural node")
    if outcome.link is not Link.EXPIT:
        raise ValueError(
            f"conditional odds ratio requires an expit-link outcome, got {outcome.link.value}"
        )
    try:
        coef = outcome.coefficient(exposure)
    except KeyError:
        raise ValueError(
            f"outcome {dgm.outcome!r} has no term on exposure {exposure!r}"
        ) from None
    return math.exp(coef)
