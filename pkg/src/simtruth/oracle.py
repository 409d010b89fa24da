"""Deterministic quadrature for a logistic outcome with one Normal confounder.

For Y with P(Y=1 | A=a, C=c) = expit(b0 + b1*a + b2*c) and C ~ N(mu, sigma^2),
the marginal outcome probability under do(A=a) is

    mu(a) = int expit(b0 + b1*a + b2*c) N(c; mu, sigma^2) dc,

and the marginally adjusted odds ratio is odds(mu(1)) / odds(mu(0)).
Two unrelated integration rules are provided so they can check each other
as well as the Monte Carlo route. Deliberately limited to one Normal
confounder; with more than one, numeric integration is the wrong tool
and Monte Carlo integration takes over.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import expit as _vexpit

from .dgm import expit
from .errors import DegenerateProbabilityError

__all__ = [
    "GaussHermite",
    "AdaptiveSimpson",
    "QuadratureSpec",
    "gauss_hermite_rule",
    "quadrature_mu",
    "quadrature_psi",
]

_MAX_GH_NODES = 200  # weights underflow past this; refuse rather than return junk


@dataclass(frozen=True)
class GaussHermite:
    """Fixed-order Gauss-Hermite rule with ``nodes`` points."""

    nodes: int = 64

    def __post_init__(self):
        if not 2 <= int(self.nodes) <= _MAX_GH_NODES:
            raise ValueError(
                f"GaussHermite nodes must be in [2, {_MAX_GH_NODES}], got {self.nodes}"
            )
        object.__setattr__(self, "nodes", int(self.nodes))


@dataclass(frozen=True)
class AdaptiveSimpson:
    """Adaptive Simpson rule on [mu - k*sigma, mu + k*sigma], k = range_sigmas."""

    abs_tol: float = 1e-12
    range_sigmas: float = 10.0

    def __post_init__(self):
        if not self.abs_tol >= 1e-14:
            raise ValueError(f"abs_tol must be >= 1e-14, got {self.abs_tol}")
        if not self.range_sigmas > 0:
            raise ValueError(f"range_sigmas must be > 0, got {self.range_sigmas}")


QuadratureSpec = GaussHermite | AdaptiveSimpson


@lru_cache(maxsize=64)
def gauss_hermite_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for int f(x) exp(-x^2) dx with n points.

    Golub-Welsch construction: eigenvalues of the symmetric tridiagonal
    Jacobi matrix with off-diagonal sqrt(k/2) are the nodes, and the
    squared first components of the normalized eigenvectors, scaled by
    the total mass sqrt(pi), are the weights.
    """
    if not 2 <= n <= _MAX_GH_NODES:
        raise ValueError(f"node count must be in [2, {_MAX_GH_NODES}], got {n}")
    offdiag = np.sqrt(np.arange(1, n) / 2.0)
    nodes, vectors = eigh_tridiagonal(np.zeros(n), offdiag)
    weights = math.sqrt(math.pi) * vectors[0] ** 2
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


def _mu_gauss_hermite(b0, b1, b2, a, mu, sigma, nodes: int) -> float:
    t, w = gauss_hermite_rule(nodes)
    # c = mu + sqrt(2) sigma t maps the Normal density onto exp(-t^2),
    # leaving normalized weights w / sqrt(pi) that sum to one.
    c = mu + math.sqrt(2.0) * sigma * t
    vals = _vexpit(b0 + b1 * a + b2 * c)
    return float(np.dot(w / math.sqrt(math.pi), vals))


def _adaptive_simpson(f, lo: float, hi: float, tol: float, max_depth: int = 60) -> float:
    def step(x0, x2, f0, f1, f2, whole, tol, depth):
        x1 = 0.5 * (x0 + x2)
        lm, rm = 0.5 * (x0 + x1), 0.5 * (x1 + x2)
        flm, frm = f(lm), f(rm)
        left = (x1 - x0) / 6.0 * (f0 + 4.0 * flm + f1)
        right = (x2 - x1) / 6.0 * (f1 + 4.0 * frm + f2)
        delta = left + right - whole
        if depth <= 0 or abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0
        return step(x0, x1, f0, flm, f1, left, tol / 2.0, depth - 1) + step(
            x1, x2, f1, frm, f2, right, tol / 2.0, depth - 1
        )

    mid = 0.5 * (lo + hi)
    f0, f1, f2 = f(lo), f(mid), f(hi)
    whole = (hi - lo) / 6.0 * (f0 + 4.0 * f1 + f2)
    return step(lo, hi, f0, f1, f2, whole, tol, max_depth)


def _mu_simpson(b0, b1, b2, a, mu, sigma, spec: AdaptiveSimpson) -> float:
    norm = 1.0 / (sigma * math.sqrt(2.0 * math.pi))

    def integrand(c: float) -> float:
        z = (c - mu) / sigma
        return expit(b0 + b1 * a + b2 * c) * norm * math.exp(-0.5 * z * z)

    lo = mu - spec.range_sigmas * sigma
    hi = mu + spec.range_sigmas * sigma
    return _adaptive_simpson(integrand, lo, hi, spec.abs_tol)


def quadrature_mu(
    b0: float,
    b1: float,
    b2: float,
    a: float,
    mu: float,
    sigma: float,
    spec: QuadratureSpec = GaussHermite(64),
) -> float:
    """Marginal outcome probability under do(A=a) by numeric integration."""
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    if isinstance(spec, GaussHermite):
        return _mu_gauss_hermite(b0, b1, b2, a, mu, sigma, spec.nodes)
    if isinstance(spec, AdaptiveSimpson):
        return _mu_simpson(b0, b1, b2, a, mu, sigma, spec)
    raise ValueError(f"unknown quadrature spec {type(spec).__name__}")


def quadrature_psi(
    b0: float,
    b1: float,
    b2: float,
    mu: float,
    sigma: float,
    spec: QuadratureSpec = GaussHermite(64),
) -> float:
    """Marginally adjusted odds ratio odds(mu(1)) / odds(mu(0)) by quadrature."""
    mu1 = quadrature_mu(b0, b1, b2, 1.0, mu, sigma, spec)
    mu0 = quadrature_mu(b0, b1, b2, 0.0, mu, sigma, spec)
    for value in (mu1, mu0):
        if not 0.0 < value < 1.0:
            raise DegenerateProbabilityError(
                f"marginal probability {value} leaves the odds undefined"
            )
    return (mu1 / (1.0 - mu1)) / (mu0 / (1.0 - mu0))
