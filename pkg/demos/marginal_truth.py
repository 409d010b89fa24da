"""Compute the true marginal odds ratio for a confounded binary outcome.

The mechanism is the standard three-node triangle: a Normal confounder C,
a binary exposure A that depends on C, and a binary outcome Y with
logistic dependence on both. The conditional odds ratio is exp(0.6931) = 2
by construction. The marginal odds ratio is something else, and smaller,
even though C is held fixed nowhere: odds ratios do not collapse.

The script estimates the marginal value by intervening on A and averaging
outcome probabilities over ten independent replicates, then cross-checks
the answer against Gauss-Hermite quadrature, which integrates the same
expectation exactly (to machine precision) because C is Gaussian.
"""

import math

from simtruth import (
    BernoulliDraw,
    Dgm,
    ExogenousNode,
    GaussHermite,
    Link,
    MarginalOddsRatio,
    Normal,
    SeedSpec,
    StructuralNode,
    compute_truth,
    quadrature_psi,
)

B0, B1, B2 = -2.0, math.log(2.0), math.log(1.5)

dgm = Dgm(
    nodes=(
        ExogenousNode("C", Normal(0.0, 1.0)),
        StructuralNode("A", 0.2, (("C", 0.3),), Link.EXPIT, BernoulliDraw()),
        StructuralNode("Y", B0, (("A", B1), ("C", B2)), Link.EXPIT, BernoulliDraw()),
    ),
    outcome="Y",
)

seed = SeedSpec(master_seed=20260822)
result = compute_truth(dgm, MarginalOddsRatio("A"), n=1_000_000, seed=seed, replicates=10)

exact = quadrature_psi(B0, B1, B2, mu=0.0, sigma=1.0, spec=GaussHermite(64))

print(f"conditional odds ratio (by construction): {math.exp(B1):.6f}")
print(f"marginal odds ratio, simulated:           {result.value:.6f}")
print(f"  replicate SE:                           {result.replicate_se:.2e}")
print(f"marginal odds ratio, quadrature:          {exact:.6f}")
print(f"  |simulation - quadrature|:              {abs(result.value - exact):.2e}")
for label, mean in result.potential_means.items():
    print(f"  E[Y | do({label})] = {mean:.6f}")
print()
print("The marginal value sits strictly between 1 and 2: attenuation")
print("toward the null without any confounding bias in sight.")
