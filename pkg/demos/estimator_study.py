"""Repeated-sampling evaluation of three estimators against the right truth.

A simulation study is only as honest as its truth value. This one pits a
conditional logistic model, marginal standardization (g-computation), and
inverse probability weighting against the marginal odds ratio computed by
the engine. The conditional model looks biased here, and it is not a bug:
it estimates a different, conditional estimand whose true value (2.0) is
larger than the marginal one. Scoring each estimator against the other
one's truth is the classic way simulation studies mislead.
"""

import math

from simtruth import (
    IPW,
    ConditionalLogistic,
    MarginalOddsRatio,
    MarginalStandardization,
    SeedSpec,
    compute_truth,
    run_study,
)
from simtruth import BernoulliDraw, Dgm, ExogenousNode, Link, Normal, StructuralNode

dgm = Dgm(
    nodes=(
        ExogenousNode("C", Normal(0.0, 1.0)),
        StructuralNode("A", 0.2, (("C", 0.3),), Link.EXPIT, BernoulliDraw()),
        StructuralNode("Y", -0.5, (("A", math.log(2)), ("C", math.log(1.5))),
                       Link.EXPIT, BernoulliDraw()),
    ),
    outcome="Y",
)
estimand = MarginalOddsRatio("A")
seed = SeedSpec(master_seed=777)

truth = compute_truth(dgm, estimand, n=1_000_000, seed=seed, replicates=5)
print(f"marginal truth: {truth.value:.5f}   conditional truth: {math.exp(math.log(2)):.5f}")

report = run_study(
    dgm,
    estimand,
    truth,
    estimators=[
        ConditionalLogistic("A"),
        MarginalStandardization("A", bootstrap_reps=150),
        IPW("A", ("C",), bootstrap_reps=150),
    ],
    n_sims=300,
    sample_size=800,
    seed=seed,
)

header = f"{'estimator':<28} {'bias':>8} {'mcse':>7} {'emp.se':>7} {'mse':>7} {'cover':>6} {'fail':>4}"
print()
print(header)
print("-" * len(header))
for row in report.estimators:
    print(
        f"{row.label:<28} {row.bias:+8.4f} {row.bias_mcse:7.4f} "
        f"{row.empirical_se:7.4f} {row.mse:7.4f} {row.coverage:6.3f} {row.n_failed:>4}"
    )
print()
print("Bias is measured against the marginal truth. The conditional")
print("model's gap is real and systematic: noncollapsibility, not noise.")
