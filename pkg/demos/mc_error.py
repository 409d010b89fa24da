"""How large must a truth-computation run be?

Three diagnostics answer that from different angles. The error curve
shows the replicate-to-replicate spread of the estimate shrinking like
1/sqrt(n). Kappa detection reads the curve and names the smallest n
past which the estimate stops moving at a chosen decimal place. The
seed sweep recomputes the estimate under many master seeds at fixed n,
the bluntest possible check that seed choice does not matter.
"""

import math

from simtruth import (
    MarginalOddsRatio,
    SeedSpec,
    detect_kappa,
    error_vs_n,
    seed_sweep,
)
from simtruth import BernoulliDraw, Dgm, ExogenousNode, Link, Normal, StructuralNode

dgm = Dgm(
    nodes=(
        ExogenousNode("C", Normal(0.0, 1.0)),
        StructuralNode("A", 0.2, (("C", 0.3),), Link.EXPIT, BernoulliDraw()),
        StructuralNode("Y", -2.0, (("A", math.log(2)), ("C", math.log(1.5))),
                       Link.EXPIT, BernoulliDraw()),
    ),
    outcome="Y",
)
estimand = MarginalOddsRatio("A")
seed = SeedSpec(master_seed=555)

curve = error_vs_n(dgm, estimand, n_grid=[10_000, 100_000, 1_000_000],
                   replicates_per_n=20, seed=seed)
print("      n        mean          sd     sd*sqrt(n)")
for row in curve.rows:
    print(f"{row.n:>9}  {row.mean:.6f}  {row.sd:.2e}    {row.sd * math.sqrt(row.n):8.3f}")

kappa = detect_kappa(curve, decimal_places=3)
found = kappa.kappa if kappa.kappa is not None else "beyond this grid"
print(f"\nstable to 3 decimal places from n = {found}")

sweep = seed_sweep(dgm, estimand, n=100_000, seeds=range(40, 52))
values = [p.value for p in sweep.points]
print(f"\nseed sweep at n=100000 over {len(values)} master seeds:")
print(f"  low   {min(values):.6f}")
print(f"  high  {max(values):.6f}")
print(f"  range {sweep.range:.2e}")
