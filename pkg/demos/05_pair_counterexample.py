"""A two-projector structure whose joint opening probability climbs above
the product bound once the good subspaces tilt far enough."""

import numpy as np

from qlll import bench

# sweep the tilt parameter: the probability that the first two violations
# are the pair, in either order, against the 1/4 product bound
print(" a      pr(pair opening)   exceeds 1/4")
for a in (0.2, 0.5, 0.7, bench.VIOLATION_THRESHOLD, 0.85, 0.95, 1.0):
    row = bench.counterexample_analytic(a)
    flag = "  <-- violation" if row["violates_bound"] else ""
    print(f"{a:.10f}   {row['pr_tau']:.10f}{flag}")

print("\ncrossing point:", bench.VIOLATION_THRESHOLD)
print("limit as a -> 1:", bench.LIMIT_AT_ONE, "= 37/144")
print("commuting endpoint a = 1:", 1.0 / 9.0, "(the dag probability route)")

# the instance itself: complements of two tilted good subspaces plus a
# rank-3 guard, non-commuting in the interior
cx = bench.make_counterexample(0.95)
print("\nprojector ranks:", [round(np.trace(g).real) for g in cx.good_projectors])
print("commuting at a=0.95:", cx.instance.is_commuting())

audit = bench.counterexample_audit(0.95, trajectories=20000, seed=14)
print("\nthree routes at a = 0.95:")
print("  closed form  :", round(audit["analytic"], 8))
print("  exact channel:", round(audit["exact"], 8))
print(f"  monte carlo  : {audit['monte_carlo']:.5f} +- {audit['mc_sigma']:.5f}")
print("agreement:", audit["pass"], " bound violated:", audit["violates_bound"])
