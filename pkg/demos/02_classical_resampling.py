"""Resample a satisfying assignment for chain-structured 3-SAT and compare
the observed work with the certificate bound."""

import numpy as np

from qlll import (
    bench,
    certificate_from_x,
    classical_intersection_graph,
    expected_resamples_bound,
    instance_from_dimacs,
    make_rng,
    solve_classical,
)

text = bench.chain_cnf(6, seed=3)
print(text)

inst = instance_from_dimacs(text)
graph = classical_intersection_graph(inst)
# every clause has probability 1/8 and at most two neighbours, so a uniform
# x = 0.2 certifies: 0.2 * 0.8^2 = 0.128 >= 0.125
cert = certificate_from_x((0.2,) * inst.m, 0.0, graph)
bound = expected_resamples_bound(inst, cert)
print("expected resamples bound:", bound)

one = solve_classical(inst, seed=11)
print("\none run, seed 11:")
print("  assignment:", one.assignment)
print("  resampled events:", [lab for _, lab in one.log.entries])

runs = 2000
counts = np.array(
    [
        len(solve_classical(inst, int(s)).log.entries)
        for s in make_rng(5).integers(0, 2**63 - 1, size=runs)
    ],
    dtype=float,
)
print(f"\n{runs} runs: mean resamples {counts.mean():.3f}"
      f" (bound {bound}), max {int(counts.max())}")
print("histogram:", np.bincount(counts.astype(int)))
