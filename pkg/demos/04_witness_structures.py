"""Rebuild witness trees and resample dags from an execution log, and
check the branching-process formula against simulated frequencies."""

from collections import Counter

import numpy as np

from qlll import (
    QlllInstance,
    basis_projector,
    build_resample_dag,
    build_witness_tree,
    dag_probability,
    dag_sequence_distribution,
    enumerate_proper_trees,
    find_certificate,
    galton_watson_probability,
    intersection_graph,
    label_intersection,
    log_from_labels,
    make_rng,
    occurs_in_log,
    simulate_galton_watson,
)

ev = basis_projector(8, [7])
inst = QlllInstance.build(
    7, 2, [((0, 1, 2), ev), ((2, 3, 4), ev), ((4, 5, 6), ev)]
)
graph = intersection_graph(inst)
meets = label_intersection(graph)
cert = find_certificate(inst)

# a fabricated violation history: the witness tree reads it backwards and
# keeps only what the final entry depends on
log = log_from_labels([0, 2, 1, 0, 1])
tree = build_witness_tree(log, len(log.entries) - 1, meets)
print("log labels:", list(log.labels()))
print("witness tree of the last entry:", tree.to_dict())
print("proper:", tree.is_proper())

seq = tuple(log.labels())
dag = build_resample_dag(seq, meets)
print("\nresample dag edges (later -> earlier):", sorted(dag.edges))
print("probability of the observed order:", dag_probability(dag, seq))
dist = dag_sequence_distribution(dag)
print("orders consistent with the dag:", len(dist), " total:", sum(dist.values()))

print("\ntree occurs in log:", occurs_in_log(tree, log, meets))
print("dag occurs as a prefix:", occurs_in_log(dag, log, meets))

# growth frequencies of the branching process vs the closed form
n = 20000
counts = Counter()
for s in make_rng(9).integers(0, 2**63 - 1, size=n):
    grown = simulate_galton_watson(1, cert, graph, int(s))
    if grown is not None and len(grown.labels) <= 2:
        counts[grown.canonical()] += 1
print("\ntrees rooted at the middle event, at most 2 vertices:")
for small in enumerate_proper_trees(1, graph, 2):
    want = galton_watson_probability(small, cert, graph)
    freq = counts.get(small.canonical(), 0) / n
    print(f"  {small.to_dict()['labels']}: formula {want:.4f}  simulated {freq:.4f}")
