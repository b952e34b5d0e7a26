"""Build small projector instances, search for certificates of the
local-lemma conditions, and inspect the averaged violation spectrum."""

import numpy as np

from qlll import (
    QlllInstance,
    basis_projector,
    check_lovasz,
    expected_violations_bound,
    find_certificate,
    intersection_graph,
    spectral_report,
    symmetric_condition,
)

P1 = np.diag([0.0, 1.0])

# Two projectors on separate qubits. No neighbours, so the fixed point of
# the certificate sweep is just the relative rank of each event.
pair = QlllInstance.build(2, 2, [((0,), P1), ((1,), P1)])
cert = find_certificate(pair)
print("disjoint pair: x =", cert.x)
print("condition slacks:", np.round(check_lovasz(pair, cert).slacks, 6))

# A chain of three rank-1 events on overlapping qubit triples.
ev = basis_projector(8, [7])
chain = QlllInstance.build(
    7, 2, [((0, 1, 2), ev), ((2, 3, 4), ev), ((4, 5, 6), ev)]
)
graph = intersection_graph(chain)
print("\nchain neighbourhoods:", [sorted(graph.gamma(i)) for i in range(chain.m)])
cert = find_certificate(chain)
print("chain certificate x:", np.round(cert.x, 4))
print("expected violations bound:", round(expected_violations_bound(cert), 4))

# The symmetric convenience criterion: rank-r events on k qubits, counted
# by how many touch any single qudit.
for occ in (1, 2, 3, 4):
    print(f"k=3 r=1 events, {occ} per qudit:", symmetric_condition(3, 1, occ))

# Spectrum of the averaged bad-event weight. A certified commuting instance
# keeps a nonempty good subspace and a gap of 1/m.
rep = spectral_report(pair)
print("\npair spectrum:", np.round(rep.eigenvalues, 4))
print("gap:", rep.delta, " good-subspace dimension:", rep.ground_dim)

# An overconstrained single qubit: two maximal events kill the kernel.
plus = np.full((2, 2), 0.5)
frustrated = QlllInstance.build(1, 2, [((0,), plus), ((0,), P1)])
print("\nfrustrated instance certificate:", find_certificate(frustrated))
rep = spectral_report(frustrated)
print("ground dim:", rep.ground_dim, " bottom of spectrum:", round(rep.ground_energy, 6))
