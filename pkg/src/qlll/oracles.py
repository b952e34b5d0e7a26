"""Exact outcome operators for the measure-and-resample process.

The process measures a uniformly chosen bad-event projector each step.  For a
fixed instance the unnormalized state reached when the first few violations
come out in a prescribed order is an exact linear-algebra object: a sum of a
geometric operator series.  This module computes those operators densely and
checks every operator identity and inequality the analysis rests on.

All routes here are exact up to series truncation at 1e-12; nothing is
sampled.  Dense superoperators are quadratically bigger than states, so the
whole module is gated on a small dimension budget (D <= 64 by default).

Conventions: channels act on D x D operators; their matrix forms act on
column-stacked vectors.  The continue channel averages the complement
sandwiches (1/m) sum_i (I - P_i) rho (I - P_i); its geometric series diverges
on states the process never leaves, which is why every series here is
sandwiched by a measurement first (the increments then shrink geometrically
and the sum is the quantity of interest).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import config
from .instance import QlllInstance, intersection_graph, spectral_report
from .tensor import (
    HilbertShape,
    conjugation_superoperator,
    devectorize,
    embed,
    make_rng,
    min_slack,
    partial_trace,
    pseudoinverse,
    vectorize,
)
from .witness import build_partial_resample_dag, build_resample_dag, dag_probability, label_intersection

OUTCOME_PSD_TOL = 1e-9
SLACK_TOL = 1e-9
RESIDUAL_TOL = 1e-9
EQUALITY_TOL = 1e-10


@dataclass(frozen=True)
class Superoperator:
    """Dense matrix form of a linear map on operators."""

    shape: HilbertShape
    matrix: np.ndarray

    def __post_init__(self):
        d2 = self.shape.dim ** 2
        if self.matrix.shape != (d2, d2):
            raise ValueError(
                f"superoperator matrix must be {d2} x {d2}, got {self.matrix.shape}"
            )

    def apply(self, op: np.ndarray) -> np.ndarray:
        return devectorize(self.matrix @ vectorize(np.asarray(op, dtype=complex)))


@dataclass(frozen=True)
class OutcomeOperator:
    """Unnormalized state paired with the probability of reaching it.

    The operator is p * rho for the (sub-normalized) branch of the process
    described by ``provenance``; its trace is the branch probability.
    """

    operator: np.ndarray
    probability: float
    provenance: tuple

    def __post_init__(self):
        op = np.asarray(self.operator, dtype=complex)
        object.__setattr__(self, "operator", op)
        object.__setattr__(self, "provenance", tuple(self.provenance))
        if op.ndim != 2 or op.shape[0] != op.shape[1]:
            raise ValueError(f"outcome operator must be square, got {op.shape}")
        herm = np.abs(op - op.conj().T).max()
        if herm > config.HERMITIAN_TOL * max(1.0, np.abs(op).max()):
            raise ValueError(f"outcome operator is not Hermitian ({herm:.2e})")
        lo = float(np.linalg.eigvalsh((op + op.conj().T) / 2)[0])
        if lo < -OUTCOME_PSD_TOL:
            raise ValueError(f"outcome operator has eigenvalue {lo:.2e} < 0")
        tr = np.trace(op)
        if abs(tr - self.probability) > OUTCOME_PSD_TOL:
            raise ValueError(
                f"probability {self.probability} does not match trace {tr}"
            )
        if not -OUTCOME_PSD_TOL <= self.probability <= 1 + OUTCOME_PSD_TOL:
            raise ValueError(f"probability {self.probability} outside [0, 1]")


def _outcome(op: np.ndarray, provenance: tuple) -> OutcomeOperator:
    op = (op + op.conj().T) / 2
    return OutcomeOperator(op, float(np.trace(op).real), provenance)


class ChannelSet:
    """The per-id channels of one process step, as cheap callables.

    Matrix forms are built on demand; the callables cost O(m D^3) per
    application, which is what the series evaluators use.
    """

    def __init__(self, inst: QlllInstance):
        inst.shape.check_budget(config.SUPEROP_BUDGET_D)
        self.instance = inst
        self.shape = inst.shape
        self.m = inst.m
        D = inst.shape.dim
        self._proj = [inst.embedded(i) for i in range(inst.m)]
        self._comp = [np.eye(D) - p for p in self._proj]

    def measure(self, i: int, op: np.ndarray) -> np.ndarray:
        p = self._proj[i]
        return p @ op @ p

    def complement(self, i: int, op: np.ndarray) -> np.ndarray:
        c = self._comp[i]
        return c @ op @ c

    def continue_step(self, op: np.ndarray) -> np.ndarray:
        out = np.zeros_like(np.asarray(op, dtype=complex))
        for c in self._comp:
            out += c @ op @ c
        return out / self.m

    def refresh(self, i: int, op: np.ndarray) -> np.ndarray:
        return self.refresh_set((i,), op)

    def refresh_set(self, ids, op: np.ndarray) -> np.ndarray:
        """Trace out the union of the listed supports, refill maximally mixed."""
        qudits = sorted({q for i in ids for q in self.instance.projectors[i].qudits})
        n, d = self.shape.n, self.shape.d
        D = self.shape.dim
        if len(qudits) == n:
            return np.trace(op) * np.eye(D) / D
        rest = [q for q in range(n) if q not in qudits]
        reduced = partial_trace(op, qudits, self.shape)
        return embed(reduced, rest, self.shape) / d ** len(qudits)

    def patch(self, i: int, op: np.ndarray) -> np.ndarray:
        """Absorb one id's violation: keep the satisfied branch, resample the rest."""
        return self.complement(i, op) + self.refresh(i, self.measure(i, op))

    # dense matrix forms

    def measure_superoperator(self, i: int) -> Superoperator:
        p = self._proj[i]
        return Superoperator(self.shape, conjugation_superoperator(p, p))

    def continue_superoperator(self) -> Superoperator:
        mat = sum(conjugation_superoperator(c, c) for c in self._comp) / self.m
        return Superoperator(self.shape, mat)

    def refresh_superoperator(self, i: int) -> Superoperator:
        return Superoperator(
            self.shape, _channel_matrix(lambda op: self.refresh(i, op), self.shape)
        )

    def patch_superoperator(self, i: int) -> Superoperator:
        c = self._comp[i]
        mat = conjugation_superoperator(c, c) + (
            self.refresh_superoperator(i).matrix
            @ self.measure_superoperator(i).matrix
        )
        return Superoperator(self.shape, mat)


def _channel_matrix(fn, shape: HilbertShape) -> np.ndarray:
    D = shape.dim
    mat = np.zeros((D * D, D * D), dtype=complex)
    unit = np.zeros((D, D), dtype=complex)
    for col in range(D * D):
        unit.flat[:] = 0
        # column-stacking: column index col is the matrix unit E_{row, c}
        unit[col % D, col // D] = 1.0
        mat[:, col] = vectorize(fn(unit))
    return mat


def build_channels(inst: QlllInstance) -> ChannelSet:
    return ChannelSet(inst)


def _trace_norm(op: np.ndarray) -> float:
    herm = (op + op.conj().T) / 2
    return float(np.abs(np.linalg.eigvalsh(herm)).sum())


def _sandwich_series(pick, step, start, context: str) -> np.ndarray:
    """Sum pick(step^t(start)) over t >= 0.

    pick must annihilate the fixed points of step for the increments to decay;
    every caller sandwiches with a measurement, which does exactly that.
    """
    s = np.asarray(start, dtype=complex)
    acc = np.zeros_like(s)
    term = None
    for _ in range(config.SERIES_MAX_TERMS):
        term = pick(s)
        acc = acc + term
        if _trace_norm(term) < config.SERIES_TRACE_TOL:
            return acc
        s = step(s)
    raise RuntimeError(
        f"{context}: operator series did not converge within "
        f"{config.SERIES_MAX_TERMS} terms; last increment trace norm "
        f"{_trace_norm(term):.3e}"
    )


def _check_id(inst: QlllInstance, a: int) -> int:
    a = int(a)
    if not 0 <= a < inst.m:
        raise ValueError(f"projector id {a} outside 0..{inst.m - 1}")
    return a


def halting_operator(
    inst: QlllInstance, a: int, channels: ChannelSet | None = None
) -> OutcomeOperator:
    """Unnormalized state when the first violation is projector ``a``.

    Its trace is the probability that the process, started maximally mixed,
    halts first on that projector.
    """
    a = _check_id(inst, a)
    ch = channels if channels is not None else build_channels(inst)
    D = inst.shape.dim
    acc = _sandwich_series(
        lambda s: ch.measure(a, s) / inst.m,
        ch.continue_step,
        np.eye(D) / D,
        f"halting operator for id {a}",
    )
    return _outcome(acc, ("halt", a))


def halting_operator_resolvent(
    inst: QlllInstance, a: int, channels: ChannelSet | None = None
) -> OutcomeOperator:
    """Same operator via the pseudo-inverse of (identity - continue channel).

    Cross-check route only: the pseudo-inverse silently drops the continue
    channel's fixed space, which the measurement sandwich annihilates anyway.
    """
    a = _check_id(inst, a)
    ch = channels if channels is not None else build_channels(inst)
    D = inst.shape.dim
    t_mat = ch.continue_superoperator().matrix
    core = pseudoinverse(np.eye(D * D) - t_mat)
    pick = ch.measure_superoperator(a).matrix
    x = devectorize(pick @ core @ vectorize(np.eye(D) / D)) / inst.m
    return _outcome(x, ("halt-resolvent", a))


def sequence_operator(
    inst: QlllInstance,
    ids,
    channels: ChannelSet | None = None,
    limit: int = config.SEQUENCE_MAX_LEN,
) -> OutcomeOperator:
    """Unnormalized state after the first ``len(ids)`` violations are exactly
    ``ids`` in order, each followed by its resampling refresh."""
    ids = tuple(_check_id(inst, a) for a in ids)
    if len(ids) > limit:
        raise ValueError(f"sequence of {len(ids)} ids exceeds the cap {limit}")
    ch = channels if channels is not None else build_channels(inst)
    D = inst.shape.dim
    state = np.eye(D, dtype=complex) / D
    for pos, a in enumerate(ids):
        acc = _sandwich_series(
            lambda s: ch.measure(a, s) / inst.m,
            ch.continue_step,
            state,
            f"sequence {ids} stage {pos}",
        )
        state = ch.refresh(a, acc)
    return _outcome(state, ("sequence",) + ids)


def _report_entry(lemma, *, passed, residual=None, slack_min=None, seeds=(), skipped=False, detail=None):
    entry = {
        "lemma": lemma,
        "pass": passed,
        "residual": residual,
        "slack_min": slack_min,
        "seeds": list(seeds),
        "skipped": skipped,
    }
    if detail is not None:
        entry["detail"] = detail
    return entry


def _disjoint_groups(inst: QlllInstance, max_size: int = 3):
    graph = intersection_graph(inst)
    groups = [(i,) for i in range(inst.m)]
    for size in range(2, max_size + 1):
        for combo in combinations(range(inst.m), size):
            if all(b not in graph.gamma(a) for a, b in combinations(combo, 2)):
                groups.append(combo)
    return groups


def verify_cp_identities(inst: QlllInstance, seed: int = 2026) -> dict:
    """Check the channel identities the outcome-operator algebra relies on.

    Parts needing a disjoint pair are skipped (not failed) when the instance
    has none.  The commuting-instance precondition is enforced.
    """
    if not inst.is_commuting():
        raise ValueError("channel identity checks need a verified commuting instance")
    ch = build_channels(inst)
    D = inst.shape.dim
    m = inst.m
    graph = intersection_graph(inst)
    pairs = [
        (i, j)
        for i, j in combinations(range(m), 2)
        if j not in graph.gamma(i)
    ]
    rng = make_rng(seed)
    inputs = []
    for _ in range(10):
        g = rng.normal(size=(D, D)) + 1j * rng.normal(size=(D, D))
        inputs.append(g / np.linalg.norm(g))

    parts = []

    # (i) sandwiched series bound for groups of mutually disjoint projectors
    eye = np.eye(D) / D
    slack = np.inf
    for group in _disjoint_groups(inst):
        p = np.eye(D, dtype=complex)
        for i in group:
            p = p @ inst.embedded(i)
        lhs = _sandwich_series(
            lambda s, p=p: p @ s @ p / m,
            ch.continue_step,
            eye,
            f"identity (i) group {group}",
        )
        slack = min(slack, min_slack(lhs, p @ eye @ p / len(group)))
    parts.append(_report_entry(
        "sandwich-series-group-bound", passed=slack > -SLACK_TOL, slack_min=slack
    ))

    # (ii) refresh after measure on the maximally mixed state is a rescaling
    resid = 0.0
    for a in range(m):
        want = np.trace(inst.embedded(a) / D).real * eye
        resid = max(resid, np.abs(ch.refresh(a, ch.measure(a, eye)) - want).max())
    parts.append(_report_entry(
        "refresh-after-measure", passed=resid < EQUALITY_TOL, residual=resid
    ))

    # (iii) measuring twice equals measuring once
    resid = 0.0
    for a in range(m):
        for op in inputs:
            once = ch.measure(a, op)
            resid = max(resid, np.abs(ch.measure(a, once) - once).max())
    parts.append(_report_entry(
        "measure-idempotent", passed=resid < EQUALITY_TOL, residual=resid,
        seeds=[seed],
    ))

    # (iv)-(vi) need a disjoint pair
    def pair_part(lemma, check):
        if not pairs:
            return _report_entry(lemma, passed=None, skipped=True)
        resid = 0.0
        for a, b in pairs:
            for op in inputs:
                resid = max(resid, check(a, b, op))
        return _report_entry(
            lemma, passed=resid < EQUALITY_TOL, residual=resid, seeds=[seed]
        )

    def measure_order(a, b, op):
        ab = ch.measure(a, ch.measure(b, op))
        ba = ch.measure(b, ch.measure(a, op))
        joint = inst.embedded(a) @ inst.embedded(b)
        both = joint @ op @ joint.conj().T
        return max(np.abs(ab - ba).max(), np.abs(ab - both).max())

    def refresh_order(a, b, op):
        ab = ch.refresh(a, ch.refresh(b, op))
        ba = ch.refresh(b, ch.refresh(a, op))
        both = ch.refresh_set((a, b), op)
        return max(np.abs(ab - ba).max(), np.abs(ab - both).max())

    def mixed_order(a, b, op):
        return np.abs(
            ch.measure(a, ch.refresh(b, op)) - ch.refresh(b, ch.measure(a, op))
        ).max()

    parts.append(pair_part("measure-disjoint-commute", measure_order))
    parts.append(pair_part("refresh-disjoint-commute", refresh_order))
    parts.append(pair_part("measure-refresh-commute", mixed_order))

    # (vii) measurement commutes with the continue channel; checked on the
    # single-step generator, the summed series then commutes term by term
    resid = 0.0
    for a in range(m):
        for op in inputs:
            resid = max(resid, np.abs(
                ch.measure(a, ch.continue_step(op))
                - ch.continue_step(ch.measure(a, op))
            ).max())
    parts.append(_report_entry(
        "measure-continuation-commute", passed=resid < EQUALITY_TOL, residual=resid,
        seeds=[seed], detail="generator-level check",
    ))

    overall = all(e["pass"] for e in parts if not e["skipped"])
    return {"pass": overall, "parts": parts, "seeds": [seed]}


def process_gap(inst: QlllInstance) -> float:
    """Least average violation weight over states fully outside the good space.

    With a nonempty good subspace this is the spectral gap; without one it is
    the bottom of the spectrum.
    """
    rep = spectral_report(inst)
    return rep.delta if rep.ground_dim > 0 else rep.ground_energy


def first_violation_gap_bound(
    inst: QlllInstance, a: int, channels: ChannelSet | None = None
) -> dict:
    """Both first-violation bounds: dimensional, and scaled by the gap."""
    a = _check_id(inst, a)
    halt = halting_operator(inst, a, channels)
    D = inst.shape.dim
    p = inst.embedded(a)
    plain = min_slack(halt.operator, p / D)
    report = {
        "id": a,
        "probability": halt.probability,
        "dimension_bound": {"pass": plain > -SLACK_TOL, "slack_min": plain},
    }
    gap = process_gap(inst)
    if gap < config.GAP_VACUOUS_TOL:
        report["gap_bound"] = {
            "pass": None, "slack_min": None, "vacuous": True, "gap": gap,
        }
    else:
        slack = min_slack(halt.operator, p / (inst.m * gap * D))
        report["gap_bound"] = {
            "pass": slack > -SLACK_TOL, "slack_min": slack,
            "vacuous": False, "gap": gap,
        }
    return report


def shortclaim_suite(inst: QlllInstance, product_ids) -> dict:
    """Check the vectorized-operator lemmas behind the first-violation bound.

    The instance projectors must all commute; ``product_ids`` selects the k
    projectors whose product plays the distinguished role.
    """
    ids = tuple(_check_id(inst, i) for i in product_ids)
    if not ids or len(set(ids)) != len(ids):
        raise ValueError("product ids must be a nonempty set without repeats")
    if not inst.is_commuting():
        raise ValueError("the lemma suite needs a verified commuting instance")
    inst.shape.check_budget(config.SUPEROP_BUDGET_D)
    D = inst.shape.dim
    k = len(ids)
    proj = [inst.embedded(i) for i in range(inst.m)]
    q = sum(proj)
    prod = np.eye(D, dtype=complex)
    for i in ids:
        prod = prod @ proj[i]
    if np.abs(prod @ prod - prod).max() > config.IDEMPOTENT_TOL:
        raise RuntimeError("product of the selected projectors is not a projector")

    eye2 = np.eye(D)
    a_mat = np.kron(q.conj(), eye2) + np.kron(eye2, q)
    b_mat = sum(np.kron(p.conj(), p) for p in proj)
    bp = np.kron(prod.conj(), prod)
    vec_id = vectorize(np.eye(D))
    q_pinv = pseudoinverse(q)
    a_pinv = pseudoinverse(a_mat)
    ab_pinv = pseudoinverse(a_mat - b_mat)

    lemmas = []
    slack = min_slack(prod @ q_pinv @ prod, prod / k)
    lemmas.append(_report_entry(
        "sum-pinv-product-bound", passed=slack > -SLACK_TOL, slack_min=slack
    ))

    resid = float(np.abs(devectorize(a_pinv @ vec_id) - q_pinv / 2).max())
    lemmas.append(_report_entry(
        "pair-sum-pinv-identity", passed=resid < RESIDUAL_TOL, residual=resid
    ))

    slack = min_slack(devectorize(bp @ a_pinv @ vec_id), prod / (2 * k))
    lemmas.append(_report_entry(
        "measured-pinv-bound", passed=slack > -SLACK_TOL, slack_min=slack
    ))

    resid = float(np.abs(devectorize(bp @ a_pinv @ b_mat @ vec_id) - prod / 2).max())
    lemmas.append(_report_entry(
        "measured-pinv-measured-identity", passed=resid < RESIDUAL_TOL, residual=resid
    ))

    slack = np.inf
    w = vec_id
    for t in range(1, 4):
        w = b_mat @ a_pinv @ w
        slack = min(slack, min_slack(devectorize(w), q / 2 ** t))
    lemmas.append(_report_entry(
        "repeated-measure-decay", passed=slack > -SLACK_TOL, slack_min=slack
    ))

    main = devectorize(bp @ ab_pinv @ vec_id)
    slack = min_slack(main, (0.5 + 0.5 / k) * prod)
    lemmas.append(_report_entry(
        "first-violation-product-bound", passed=slack > -SLACK_TOL, slack_min=slack
    ))

    if k == 1:
        halt = halting_operator(inst, ids[0])
        resid = float(np.abs(main / D - halt.operator).max())
        lemmas.append(_report_entry(
            "halting-route-agreement", passed=resid < RESIDUAL_TOL, residual=resid
        ))

    overall = all(e["pass"] for e in lemmas)
    return {"k": k, "ids": list(ids), "pass": overall, "lemmas": lemmas}


def _validate_gap_sets(inst, ids, gap_sets, intersects):
    if len(gap_sets) != len(ids):
        raise ValueError("need one gap set per relevant id")
    sets = []
    for i, raw in enumerate(gap_sets):
        gap = frozenset(_check_id(inst, x) for x in raw)
        for x in gap:
            for j in range(i, len(ids)):
                if x == ids[j] or intersects(x, ids[j]):
                    raise ValueError(
                        f"gap id {x} intersects the later relevant id {ids[j]}"
                    )
        sets.append(gap)
    return sets


def partial_dag_channel_bound(inst: QlllInstance, relevant_ids, irrelevant_sets) -> dict:
    """Exact probability that the relevant violations are ``relevant_ids``.

    Violations of ids in the per-gap sets are absorbed (their qudits
    resampled, the process continues) rather than ending the stage; such ids
    must be disjoint from every remaining relevant id.  The probability is
    checked against the removal-order weight of the relevant-sequence DAG
    times the product of relative dimensions.
    """
    ids = tuple(_check_id(inst, a) for a in relevant_ids)
    if not ids:
        raise ValueError("need at least one relevant id")
    if not inst.is_commuting():
        raise ValueError("the partial-sequence bound needs a commuting instance")
    intersects = label_intersection(intersection_graph(inst))
    dag, kept = build_partial_resample_dag(ids, intersects)
    if kept != ids:
        raise ValueError(
            f"sequence {ids} is not fully relevant; kept subsequence is {kept}"
        )
    sets = _validate_gap_sets(inst, ids, irrelevant_sets, intersects)

    ch = build_channels(inst)
    D = inst.shape.dim
    m = inst.m
    state = np.eye(D, dtype=complex) / D
    for i, a in enumerate(ids):
        gap = sets[i]

        def cont(s, gap=gap):
            out = np.zeros_like(s)
            for j in range(m):
                out += ch.patch(j, s) if j in gap else ch.complement(j, s)
            return out / m

        acc = _sandwich_series(
            lambda s: ch.measure(a, s) / m,
            cont,
            state,
            f"partial sequence {ids} stage {i}",
        )
        state = ch.refresh(a, acc)

    prob = float(np.trace(state).real)
    weight = float(dag_probability(dag, ids))
    rel = inst.relative_dimensions()
    bound = weight * float(np.prod([rel[a] for a in ids]))
    return {
        "relevant": list(ids),
        "gap_sizes": [len(g) for g in sets],
        "probability": prob,
        "dag_weight": weight,
        "bound": bound,
        "pass": prob <= bound + SLACK_TOL,
        "margin": bound - prob,
    }


def traced_continuation_bound(inst: QlllInstance, set_ids, gap_ids) -> dict:
    """Partial-trace form of the series bound with absorbed ids.

    After tracing out the absorbed ids' qudits, the sandwiched series against
    the gap-patched continuation stays below 1/k times the plain measurement.
    """
    ids = tuple(_check_id(inst, a) for a in set_ids)
    if not ids or len(set(ids)) != len(ids):
        raise ValueError("need distinct set ids")
    if not inst.is_commuting():
        raise ValueError("the traced bound needs a commuting instance")
    intersects = label_intersection(intersection_graph(inst))
    for a, b in combinations(ids, 2):
        if intersects(a, b):
            raise ValueError(f"set ids {a} and {b} must be disjoint")
    gap = tuple(_check_id(inst, x) for x in gap_ids)
    for x in gap:
        for a in ids:
            if x == a or intersects(x, a):
                raise ValueError(f"gap id {x} intersects set id {a}")

    ch = build_channels(inst)
    D = inst.shape.dim
    m = inst.m
    k = len(ids)
    p = np.eye(D, dtype=complex)
    for i in ids:
        p = p @ inst.embedded(i)
    gap_set = frozenset(gap)

    def cont(s):
        out = np.zeros_like(s)
        for j in range(m):
            out += ch.patch(j, s) if j in gap_set else ch.complement(j, s)
        return out / m

    eye = np.eye(D) / D
    acc = _sandwich_series(
        lambda s: p @ s @ p / m, cont, eye, f"traced bound {ids}"
    )
    rhs = p @ eye @ p / k
    qudits = sorted({q for x in gap for q in inst.projectors[x].qudits})
    if qudits:
        acc = partial_trace(acc, qudits, inst.shape)
        rhs = partial_trace(rhs, qudits, inst.shape)
    slack = min_slack(acc, rhs)
    return {
        "set": list(ids),
        "gap": list(gap),
        "slack_min": slack,
        "pass": slack > -1e-10,
    }
