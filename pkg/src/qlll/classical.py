"""Resample-until-satisfied solver over independent discrete variables.

Events are stored as explicit truth tables: the set of local assignments
(aligned to the event's sorted variable list) that violate the event.  The
solver draws an initial uniform assignment, then repeatedly resamples the
variables of the lowest-id violated event until nothing is violated or the
resample budget runs out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import config
from .instance import IntersectionGraph, LovaszCertificate
from .logs import ExecutionLog
from .tensor import make_rng


@dataclass(frozen=True)
class ClassicalEvent:
    id: int
    vars: tuple
    violating: frozenset  # local assignments, aligned to sorted vars

    def __post_init__(self):
        raw = tuple(int(v) for v in self.vars)
        if len(set(raw)) != len(raw):
            raise ValueError("event variables repeat")
        if not raw:
            raise ValueError("event must depend on at least one variable")
        if any(len(a) != len(raw) for a in self.violating):
            raise ValueError("violating assignment arity mismatch")
        order = sorted(range(len(raw)), key=lambda i: raw[i])
        object.__setattr__(self, "vars", tuple(raw[i] for i in order))
        fixed = frozenset(
            tuple(int(a[i]) for i in order) for a in self.violating
        )
        object.__setattr__(self, "violating", fixed)


@dataclass(frozen=True)
class ClassicalInstance:
    domains: tuple  # domain size per variable
    events: tuple

    def __post_init__(self):
        object.__setattr__(self, "domains", tuple(int(d) for d in self.domains))
        object.__setattr__(self, "events", tuple(self.events))
        if any(d < 1 for d in self.domains):
            raise ValueError("variable domains must be positive")
        for i, ev in enumerate(self.events):
            if ev.id != i:
                raise ValueError("event ids must be 0..m-1 in order")
            if any(v >= len(self.domains) for v in ev.vars):
                raise ValueError(f"event {i} references an unknown variable")
            for a in ev.violating:
                if any(
                    not 0 <= val < self.domains[v] for v, val in zip(ev.vars, a)
                ):
                    raise ValueError(f"event {i} violating assignment out of range")

    @property
    def m(self) -> int:
        return len(self.events)


def event_probability(inst: ClassicalInstance, i: int) -> float:
    """Chance a uniform assignment violates event i."""
    ev = inst.events[i]
    total = math.prod(inst.domains[v] for v in ev.vars)
    return len(ev.violating) / total


def classical_intersection_graph(inst: ClassicalInstance) -> IntersectionGraph:
    subsets = [set(ev.vars) for ev in inst.events]
    neigh = tuple(
        frozenset(j for j in range(inst.m) if j != i and subsets[i] & subsets[j])
        for i in range(inst.m)
    )
    return IntersectionGraph(neigh)


@dataclass(frozen=True)
class ClassicalRunResult:
    assignment: tuple
    log: ExecutionLog
    exhausted: bool


def solve_classical(
    inst: ClassicalInstance, seed, max_resamples: int | None = None
) -> ClassicalRunResult:
    """One seeded run; deterministic in the seed.

    All randomness comes from a single counter-based generator: the initial
    assignment consumes one draw per variable in id order, and each resample
    consumes one draw per event variable in id order.
    """
    if max_resamples is None:
        max_resamples = config.CLASSICAL_DEFAULT_BUDGET
    rng = make_rng(seed)
    assignment = [int(rng.integers(d)) for d in inst.domains]
    entries = []
    for step in range(max_resamples):
        hit = -1
        for ev in inst.events:
            local = tuple(assignment[v] for v in ev.vars)
            if local in ev.violating:
                hit = ev.id
                break
        if hit < 0:
            return ClassicalRunResult(
                tuple(assignment), ExecutionLog(tuple(entries), step, seed), False
            )
        entries.append((step, hit))
        for v in inst.events[hit].vars:  # vars are stored sorted
            assignment[v] = int(rng.integers(inst.domains[v]))
    exhausted = any(
        tuple(assignment[v] for v in ev.vars) in ev.violating for ev in inst.events
    )
    return ClassicalRunResult(
        tuple(assignment),
        ExecutionLog(tuple(entries), max_resamples, seed),
        exhausted,
    )


def expected_resamples_bound(
    inst: ClassicalInstance, cert: LovaszCertificate
) -> float:
    """Sum of x_i/(1-x_i) after verifying the certificate really covers the
    event probabilities."""
    if len(cert.x) != inst.m:
        raise ValueError("certificate length does not match the instance")
    for i in range(inst.m):
        p = event_probability(inst, i)
        budget = (1.0 - cert.epsilon) * cert.x_prime[i]
        if p > budget + config.LOVASZ_SLACK_TOL:
            raise ValueError(
                f"certificate does not cover event {i}: {p} > {budget}"
            )
    if any(v >= 1.0 for v in cert.x):
        raise ValueError("bound requires every x strictly below 1")
    return sum(v / (1.0 - v) for v in cert.x)


def instance_from_dimacs(text: str) -> ClassicalInstance:
    """Parse DIMACS CNF; each clause becomes one event over boolean
    variables, violated exactly when every literal is false."""
    tokens = []
    nvars = None
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise ValueError(f"bad DIMACS header: {line}")
            nvars = int(parts[2])
            continue
        tokens.extend(int(t) for t in line.split())
    if nvars is None:
        raise ValueError("missing DIMACS header")

    events = []
    clause = []
    for tok in tokens:
        if tok != 0:
            clause.append(tok)
            continue
        if not clause:
            continue
        want = {}  # var -> value making the literal false
        impossible = False
        for lit in clause:
            v = abs(lit) - 1
            if v >= nvars:
                raise ValueError(f"literal {lit} outside declared variables")
            val = 0 if lit > 0 else 1
            if want.setdefault(v, val) != val:
                impossible = True
        varlist = tuple(sorted(want))
        violating = (
            frozenset() if impossible else frozenset({tuple(want[v] for v in varlist)})
        )
        events.append(ClassicalEvent(len(events), varlist, violating))
        clause = []
    if clause:
        raise ValueError("unterminated clause in DIMACS input")
    return ClassicalInstance((2,) * nvars, tuple(events))


def classical_to_dict(inst: ClassicalInstance) -> dict:
    return {
        "variables": list(inst.domains),
        "events": [
            {"vars": list(ev.vars), "violating": sorted(map(list, ev.violating))}
            for ev in inst.events
        ],
    }


def classical_from_dict(data: dict) -> ClassicalInstance:
    events = tuple(
        ClassicalEvent(
            i, tuple(e["vars"]), frozenset(tuple(a) for a in e["violating"])
        )
        for i, e in enumerate(data["events"])
    )
    return ClassicalInstance(tuple(data["variables"]), events)
