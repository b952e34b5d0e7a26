"""Numerical tolerances and size budgets used across the package.

All dense linear algebra is gated on the total Hilbert dimension D so that a
mistyped instance fails fast instead of allocating huge arrays.  The dense cap
can be raised or lowered with the QLLL_BUDGET_D environment variable.
"""

from __future__ import annotations

import os

# projector / operator validation
HERMITIAN_TOL = 1e-10          # relative deviation ||M - M^dag|| / max(1, ||M||)
IDEMPOTENT_TOL = 1e-10         # ||P^2 - P||
RANK_INTEGER_TOL = 1e-8        # |tr P - round(tr P)|
COMMUTE_TOL = 1e-10            # pairwise commutator norm for "verified commuting"

# spectral tolerances
PSD_TOL = 1e-9                 # relative slack allowed in psd_leq
KERNEL_EIG_TOL = 1e-9          # eigenvalues below this (relative) count as zero
EIG_DISTINCT_TOL = 1e-9        # eigenvalues closer than this are one level
PINV_RCOND = 1e-12             # singular values below rcond * sigma_max are zero

# operator-series evaluation (geometric sums of the continue channel)
SERIES_TRACE_TOL = 1e-12
SERIES_MAX_TERMS = 100_000
SEQUENCE_MAX_LEN = 4           # exact outcome operators for at most this many ids
GAP_VACUOUS_TOL = 1e-10        # spectral gaps below this make the 1/(m*gap) bound vacuous

# certificate search
CERT_MAX_SWEEPS = 10_000
CERT_SUP_CHANGE_TOL = 1e-12
CERT_X_CEILING = 1.0 - 1e-9
LOVASZ_SLACK_TOL = 1e-12      # slack >= -tol counts as satisfied

# solver defaults
CLASSICAL_DEFAULT_BUDGET = 1_000_000
QUANTUM_STEPS_PER_PROJECTOR = 1_000   # default max_steps = 1000 * m
GW_VERTEX_CAP = 10_000

# vectorised trajectory engine
BATCH_STATE_ENTRIES = 1 << 26  # n_traj * D complex amplitudes, about 1 GiB
BATCH_FREEZE_TOL = 1e-14       # total bad-event weight below this is settled
BATCH_FREEZE_EVERY = 16        # steps between settled-row sweeps

# combinatorics
DAG_EXACT_RATIONAL_MAX = 12    # exact Fraction arithmetic up to this many vertices
DAG_VERTEX_CAP = 20            # hard cap for subset-memoised recursions

_DEFAULT_STATE_BUDGET_D = 2 ** 13


def state_budget_d() -> int:
    """Dense state-vector dimension cap, overridable via QLLL_BUDGET_D."""
    raw = os.environ.get("QLLL_BUDGET_D")
    if raw is None:
        return _DEFAULT_STATE_BUDGET_D
    value = int(raw)
    if value < 2:
        raise ValueError(f"QLLL_BUDGET_D must be >= 2, got {value}")
    return value


# density-matrix iteration keeps full D x D operators around
DENSITY_BUDGET_D = 2 ** 11
# superoperators are D^2 x D^2
SUPEROP_BUDGET_D = 64


def tolerance_snapshot() -> dict:
    """All tolerances as a dict, logged by the CLI for reproducibility."""
    return {
        "hermitian_tol": HERMITIAN_TOL,
        "idempotent_tol": IDEMPOTENT_TOL,
        "rank_integer_tol": RANK_INTEGER_TOL,
        "commute_tol": COMMUTE_TOL,
        "psd_tol": PSD_TOL,
        "kernel_eig_tol": KERNEL_EIG_TOL,
        "eig_distinct_tol": EIG_DISTINCT_TOL,
        "pinv_rcond": PINV_RCOND,
        "series_trace_tol": SERIES_TRACE_TOL,
        "series_max_terms": SERIES_MAX_TERMS,
        "sequence_max_len": SEQUENCE_MAX_LEN,
        "gap_vacuous_tol": GAP_VACUOUS_TOL,
        "cert_max_sweeps": CERT_MAX_SWEEPS,
        "cert_sup_change_tol": CERT_SUP_CHANGE_TOL,
        "cert_x_ceiling": CERT_X_CEILING,
        "state_budget_d": state_budget_d(),
        "density_budget_d": DENSITY_BUDGET_D,
        "superop_budget_d": SUPEROP_BUDGET_D,
    }
