"""Dense tensor-network primitives on a register of n qudits of dimension d.

Conventions, fixed project-wide:

* qudit 0 is the most significant tensor factor, so a basis state
  |i_0 i_1 ... i_{n-1}> has index  i_0 d^{n-1} + i_1 d^{n-2} + ... + i_{n-1};
* vectorisation is column-stacking, so vec(A X B) = (B^T kron A) vec(X) and a
  conjugation X -> P X P turns into the matrix kron(P^T, P) acting on vec(X).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import config


@dataclass(frozen=True)
class HilbertShape:
    """Register of n qudits, each of local dimension d."""

    n: int
    d: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"need at least one qudit, got n={self.n}")
        if self.d < 2:
            raise ValueError(f"local dimension must be >= 2, got d={self.d}")

    @property
    def dim(self) -> int:
        return self.d ** self.n

    def check_budget(self, budget: int | None = None):
        cap = config.state_budget_d() if budget is None else budget
        if self.dim > cap:
            raise ValueError(
                f"total dimension {self.dim} exceeds the dense budget {cap}"
            )


def _validate_subset(qudits, n):
    qudits = tuple(int(q) for q in qudits)
    if len(qudits) == 0:
        raise ValueError("qudit subset must be non-empty")
    if len(set(qudits)) != len(qudits):
        raise ValueError(f"qudit subset has repeats: {qudits}")
    for q in qudits:
        if not 0 <= q < n:
            raise ValueError(f"qudit {q} outside register of {n} qudits")
    return qudits


def embed(local_op: np.ndarray, qudits, shape: HilbertShape) -> np.ndarray:
    """Extend an operator on the listed qudits to the full register.

    ``local_op`` acts on the subset in the order given by ``qudits``; identity
    is placed on every other qudit.
    """
    qudits = _validate_subset(qudits, shape.n)
    n, d = shape.n, shape.d
    k = len(qudits)
    dk = d ** k
    local_op = np.asarray(local_op, dtype=complex)
    if local_op.shape != (dk, dk):
        raise ValueError(
            f"operator on {k} qudits must be {dk} x {dk}, got {local_op.shape}"
        )
    rest = [q for q in range(n) if q not in qudits]
    big = np.kron(local_op, np.eye(d ** (n - k), dtype=complex))
    # big's tensor axes run over qudits in (subset order, then the rest);
    # permute rows and columns back to register order 0..n-1
    perm = list(qudits) + rest
    src = [perm.index(q) for q in range(n)]
    tensor = big.reshape((d,) * (2 * n))
    tensor = tensor.transpose(src + [n + s for s in src])
    return np.ascontiguousarray(tensor.reshape(shape.dim, shape.dim))


def partial_trace(op: np.ndarray, traced_qudits, shape: HilbertShape) -> np.ndarray:
    """Trace out the listed qudits, keeping the rest in register order."""
    traced = _validate_subset(traced_qudits, shape.n)
    n, d = shape.n, shape.d
    if len(traced) == n:
        return np.array([[np.trace(op)]], dtype=complex)
    tensor = np.asarray(op, dtype=complex).reshape((d,) * (2 * n))
    remaining = n
    for q in sorted(traced, reverse=True):
        tensor = np.trace(tensor, axis1=q, axis2=q + remaining)
        remaining -= 1
    dim = d ** remaining
    return tensor.reshape(dim, dim)


def vectorize(op: np.ndarray) -> np.ndarray:
    """Column-stacking vec of a square matrix."""
    op = np.asarray(op)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {op.shape}")
    return op.flatten(order="F")


def devectorize(vec: np.ndarray) -> np.ndarray:
    """Inverse of :func:`vectorize`."""
    vec = np.asarray(vec)
    dim = int(round(np.sqrt(vec.size)))
    if dim * dim != vec.size:
        raise ValueError(f"vector of length {vec.size} is not a square matrix")
    return vec.reshape(dim, dim, order="F")


def conjugation_superoperator(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Matrix of the map X -> left @ X @ right on column-stacked vectors."""
    return np.kron(np.asarray(right).T, np.asarray(left))


def pseudoinverse(op: np.ndarray, rcond: float = config.PINV_RCOND) -> np.ndarray:
    """Moore-Penrose pseudoinverse with a fixed relative singular-value cutoff."""
    return np.linalg.pinv(np.asarray(op, dtype=complex), rcond=rcond)


def is_hermitian(op: np.ndarray, tol: float = config.HERMITIAN_TOL) -> bool:
    op = np.asarray(op)
    scale = max(1.0, float(np.abs(op).max(initial=0.0)))
    return float(np.abs(op - op.conj().T).max(initial=0.0)) <= tol * scale


def psd_leq(x: np.ndarray, y: np.ndarray, tol: float = config.PSD_TOL):
    """Decide X <= Y in the PSD order.

    Returns ``(ok, witness)``; on failure the witness holds the most negative
    eigenvalue of Y - X and its eigenvector.
    """
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    if not is_hermitian(x) or not is_hermitian(y):
        raise ValueError("psd_leq needs Hermitian operators")
    diff = y - x
    evals, evecs = np.linalg.eigh((diff + diff.conj().T) / 2)
    lam = float(evals[0])
    scale = max(1.0, float(np.linalg.norm(y, 2)))
    ok = lam >= -tol * scale
    witness = None if ok else {"eigenvalue": lam, "eigenvector": evecs[:, 0]}
    return ok, witness


def min_slack(x: np.ndarray, y: np.ndarray) -> float:
    """Smallest eigenvalue of Y - X; negative values witness psd_leq failure."""
    diff = np.asarray(y, dtype=complex) - np.asarray(x, dtype=complex)
    return float(np.linalg.eigvalsh((diff + diff.conj().T) / 2)[0])


def kernel_projector(op: np.ndarray, tol: float = config.KERNEL_EIG_TOL) -> np.ndarray:
    """Orthogonal projector onto the (near-)zero eigenspace of a Hermitian op."""
    op = np.asarray(op, dtype=complex)
    if not is_hermitian(op):
        raise ValueError("kernel_projector needs a Hermitian operator")
    evals, evecs = np.linalg.eigh((op + op.conj().T) / 2)
    cutoff = tol * max(1.0, float(evals[-1]) if evals.size else 1.0)
    cols = evecs[:, evals < cutoff]
    return cols @ cols.conj().T


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator; one seed fixes the whole stream."""
    return np.random.Generator(np.random.Philox(seed))


def spawn_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent per-trajectory stream, stable under any scheduling order."""
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(index,))
    return np.random.Generator(np.random.Philox(seq))
