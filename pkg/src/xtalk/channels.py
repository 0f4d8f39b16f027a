"""Superoperator primitives for density-matrix simulation.

States are vectorized row-major: a k-qubit density matrix rho becomes the
length-4^k vector rho.reshape(-1), and a channel acts as a 4^k x 4^k matrix
on it.  Multi-qubit tensors keep qubit 0 as the most significant factor.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "unitary_superop",
    "depolarizing_superop",
    "unitary_from_hamiltonian",
    "tp_residual",
    "choi_matrix",
    "min_choi_eigenvalue",
    "apply_superop",
    "zero_state_vec",
    "outcome_probabilities",
]


def unitary_superop(u: np.ndarray) -> np.ndarray:
    """The superoperator of conjugation by ``u``: vec(U rho U^dag)."""
    u = np.asarray(u, dtype=complex)
    return np.kron(u, u.conj())


def depolarizing_superop(p: float, n_qubits: int = 1) -> np.ndarray:
    """Depolarization with probability ``p``: rho -> (1-p) rho + p Tr(rho) I/d."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarization probability must be in [0, 1], got {p!r}")
    d = 2 ** n_qubits
    eye = np.eye(d, dtype=complex)
    vec_mixed = (eye / d).reshape(-1)
    vec_trace = eye.reshape(-1)
    return (1.0 - p) * np.eye(d * d, dtype=complex) + p * np.outer(vec_mixed, vec_trace)


def unitary_from_hamiltonian(h: np.ndarray) -> np.ndarray:
    """exp(-i H) via eigendecomposition of the Hermitian generator ``h``."""
    h = np.asarray(h, dtype=complex)
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1.0j * w)) @ v.conj().T


def tp_residual(superop: np.ndarray) -> float:
    """Max deviation of the trace functional under the map; 0 iff TP."""
    d2 = superop.shape[0]
    d = int(round(np.sqrt(d2)))
    vec_trace = np.eye(d, dtype=complex).reshape(-1)
    return float(np.max(np.abs(vec_trace @ superop - vec_trace)))


def choi_matrix(superop: np.ndarray) -> np.ndarray:
    """The (unnormalized) Choi matrix; positive semidefinite iff the map is CP."""
    d2 = superop.shape[0]
    d = int(round(np.sqrt(d2)))
    return superop.reshape(d, d, d, d).transpose(2, 0, 3, 1).reshape(d2, d2)


def min_choi_eigenvalue(superop: np.ndarray) -> float:
    choi = choi_matrix(superop)
    return float(np.linalg.eigvalsh((choi + choi.conj().T) / 2.0)[0])


def zero_state_vec(n_qubits: int) -> np.ndarray:
    """Vectorized |0...0><0...0| as a (2,)*2n tensor."""
    state = np.zeros((2,) * (2 * n_qubits), dtype=complex)
    state[(0,) * (2 * n_qubits)] = 1.0
    return state


def apply_superop(state: np.ndarray, superop: np.ndarray, qubits, n_qubits: int) -> np.ndarray:
    """Apply a k-qubit superoperator to ``qubits`` of an n-qubit state tensor.

    ``state`` has 2n axes of dimension 2: row axes 0..n-1, column axes
    n..2n-1.  The factor's row/column axes are contracted in the order the
    qubits are listed.
    """
    k = len(qubits)
    axes = [*qubits, *(n_qubits + q for q in qubits)]
    rest = [ax for ax in range(2 * n_qubits) if ax not in axes]
    perm = axes + rest
    moved = np.transpose(state, perm).reshape(4 ** k, -1)
    out = (superop @ moved).reshape([2] * (2 * k) + [2] * len(rest))
    return np.transpose(out, np.argsort(perm))


def outcome_probabilities(state: np.ndarray, n_qubits: int) -> np.ndarray:
    """Computational-basis probabilities: the diagonal of the density matrix."""
    rho = state.reshape(2 ** n_qubits, 2 ** n_qubits)
    return np.real(np.diag(rho)).copy()
