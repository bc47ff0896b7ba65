"""Independent brute-force oracles used by the tests.

Everything here deliberately builds the explicit d^2 x d^2 operators (allowed
up to d = 16) or loops over indices, so the fast contractions in the package
are checked against a different computational route.
"""

import numpy as np

from brotoc import Bipartition


def swap_aa_matrix(part: Bipartition) -> np.ndarray:
    """Explicit swap of the A factors on (A, B, A', B'), as a d^2 x d^2 matrix."""
    da, db = part.dim_a, part.dim_b
    d = da * db
    swap = np.zeros((d * d, d * d))
    for a in range(da):
        for b_ in range(db):
            for c in range(da):
                for e in range(db):
                    row = (a * db + b_) * d + (c * db + e)
                    col = (c * db + b_) * d + (a * db + e)
                    swap[row, col] = 1.0
    return swap


def swap_sandwich_dense(matrix: np.ndarray, part: Bipartition) -> float:
    """Tr[S X^(x2) S X^dag(x2)] from the explicit tensor-product construction."""
    swap = swap_aa_matrix(part)
    doubled = np.kron(matrix, matrix)
    return float(np.real(np.trace(swap @ doubled @ swap @ doubled.conj().T)))


def connected_dense(spectral, beta: float, t: float, part: Bipartition) -> float:
    """Connected correlator from the explicit superoperator sandwich."""
    energies, vectors = spectral.energies, spectral.vectors
    shifted = energies - energies[0]
    z_shift = np.exp(-beta * shifted).sum()
    kraus = (vectors * np.exp((-beta / 4) * shifted + 1j * t * energies)) @ vectors.conj().T
    swap = swap_aa_matrix(part)
    doubled = np.kron(kraus, kraus)
    evolved = doubled @ swap @ doubled.conj().T
    return float(np.real(np.trace(swap @ evolved)) / (part.dim_total * z_shift))


def unregularized_dense(spectral, beta: float, t: float, part: Bipartition) -> float:
    """Unregularized average from the explicit (rho x I) U^dag(x2) S U(x2) S trace."""
    energies, vectors = spectral.energies, spectral.vectors
    shifted = energies - energies[0]
    probs = np.exp(-beta * shifted)
    probs /= probs.sum()
    rho = (vectors * probs) @ vectors.conj().T
    u_t = (vectors * np.exp(-1j * t * energies)) @ vectors.conj().T
    d = part.dim_total
    swap = swap_aa_matrix(part)
    big_rho = np.kron(rho, np.eye(d))
    u2 = np.kron(u_t, u_t)
    val = np.trace(big_rho @ u2.conj().T @ swap @ u2 @ swap)
    return float(1.0 - val.real / d)


def partial_trace_loop(matrix: np.ndarray, part: Bipartition, keep: str) -> np.ndarray:
    """Element-wise double-loop partial trace."""
    da, db = part.dim_a, part.dim_b
    if keep == "A":
        out = np.zeros((da, da), dtype=complex)
        for a in range(da):
            for c in range(da):
                for b_ in range(db):
                    out[a, c] += matrix[a * db + b_, c * db + b_]
        return out
    out = np.zeros((db, db), dtype=complex)
    for b_ in range(db):
        for e in range(db):
            for a in range(da):
                out[b_, e] += matrix[a * db + b_, a * db + e]
    return out


def realignment_loop(matrix: np.ndarray, part: Bipartition) -> np.ndarray:
    """Index-by-index realignment, for checking the reshape-based one."""
    da, db = part.dim_a, part.dim_b
    out = np.zeros((da * da, db * db), dtype=complex)
    for a in range(da):
        for a2 in range(da):
            for b_ in range(db):
                for b2 in range(db):
                    out[a * da + a2, b_ * db + b2] = matrix[a * db + b_, a2 * db + b2]
    return out


def schmidt_coefficients_loop(matrix: np.ndarray, part: Bipartition) -> np.ndarray:
    """Operator Schmidt coefficients from the loop realignment plus SVD."""
    s = np.linalg.svd(realignment_loop(matrix, part), compute_uv=False)
    lam = s * s / part.dim_total
    return lam[lam > 1e-14 * max(lam[0], 1e-300)]


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_hermitian(dim: int, rng: np.random.Generator, complex_entries: bool = True) -> np.ndarray:
    if complex_entries:
        m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    else:
        m = rng.standard_normal((dim, dim))
    return (m + m.conj().T) / 2


PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]])
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]])

SWAP_2Q = np.array(
    [
        [1, 0, 0, 0],
        [0, 0, 1, 0],
        [0, 1, 0, 0],
        [0, 0, 0, 1],
    ],
    dtype=float,
)

CNOT = np.array(
    [
        [1, 0, 0, 0],
        [0, 1, 0, 0],
        [0, 0, 0, 1],
        [0, 0, 1, 0],
    ],
    dtype=float,
)
