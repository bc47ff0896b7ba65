"""Dense operator algebra over a bipartite Hilbert space.

Everything here works on plain complex ndarrays indexed with the A-major
composite convention: the row/column index of a bipartite operator is
``a * dim_b + b``, so ``X.reshape(dA, dB, dA, dB)[a, b, a2, b2]`` is the
matrix element <a, b| X |a2, b2>.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, DomainError, NumericalHealthError

SCHMIDT_TRUNCATION = 1e-12  # coefficients below this fraction of the largest are dropped


@dataclass(frozen=True)
class Bipartition:
    """Dimensions (d_A, d_B) of the A|B split; total dimension is the product."""

    dim_a: int
    dim_b: int

    def __post_init__(self):
        if self.dim_a < 1 or self.dim_b < 1:
            raise DimensionMismatchError(
                f"subsystem dimensions must be >= 1, got ({self.dim_a}, {self.dim_b})"
            )

    @property
    def dim_total(self) -> int:
        return self.dim_a * self.dim_b

    @staticmethod
    def symmetric(d: int) -> "Bipartition":
        root = round(d**0.5)
        if root * root != d:
            raise DomainError(f"dimension {d} is not a perfect square")
        return Bipartition(root, root)


def chain_bipartition(n_sites: int) -> Bipartition:
    """floor(L/2):ceil(L/2) split of a chain of qubits, A = the first sites."""
    if n_sites < 2:
        raise DimensionMismatchError(f"need at least 2 sites, got {n_sites}")
    return Bipartition(2 ** (n_sites // 2), 2 ** (n_sites - n_sites // 2))


@dataclass(frozen=True)
class DenseOperator:
    """A dense operator together with the bipartition its indices refer to."""

    bipartition: Bipartition
    entries: np.ndarray

    def __post_init__(self):
        d = self.bipartition.dim_total
        if self.entries.shape != (d, d):
            raise DimensionMismatchError(
                f"entries shape {self.entries.shape} does not match dimension {d}"
            )
        if not np.all(np.isfinite(self.entries.view(float))):
            raise DomainError("operator entries must be finite")


@dataclass(frozen=True)
class PureState:
    """State vector whose index factorizes according to ``bipartition``.

    ``space_tag`` records whether that split is the physical A|B cut of a
    single space or the copy|copy cut of a doubled space.  ``norm`` is None
    for normalized states (checked); subnormalized vectors carry their norm
    explicitly.
    """

    bipartition: Bipartition
    amplitudes: np.ndarray
    space_tag: str = "single"  # "single" or "doubled"
    norm: float | None = None

    def __post_init__(self):
        if self.space_tag not in ("single", "doubled"):
            raise DomainError(f"unknown space tag {self.space_tag!r}")
        expected = self.bipartition.dim_total
        if self.amplitudes.shape != (expected,):
            raise DimensionMismatchError(
                f"amplitude shape {self.amplitudes.shape}, expected ({expected},)"
            )
        if self.norm is None:
            nrm = float(np.linalg.norm(self.amplitudes))
            if abs(nrm - 1.0) > 1e-12 * max(1.0, nrm):
                raise DomainError(f"state is not normalized: |psi| = {nrm!r}")


@dataclass(frozen=True)
class SchmidtData:
    """Operator Schmidt decomposition X = sum_j sqrt(lambda_j) U_j (x) W_j.

    Coefficients are sorted descending.  The local bases are normalized as
    <U_j, U_k> = d_A delta_jk and <W_j, W_k> = d_B delta_jk, so a unitary
    input has sum_j lambda_j = 1.
    """

    coefficients: np.ndarray
    left_ops: list = field(repr=False)
    right_ops: list = field(repr=False)


def _as_4tensor(matrix: np.ndarray, part: Bipartition) -> np.ndarray:
    d = part.dim_total
    if matrix.shape != (d, d):
        raise DimensionMismatchError(
            f"matrix shape {matrix.shape} does not match bipartition dimension {d}"
        )
    return matrix.reshape(part.dim_a, part.dim_b, part.dim_a, part.dim_b)


def partial_trace(matrix: np.ndarray, part: Bipartition, keep: str) -> np.ndarray:
    """Trace out the complement of ``keep`` ("A" or "B")."""
    t = _as_4tensor(matrix, part)
    if keep == "A":
        return np.einsum("abcb->ac", t)
    if keep == "B":
        return np.einsum("abac->bc", t)
    raise DomainError(f"keep must be 'A' or 'B', got {keep!r}")


def hs_norm_sq(matrix: np.ndarray) -> float:
    """Squared Hilbert-Schmidt norm, sum |X_ij|^2 = Tr[X^dag X]."""
    return float(np.real(np.vdot(matrix, matrix)))


def hs_inner(a: np.ndarray, b: np.ndarray) -> complex:
    """Hilbert-Schmidt inner product Tr[A^dag B]."""
    return complex(np.vdot(a, b))


def subsystem_purity(matrix: np.ndarray, part: Bipartition, keep: str) -> float:
    """Squared 2-norm of the reduced operator, ||Tr_complement X||_2^2."""
    return hs_norm_sq(partial_trace(matrix, part, keep))


def realign(matrix: np.ndarray, part: Bipartition) -> np.ndarray:
    """Realigned coefficient matrix R[(a,a2),(b,b2)] = X[(a,b),(a2,b2)].

    Its singular values s_j give the operator Schmidt coefficients through
    lambda_j = s_j^2 / d.
    """
    t = _as_4tensor(matrix, part)
    da2 = part.dim_a * part.dim_a
    db2 = part.dim_b * part.dim_b
    return t.transpose(0, 2, 1, 3).reshape(da2, db2)


def operator_schmidt(matrix: np.ndarray, part: Bipartition) -> SchmidtData:
    """Operator Schmidt decomposition via SVD of the realigned matrix."""
    r = realign(np.asarray(matrix, dtype=complex), part)
    try:
        u, s, vh = np.linalg.svd(r, full_matrices=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        residual = hs_norm_sq(r)
        raise NumericalHealthError(f"SVD failed on realigned matrix (|R|^2={residual})") from exc
    d = part.dim_total
    lam = s * s / d
    if lam.size and lam[0] > 0.0:
        keep = lam >= SCHMIDT_TRUNCATION * lam[0]
    else:
        keep = np.zeros(lam.shape, dtype=bool)
    lam = lam[keep]
    scale_a = np.sqrt(part.dim_a)
    scale_b = np.sqrt(part.dim_b)
    left = [scale_a * u[:, j].reshape(part.dim_a, part.dim_a) for j in np.nonzero(keep)[0]]
    right = [scale_b * vh[j, :].reshape(part.dim_b, part.dim_b) for j in np.nonzero(keep)[0]]
    return SchmidtData(coefficients=lam, left_ops=left, right_ops=right)


def swap_sandwich_trace(matrix: np.ndarray, part: Bipartition) -> float:
    """Tr[S_AA' X^(x2) S_AA' X^dag(x2)] without buildingd^2 x d^2 operators.

    Equal to ||R R^dag||_2^2 for the realigned matrix R, i.e. the fourth power
    sum of its singular values.  The Gram product is taken on the smaller side
    so the cost is O(d^2 min(d_A, d_B)^2) with O(d^2) memory.
    """
    r = realign(matrix, part)
    gram = r @ r.conj().T if part.dim_a <= part.dim_b else r.conj().T @ r
    return float(np.real(np.vdot(gram, gram)))


def operator_purity(matrix: np.ndarray, part: Bipartition) -> float:
    """Purity sum lambda_j^2 / (sum lambda_j)^2 of the operator Schmidt spectrum."""
    norm_sq = hs_norm_sq(matrix)
    if norm_sq == 0.0:
        raise DomainError("operator purity is undefined for the zero operator")
    return swap_sandwich_trace(matrix, part) / norm_sq**2


def unitarity_residual(matrix: np.ndarray) -> float:
    d = matrix.shape[0]
    return float(np.max(np.abs(matrix.conj().T @ matrix - np.eye(d))))


def operator_entanglement(matrix: np.ndarray, part: Bipartition, atol: float = 1e-10) -> float:
    """Linear entropy 1 - P_op(U) of a unitary's operator Schmidt spectrum."""
    residual = unitarity_residual(matrix)
    if residual > atol:
        raise DomainError(f"input is not unitary: residual max |U^dag U - I| = {residual:.3e}")
    return 1.0 - operator_purity(matrix, part)
