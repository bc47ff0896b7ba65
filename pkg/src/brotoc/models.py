"""Hamiltonian families: Ising chains, disordered chains, GUE matrices, and the
spectrally-defined product-eigenstate and maximally-entangled models."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, DomainError, ValidationError
from .operators import Bipartition, chain_bipartition

EIGEN_RESIDUAL_RTOL = 1e-9
ORTHONORMALITY_ATOL = 1e-10
HERMITICITY_RTOL = 1e-12
NRC_TOL_FRACTION = 1e-10  # default pair-sum coincidence tolerance, in units of spectral width

KNOWN_KINDS = (
    "tfim",
    "tfim_integrable",
    "tfim_chaotic",
    "anderson",
    "mbl",
    "gue",
    "nrc_ps",
    "max_ent",
    "non_entangling",
    "zero",
)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues (ascending) and orthonormal eigenvector columns of a Hermitian matrix."""

    energies: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        d = self.energies.shape[0]
        if self.vectors.shape != (d, d):
            raise DimensionMismatchError(
                f"eigenvector block {self.vectors.shape} does not match {d} energies"
            )
        if np.any(np.diff(self.energies) < 0):
            raise ValidationError("energies must be sorted ascending")

    @property
    def dim(self) -> int:
        return self.energies.shape[0]

    @staticmethod
    def from_dense(h: np.ndarray, check: bool = True) -> "SpectralDecomposition":
        """Diagonalize a Hermitian matrix, verifying hermiticity, eigen-residual
        and orthonormality at construction."""
        h = np.asarray(h)
        hs_norm = np.linalg.norm(h)
        if check and hs_norm > 0:
            herm = np.linalg.norm(h - h.conj().T)
            if herm > HERMITICITY_RTOL * hs_norm:
                raise ValidationError(f"matrix is not Hermitian: |H - H^dag| = {herm:.3e}")
        energies, vectors = np.linalg.eigh(h)
        if check:
            residual = np.linalg.norm(h @ vectors - vectors * energies)
            if hs_norm > 0 and residual > EIGEN_RESIDUAL_RTOL * hs_norm:
                raise ValidationError(
                    f"eigen-residual {residual:.3e} exceeds {EIGEN_RESIDUAL_RTOL} * |H|"
                )
            ortho = np.max(np.abs(vectors.conj().T @ vectors - np.eye(len(energies))))
            if ortho > ORTHONORMALITY_ATOL:
                raise ValidationError(f"eigenvectors are not orthonormal: {ortho:.3e}")
        return SpectralDecomposition(energies=energies, vectors=vectors)

    def dense_hamiltonian(self) -> np.ndarray:
        return (self.vectors * self.energies) @ self.vectors.conj().T


@dataclass(frozen=True)
class ModelSpec:
    """Serializable description of a Hamiltonian family instance."""

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KNOWN_KINDS:
            raise ValidationError(f"unknown model kind {self.kind!r}; known: {KNOWN_KINDS}")

    @property
    def label(self) -> str:
        return self.params.get("label", self.kind)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        out.update(self.params)
        return out

    @staticmethod
    def from_dict(data: dict) -> "ModelSpec":
        data = dict(data)
        kind = data.pop("kind", None)
        if kind is None:
            raise ValidationError("model entry is missing 'kind'")
        return ModelSpec(kind=kind, params=data)


@dataclass(frozen=True)
class HamiltonianInstance:
    """A concrete Hamiltonian: its spectral decomposition plus bookkeeping.

    ``energy_grid`` is set only for product-eigenstate models, where the
    (d_A, d_B) assignment of energies matters downstream.
    """

    spectral: SpectralDecomposition
    bipartition: Bipartition
    spec: ModelSpec | None = None
    realization_index: int = 0
    energy_grid: np.ndarray | None = None


@dataclass(frozen=True)
class NrcReport:
    """Outcome of the no-resonance-condition scan."""

    holds: bool
    violations: list
    tol: float


def _tfim_matrix(n_sites: int, transverse: np.ndarray, h: float) -> np.ndarray:
    """Dense open-chain Ising matrix -sum sz sz - sum g_j sx_j - h sum sz_j.

    Site 0 is the most significant bit so the composite index is A-major for
    the floor(L/2):ceil(L/2) bipartition.
    """
    d = 1 << n_sites
    idx = np.arange(d)
    bits = (idx[:, None] >> (n_sites - 1 - np.arange(n_sites))) & 1
    spins = 1.0 - 2.0 * bits
    diag = -(spins[:, :-1] * spins[:, 1:]).sum(axis=1) - h * spins.sum(axis=1)
    ham = np.zeros((d, d))
    ham[idx, idx] = diag
    for j in range(n_sites):
        flipped = idx ^ (1 << (n_sites - 1 - j))
        ham[idx, flipped] -= transverse[j]
    return ham


def build_tfim(n_sites: int, g: float, h: float) -> HamiltonianInstance:
    """Transverse-field Ising chain with open boundaries and uniform fields."""
    if n_sites < 2:
        raise DomainError(f"chain needs at least 2 sites, got {n_sites}")
    ham = _tfim_matrix(n_sites, np.full(n_sites, float(g)), float(h))
    return HamiltonianInstance(
        spectral=SpectralDecomposition.from_dense(ham),
        bipartition=chain_bipartition(n_sites),
        spec=ModelSpec("tfim", {"g": g, "h": h}),
    )


def build_disordered(n_sites: int, eta: float, h: float, rng: np.random.Generator) -> HamiltonianInstance:
    """Ising chain with site-dependent transverse fields g_j ~ Uniform[-eta, eta].

    h = 0 is the Anderson-localized preset, h = 0.1 the MBL preset.
    """
    if eta < 0:
        raise DomainError(f"disorder strength must be nonnegative, got {eta}")
    transverse = rng.uniform(-eta, eta, n_sites)
    ham = _tfim_matrix(n_sites, transverse, float(h))
    return HamiltonianInstance(
        spectral=SpectralDecomposition.from_dense(ham),
        bipartition=chain_bipartition(n_sites),
        spec=ModelSpec("anderson" if h == 0 else "mbl", {"eta": eta, "h": h}),
    )


def sample_gue(d: int, rng: np.random.Generator, bipartition: Bipartition | None = None) -> HamiltonianInstance:
    """GUE draw normalized so off-diagonal <|H_jk|^2> = 1/d (semicircle on [-2, 2])."""
    if d < 2:
        raise DomainError(f"dimension must be >= 2, got {d}")
    a = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(d)
    ham = (a + a.conj().T) / 2
    if bipartition is None:
        bipartition = _default_bipartition(d)
    return HamiltonianInstance(
        spectral=SpectralDecomposition.from_dense(ham),
        bipartition=bipartition,
        spec=ModelSpec("gue", {"d": d}),
    )


def _default_bipartition(d: int) -> Bipartition:
    """Most balanced factor split d_A <= d_B with d_A as large as possible."""
    best = 1
    for k in range(1, int(d**0.5) + 1):
        if d % k == 0:
            best = k
    return Bipartition(best, d // best)


def build_nrc_ps(
    dim_a: int,
    dim_b: int,
    spectrum: np.ndarray,
    tol: float | None = None,
) -> HamiltonianInstance:
    """Product-eigenstate model: computational eigenbasis, energies E[j, k]
    assigned from ``spectrum`` in index order.  The spectrum must satisfy the
    no-resonance condition."""
    part = Bipartition(dim_a, dim_b)
    spectrum = np.asarray(spectrum, dtype=float)
    if spectrum.shape != (part.dim_total,):
        raise DimensionMismatchError(
            f"spectrum has {spectrum.shape} entries, expected {part.dim_total}"
        )
    report = check_nrc(spectrum, tol=tol)
    if not report.holds:
        raise ValidationError(
            f"spectrum violates the no-resonance condition "
            f"({len(report.violations)} coincidences at tol={report.tol:.3e})"
        )
    order = np.argsort(spectrum, kind="stable")
    vectors = np.zeros((part.dim_total, part.dim_total))
    vectors[order, np.arange(part.dim_total)] = 1.0
    spectral = SpectralDecomposition(energies=spectrum[order], vectors=vectors)
    return HamiltonianInstance(
        spectral=spectral,
        bipartition=part,
        spec=ModelSpec("nrc_ps", {"d_a": dim_a, "d_b": dim_b}),
        energy_grid=spectrum.reshape(dim_a, dim_b),
    )


def _clock_shift_bell_basis(m: int) -> np.ndarray:
    """Columns are the m^2 generalized Bell vectors vec(X^p Z^q)/sqrt(m)."""
    shift = np.roll(np.eye(m), 1, axis=0)
    clock = np.diag(np.exp(2j * np.pi * np.arange(m) / m))
    cols = []
    xp = np.eye(m)
    for _ in range(m):
        zq = np.eye(m, dtype=complex)
        for _ in range(m):
            cols.append((xp @ zq).reshape(-1) / np.sqrt(m))
            zq = zq @ clock
        xp = xp @ shift
    return np.column_stack(cols)


def build_max_ent(d: int, spectrum: np.ndarray) -> HamiltonianInstance:
    """Hamiltonian whose eigenbasis is the generalized Bell basis, so every
    eigenstate is maximally entangled across the symmetric bipartition."""
    part = Bipartition.symmetric(d)
    spectrum = np.asarray(spectrum, dtype=float)
    if spectrum.shape != (d,):
        raise DimensionMismatchError(f"spectrum has {spectrum.shape} entries, expected {d}")
    basis = _clock_shift_bell_basis(part.dim_a)
    order = np.argsort(spectrum, kind="stable")
    spectral = SpectralDecomposition(energies=spectrum[order], vectors=basis[:, order])
    return HamiltonianInstance(
        spectral=spectral,
        bipartition=part,
        spec=ModelSpec("max_ent", {"d": d}),
    )


def build_non_entangling(h_a: np.ndarray, h_b: np.ndarray) -> HamiltonianInstance:
    """H = H_A (x) I + I (x) H_B; its bipartite correlator difference vanishes."""
    h_a = np.asarray(h_a)
    h_b = np.asarray(h_b)
    for name, m in (("H_A", h_a), ("H_B", h_b)):
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatchError(f"{name} must be square, got {m.shape}")
        if np.linalg.norm(m - m.conj().T) > HERMITICITY_RTOL * max(1.0, np.linalg.norm(m)):
            raise ValidationError(f"{name} is not Hermitian")
    part = Bipartition(h_a.shape[0], h_b.shape[0])
    ham = np.kron(h_a, np.eye(part.dim_b)) + np.kron(np.eye(part.dim_a), h_b)
    return HamiltonianInstance(
        spectral=SpectralDecomposition.from_dense(ham),
        bipartition=part,
        spec=ModelSpec("non_entangling", {"d_a": part.dim_a, "d_b": part.dim_b}),
    )


def build_zero(n_sites: int) -> HamiltonianInstance:
    """H = 0 smoke model: flat spectrum, computational eigenbasis."""
    part = chain_bipartition(n_sites)
    d = part.dim_total
    spectral = SpectralDecomposition(energies=np.zeros(d), vectors=np.eye(d))
    return HamiltonianInstance(spectral=spectral, bipartition=part, spec=ModelSpec("zero"))


def check_nrc(energies: np.ndarray, tol: float | None = None, max_report: int = 50) -> NrcReport:
    """Scan all pair sums E_l + E_k for coincidences between distinct index pairs.

    The no-resonance condition requires E_l + E_k = E_n + E_m only for the
    trivial pairings {l,k} = {n,m}; level degeneracies are caught through the
    (i,k) vs (j,k) pair sums.
    """
    energies = np.asarray(energies, dtype=float)
    width = float(energies.max() - energies.min()) if energies.size else 0.0
    if tol is None:
        tol = NRC_TOL_FRACTION * width
    li, ki = np.triu_indices(energies.size)
    sums = energies[li] + energies[ki]
    order = np.argsort(sums, kind="stable")
    sums = sums[order]
    li = li[order]
    ki = ki[order]
    close = np.nonzero(np.diff(sums) <= tol)[0]
    violations = []
    for pos in close:
        pair_a = (int(li[pos]), int(ki[pos]))
        pair_b = (int(li[pos + 1]), int(ki[pos + 1]))
        if pair_a != pair_b:
            violations.append((pair_a, pair_b, float(sums[pos + 1] - sums[pos])))
            if len(violations) >= max_report:
                break
    return NrcReport(holds=not violations, violations=violations, tol=float(tol))


def child_rng(master_seed: int, *spawn_key: int) -> np.random.Generator:
    """Independent stream for one realization; depends only on (seed, key),
    never on construction order."""
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(spawn_key))
    return np.random.default_rng(seq)
