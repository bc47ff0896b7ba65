"""Thermal machinery: partition functions, Gibbs weights, the thermofield
double, spectral form factors, and the Choi matrix of the thermally
regularized evolution map X -> exp(-bH/4) U_t^dag X U_t exp(-bH/4).

All Boltzmann sums are evaluated after subtracting the ground energy, so every
ratio-type quantity stays finite at large beta.  Raw partition-function values
can still overflow for strongly negative spectra at extreme beta; that is a
property of the quantity itself, not of the evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalHealthError, ResourceLimitError
from .models import SpectralDecomposition
from .operators import Bipartition, PureState

DENSE_CHOI_DIM_CAP = 64
FIDELITY_CROSS_CHECK_RTOL = 1e-10


def _shifted_weights(energies: np.ndarray, beta: float) -> tuple[np.ndarray, float]:
    """exp(-beta (E - E_min)) and the shift E_min."""
    e0 = float(energies[0])
    return np.exp(-beta * (energies - e0)), e0


def log_partition_function(spectral: SpectralDecomposition, beta: float) -> float:
    if beta < 0:
        raise DomainError(f"inverse temperature must be nonnegative, got {beta}")
    w, e0 = _shifted_weights(spectral.energies, beta)
    return float(-beta * e0 + np.log(w.sum()))


def partition_function(spectral: SpectralDecomposition, beta: float) -> float:
    """Z(beta) = sum_j exp(-beta E_j), overflow-safe up to float range."""
    return float(np.exp(log_partition_function(spectral, beta)))


def gibbs_weights(spectral: SpectralDecomposition, beta: float) -> np.ndarray:
    if beta < 0:
        raise DomainError(f"inverse temperature must be nonnegative, got {beta}")
    w, _ = _shifted_weights(spectral.energies, beta)
    return w / w.sum()


def continued_partition_function(spectral: SpectralDecomposition, beta: float, t: float) -> complex:
    """Z_beta(t) = Tr[exp((-beta + i t) H)]."""
    if beta < 0:
        raise DomainError(f"inverse temperature must be nonnegative, got {beta}")
    w, e0 = _shifted_weights(spectral.energies, beta)
    phases = np.exp(1j * t * spectral.energies)
    return complex(np.exp(-beta * e0) * np.sum(w * phases))


@dataclass(frozen=True)
class ThermalContext:
    """Immutable cache of the Boltzmann bookkeeping for one (H, beta)."""

    spectral: SpectralDecomposition
    beta: float
    log_z: float
    log_z_half: float
    gibbs: np.ndarray

    @staticmethod
    def create(spectral: SpectralDecomposition, beta: float) -> "ThermalContext":
        if beta < 0:
            raise DomainError(f"inverse temperature must be nonnegative, got {beta}")
        if not np.isfinite(beta):
            raise DomainError("beta must be finite; zero-temperature limits have their own path")
        return ThermalContext(
            spectral=spectral,
            beta=float(beta),
            log_z=log_partition_function(spectral, beta),
            log_z_half=log_partition_function(spectral, beta / 2),
            gibbs=gibbs_weights(spectral, beta),
        )

    @property
    def dim(self) -> int:
        return self.spectral.dim

    @property
    def z_beta(self) -> float:
        return float(np.exp(self.log_z))

    @property
    def z_half_beta(self) -> float:
        return float(np.exp(self.log_z_half))

    @property
    def z_ratio(self) -> float:
        """Z(beta/2)^2 / Z(beta), the recurring shift-invariant prefactor.

        Exactly d at beta = 0; the log/exp round trip would lose the closed
        forms' exact infinite-temperature values.
        """
        if self.beta == 0.0:
            return float(self.dim)
        return float(np.exp(2 * self.log_z_half - self.log_z))


@dataclass(frozen=True)
class ThermofieldDouble:
    """Time-evolved canonical purification of the Gibbs state.

    In the energy basis the amplitude on |j>|j> is exp(-(beta/2 + i t) E_j)
    / sqrt(Z(beta)); ``eigen_amplitudes`` stores exactly these (normalized).
    """

    spectral: SpectralDecomposition
    beta: float
    t: float
    eigen_amplitudes: np.ndarray

    def state(self) -> PureState:
        """Full vector on the doubled space, |psi> = sum_j c_j |j> (x) |j>."""
        v = self.spectral.vectors
        mat = (v * self.eigen_amplitudes) @ v.T  # |j><j^T| convention: marginals are Gibbs
        d = self.spectral.dim
        return PureState(
            bipartition=Bipartition(d, d),
            amplitudes=mat.reshape(-1),
            space_tag="doubled",
        )

    def marginal(self) -> np.ndarray:
        """Reduced state of either copy; equals the Gibbs state by construction."""
        v = self.spectral.vectors
        p = np.abs(self.eigen_amplitudes) ** 2
        return (v * p) @ v.conj().T

    def overlap(self, other: "ThermofieldDouble") -> complex:
        return complex(np.vdot(self.eigen_amplitudes, other.eigen_amplitudes))


def thermofield_double(spectral: SpectralDecomposition, beta: float, t: float) -> ThermofieldDouble:
    if beta < 0:
        raise DomainError(f"inverse temperature must be nonnegative, got {beta}")
    w, _ = _shifted_weights(spectral.energies, beta / 2)
    amps = w * np.exp(-1j * t * spectral.energies)
    amps /= np.linalg.norm(amps)
    return ThermofieldDouble(spectral=spectral, beta=beta, t=t, eigen_amplitudes=amps)


def survival_probability(spectral: SpectralDecomposition, beta: float, t: float) -> float:
    """|<psi(beta,0)|psi(beta,t)>|^2 = |Z(beta + i t)|^2 / Z(beta)^2."""
    tds0 = thermofield_double(spectral, beta, 0.0)
    tdst = thermofield_double(spectral, beta, t)
    return float(np.abs(tds0.overlap(tdst)) ** 2)


def sff2(spectral: SpectralDecomposition, beta: float, t: float) -> float:
    """Two-point spectral form factor |Z(beta + i t)|^2 (single Hamiltonian)."""
    return float(np.abs(continued_partition_function(spectral, beta, -t)) ** 2)


def sff4(spectral: SpectralDecomposition, beta: float, t: float) -> float:
    """Four-point spectral form factor (Z_beta(t) Z_beta(t)^*)^2 = sff2^2."""
    return sff2(spectral, beta, t) ** 2


@dataclass(frozen=True)
class ChoiMatrix:
    """Rank-1 factored Choi matrix of the regularized map at (beta, t).

    The dense matrix is trace_value * |v><v| with the normalized vector
    v = vec(exp(-(beta/4 - i t) H)) / |...|; it is PSD by construction and
    Tr = Z(beta/2)/d.
    """

    spectral: SpectralDecomposition
    beta: float
    t: float
    eigen_amplitudes: np.ndarray
    trace_value: float

    def vector(self) -> np.ndarray:
        """Normalized Choi vector in the computational product basis."""
        v = self.spectral.vectors
        k = (v * self.eigen_amplitudes) @ v.conj().T
        return k.reshape(-1)

    def state(self) -> PureState:
        d = self.spectral.dim
        return PureState(
            bipartition=Bipartition(d, d), amplitudes=self.vector(), space_tag="doubled"
        )

    def dense(self) -> np.ndarray:
        d = self.spectral.dim
        if d > DENSE_CHOI_DIM_CAP:
            raise ResourceLimitError(
                f"dense Choi matrix would be {d*d} x {d*d}; cap is d <= {DENSE_CHOI_DIM_CAP}"
            )
        vec = self.vector()
        return self.trace_value * np.outer(vec, vec.conj())


def choi_of_regularized_map(spectral: SpectralDecomposition, beta: float, t: float) -> ChoiMatrix:
    """Choi matrix of X -> exp(-bH/4) U_t^dag X U_t exp(-bH/4), stored factored."""
    if beta < 0:
        raise DomainError(f"inverse temperature must be nonnegative, got {beta}")
    w, _ = _shifted_weights(spectral.energies, beta / 4)
    amps = w * np.exp(1j * t * spectral.energies)
    amps /= np.linalg.norm(amps)
    z_half = partition_function(spectral, beta / 2)
    return ChoiMatrix(
        spectral=spectral,
        beta=beta,
        t=t,
        eigen_amplitudes=amps,
        trace_value=z_half / spectral.dim,
    )


def choi_fidelity(spectral: SpectralDecomposition, beta: float, t: float) -> float:
    """(Z(beta/2)/d)^2 |<psi(beta/2,t)|psi(beta/2,0)>|^2, the subnormalized
    Choi-matrix fidelity; equals sff2(beta/2, t) / d^2 and is cross-checked
    against that identity."""
    choi_t = choi_of_regularized_map(spectral, beta, t)
    choi_0 = choi_of_regularized_map(spectral, beta, 0.0)
    overlap = np.vdot(choi_t.eigen_amplitudes, choi_0.eigen_amplitudes)
    value = float(choi_t.trace_value * choi_0.trace_value * np.abs(overlap) ** 2)
    reference = sff2(spectral, beta / 2, t) / spectral.dim**2
    scale = max(abs(reference), abs(value), 1e-300)
    if abs(value - reference) > FIDELITY_CROSS_CHECK_RTOL * scale:
        raise NumericalHealthError(
            f"Choi fidelity {value!r} disagrees with sff2(beta/2,t)/d^2 = {reference!r}"
        )
    return value


@dataclass(frozen=True)
class CpTraceReport:
    """Complete-positivity / trace-nonincrease diagnostics for the imaginary-time map."""

    psd_ok: bool
    min_choi_eigenvalue: float
    trace_nonincreasing_ok: bool
    worst_trace_margin: float
    unshifted_trace_increase: bool
    worst_unshifted_margin: float


def cp_trace_check(
    spectral: SpectralDecomposition,
    beta: float,
    rng: np.random.Generator | None = None,
    n_states: int = 20,
) -> CpTraceReport:
    """Verify the imaginary-time map is CP and, after shifting H to H - E_min >= 0,
    trace-nonincreasing on random pure states.  Report-only: never raises on failure."""
    if beta < 0:
        raise DomainError(f"inverse temperature must be nonnegative, got {beta}")
    if rng is None:
        rng = np.random.default_rng(0)
    d = spectral.dim
    shifted = SpectralDecomposition(
        energies=spectral.energies - spectral.energies[0], vectors=spectral.vectors
    )
    choi = choi_of_regularized_map(shifted, beta, 0.0).dense()
    eigs = np.linalg.eigvalsh(choi)
    min_eig = float(eigs[0])
    psd_ok = min_eig >= -1e-10

    kets = rng.standard_normal((n_states, d)) + 1j * rng.standard_normal((n_states, d))
    kets /= np.linalg.norm(kets, axis=1)[:, None]
    coords = kets @ spectral.vectors.conj()  # components in the energy basis
    probs = np.abs(coords) ** 2

    shifted_vals = probs @ np.exp(-beta * shifted.energies / 2)
    worst_margin = float(np.min(1.0 - shifted_vals))

    with np.errstate(over="ignore"):
        raw_vals = probs @ np.exp(-beta * spectral.energies / 2)
    worst_unshifted = float(np.min(1.0 - raw_vals))

    return CpTraceReport(
        psd_ok=psd_ok,
        min_choi_eigenvalue=min_eig,
        trace_nonincreasing_ok=worst_margin >= -1e-10,
        worst_trace_margin=worst_margin,
        unshifted_trace_increase=worst_unshifted < -1e-12,
        worst_unshifted_margin=worst_unshifted,
    )


def _bessel_i1_ratio(x: float, rtol: float = 1e-15) -> float:
    """S(x) = I_1(2x)/x = sum_n x^(2n) / ((n!)^2 (n+1)), by its power series."""
    term = 1.0
    total = 1.0
    n = 0
    x2 = x * x
    while True:
        n += 1
        term *= x2 / (n * (n + 1))
        total += term
        if term < rtol * total:
            return total
        if n > 100000:  # pragma: no cover - series always converges long before
            raise NumericalHealthError(f"Bessel series did not converge at x={x}")


def gue_mean_partition(d: int, beta: float) -> float:
    """Ensemble-mean partition function d I_1(2 beta)/beta for the normalized GUE."""
    if beta < 0:
        raise DomainError(f"inverse temperature must be nonnegative, got {beta}")
    return d * _bessel_i1_ratio(beta)


def gue_brotoc_approx(d: int, beta: float) -> float:
    """Reference curve [4 I_1(beta)^2 / (beta I_1(2 beta)) - 1/d]^2 for the
    ensemble-averaged equilibration value; evaluates to (1 - 1/d)^2 at beta -> 0."""
    if beta < 0:
        raise DomainError(f"inverse temperature must be nonnegative, got {beta}")
    bracket = _bessel_i1_ratio(beta / 2) ** 2 / _bessel_i1_ratio(beta)
    return float((bracket - 1.0 / d) ** 2)
