"""Bipartite-averaged regularized OTOC quantities.

The three central objects, for a Hamiltonian with Gibbs state rho_beta and
time evolution U_t, averaged over Haar-random unitaries supported on the A|B
bipartition:

* the disconnected correlator  g_disc = P_A(sqrt rho) P_B(sqrt rho) / d,
* the connected correlator     g_reg(t), proportional to the operator purity
  of exp(-(beta - 4it) H / 4), equivalently the AA'|BB' purity of the
  time-evolved thermofield double,
* their difference             n = g_disc - g_reg(t).

Everything is evaluated from a spectral decomposition with ground-energy
shifts, so large beta is safe.  Monte-Carlo estimators over explicit Haar
samples provide independent checks of every analytic average.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .models import SpectralDecomposition
from .operators import (
    Bipartition,
    hs_norm_sq,
    realign,
    subsystem_purity,
    swap_sandwich_trace,
    unitarity_residual,
)
from .thermal import ThermalContext

GROUND_TOL_FRACTION = 1e-8


def _mat_from_eigs(vectors: np.ndarray, eigenvalues: np.ndarray) -> np.ndarray:
    """V diag(w) V^dag; real eigenvector blocks stay in real BLAS where possible."""
    if np.isrealobj(vectors):
        if np.iscomplexobj(eigenvalues):
            return ((vectors * eigenvalues.real) @ vectors.T) + 1j * (
                (vectors * eigenvalues.imag) @ vectors.T
            )
        return (vectors * eigenvalues) @ vectors.T
    return (vectors * eigenvalues) @ vectors.conj().T


def _sqrt_gibbs_eigs(ctx: ThermalContext) -> np.ndarray:
    """Eigenvalues of sqrt(rho_beta): exp(-beta E/2)/sqrt(Z), shift-stabilized."""
    y = np.exp(-ctx.beta * (ctx.spectral.energies - ctx.spectral.energies[0]) / 2)
    return y / np.linalg.norm(y)


def _quarter_eigs(ctx: ThermalContext) -> np.ndarray:
    """Normalized exp(-beta E/4) amplitudes; the t-dependent phases multiply these."""
    y = np.exp(-ctx.beta * (ctx.spectral.energies - ctx.spectral.energies[0]) / 4)
    return y / np.linalg.norm(y)


def disconnected(ctx: ThermalContext, part: Bipartition) -> float:
    """Disconnected correlator P_A(sqrt rho) P_B(sqrt rho) / d (time-independent)."""
    y = _sqrt_gibbs_eigs(ctx)
    vres = ctx.spectral.vectors.T.reshape(ctx.dim, part.dim_a, part.dim_b)
    m_a = np.einsum("j,jab,jcb->ac", y, vres, vres.conj(), optimize=True)
    m_b = np.einsum("j,jab,jac->bc", y, vres, vres.conj(), optimize=True)
    return float(hs_norm_sq(m_a) * hs_norm_sq(m_b) / ctx.dim)


def connected(ctx: ThermalContext, t: float, part: Bipartition) -> float:
    """Connected correlator g_reg(t) via the reduced thermofield-double purity.

    Computed as Z(b/2)^2/(d Z(b)) times the operator purity of the analytically
    continued evolution operator, without materializing any d^2 x d^2 object.
    """
    return float(connected_many(ctx, np.asarray([t]), part)[0])


def connected_many(ctx: ThermalContext, ts: np.ndarray, part: Bipartition) -> np.ndarray:
    """connected() on a batch of times, reusing the eigenbasis work."""
    energies = ctx.spectral.energies
    vectors = ctx.spectral.vectors
    base = _quarter_eigs(ctx)
    scale = ctx.z_ratio / ctx.dim
    out = np.empty(len(ts))
    for i, t in enumerate(np.asarray(ts, dtype=float)):
        w = base * np.exp(1j * t * energies)
        k = _mat_from_eigs(vectors, w)
        out[i] = swap_sandwich_trace(k, part)
    return scale * out


def brotoc_bounds(ctx: ThermalContext, part: Bipartition) -> tuple[float, float]:
    """Purity bounds Z(b/2)^2/(d dA^2 Z(b)) <= g_reg <= Z(b/2)^2/(d Z(b))."""
    upper = ctx.z_ratio / ctx.dim
    return upper / part.dim_a**2, upper


@dataclass(frozen=True)
class BrotocPoint:
    """One evaluated (beta, t) point with its bounds."""

    beta: float
    t: float
    g_disc: float
    g_reg: float
    n_value: float
    lower_bound: float
    upper_bound: float
    method: str = "analytic"


def brotoc_point(ctx: ThermalContext, t: float, part: Bipartition) -> BrotocPoint:
    g_disc = disconnected(ctx, part)
    g_reg = connected(ctx, t, part)
    lower, upper = brotoc_bounds(ctx, part)
    return BrotocPoint(
        beta=ctx.beta,
        t=t,
        g_disc=g_disc,
        g_reg=g_reg,
        n_value=g_disc - g_reg,
        lower_bound=lower,
        upper_bound=upper,
        method="analytic",
    )


def disconnected_upper_bound(ctx: ThermalContext) -> float:
    """Z(beta/2)^4 / (d Z(beta)^2), the ceiling for both g_disc and n."""
    return ctx.z_ratio**2 / ctx.dim


def unregularized_bipartite(ctx: ThermalContext, t: float, part: Bipartition) -> float:
    """Bipartite-averaged unregularized commutator norm
    1 - Re Tr[(rho (x) I) U_t^dag(x2) S_AA' U_t(x2) S_AA'] / d.

    The trace has a genuinely complex value for asymmetric insertions; only
    its real part enters the average.
    """
    energies = ctx.spectral.energies
    vectors = ctx.spectral.vectors
    phases = np.exp(1j * t * energies)
    weighted = _mat_from_eigs(vectors, ctx.gibbs * phases)  # rho U_t^dag
    evolution = _mat_from_eigs(vectors, phases)  # U_t^dag
    r_w = realign(weighted, part)
    r_e = realign(evolution, part)
    if part.dim_a <= part.dim_b:
        cross = r_w @ r_e.conj().T
        gram = r_e @ r_e.conj().T
    else:
        cross = r_e.conj().T @ r_w
        gram = r_e.conj().T @ r_e
    trace_val = complex(np.einsum("ij,ji->", cross, gram))
    return float(1.0 - trace_val.real / ctx.dim)


@dataclass(frozen=True)
class GroundProjectorData:
    """Projector onto the near-degenerate ground manifold."""

    projector: np.ndarray
    degeneracy: int
    degeneracy_tol: float
    ambiguous: bool  # energies fall in the (tol, 2 tol] band around the cut


def ground_projector(spectral: SpectralDecomposition, tol: float | None = None) -> GroundProjectorData:
    energies = spectral.energies
    width = float(energies[-1] - energies[0])
    if tol is None:
        tol = GROUND_TOL_FRACTION * width
    gaps = energies - energies[0]
    degeneracy = int(np.count_nonzero(gaps <= tol))
    ambiguous = bool(np.any((gaps > tol) & (gaps <= 2 * tol)))
    block = spectral.vectors[:, :degeneracy]
    return GroundProjectorData(
        projector=block @ block.conj().T,
        degeneracy=degeneracy,
        degeneracy_tol=float(tol),
        ambiguous=ambiguous,
    )


@dataclass(frozen=True)
class ZeroTemperatureValues:
    g_disc_inf: float
    g_reg_inf: float
    n_inf: float
    ground: GroundProjectorData


def zero_temperature(
    spectral: SpectralDecomposition, part: Bipartition, tol: float | None = None
) -> ZeroTemperatureValues:
    """beta -> infinity limits from the ground projector: both correlator pieces
    probe the entanglement of the ground manifold; for a unique ground state they
    reduce to (reduced purity)^2 / d and their difference vanishes."""
    ground = ground_projector(spectral, tol)
    d = spectral.dim
    g0 = ground.degeneracy
    proj = ground.projector
    g_disc = subsystem_purity(proj, part, "A") * subsystem_purity(proj, part, "B") / (d * g0**2)
    g_reg = swap_sandwich_trace(proj, part) / (d * g0)
    return ZeroTemperatureValues(
        g_disc_inf=float(g_disc),
        g_reg_inf=float(g_reg),
        n_inf=float(g_disc - g_reg),
        ground=ground,
    )


@dataclass(frozen=True)
class OtocSample:
    """One (V, W) evaluation of the three pre-averaged correlators."""

    f_reg: complex
    f_disc: float
    c_unreg: float


def _check_unitary(matrix: np.ndarray, dim: int, name: str) -> None:
    if matrix.shape != (dim, dim):
        raise DomainError(f"{name} must be {dim} x {dim}, got {matrix.shape}")
    residual = unitarity_residual(matrix)
    if residual > 1e-10:
        raise DomainError(f"{name} is not unitary: residual {residual:.3e}")


def regularized_otoc_sample(
    ctx: ThermalContext, t: float, v_on_a: np.ndarray, w_on_b: np.ndarray
) -> OtocSample:
    """Evaluate the regularized OTOC, its disconnected part, and the
    unregularized commutator norm for explicit local unitaries V on A, W on B."""
    part = Bipartition(v_on_a.shape[0], w_on_b.shape[0])
    if part.dim_total != ctx.dim:
        raise DomainError(
            f"local unitaries act on dimension {part.dim_total}, Hamiltonian has {ctx.dim}"
        )
    _check_unitary(v_on_a, part.dim_a, "V")
    _check_unitary(w_on_b, part.dim_b, "W")
    energies = ctx.spectral.energies
    vectors = ctx.spectral.vectors
    shifted = energies - energies[0]
    z_shift = float(np.exp(-ctx.beta * shifted).sum())

    x = _mat_from_eigs(vectors, np.exp(-ctx.beta * shifted / 4))
    sqrt_rho = _mat_from_eigs(vectors, np.exp(-ctx.beta * shifted / 2) / np.sqrt(z_shift))
    rho = _mat_from_eigs(vectors, ctx.gibbs)
    u_t = _mat_from_eigs(vectors, np.exp(-1j * t * energies))

    v_full = np.kron(v_on_a, np.eye(part.dim_b))
    w_full = np.kron(np.eye(part.dim_a), w_on_b)
    w_t = u_t.conj().T @ w_full @ u_t

    p = x @ v_full @ x
    f_reg = complex(np.trace(w_t.conj().T @ p.conj().T @ w_t @ p)) / z_shift

    tr_w = complex(np.trace(sqrt_rho @ w_full.conj().T @ sqrt_rho @ w_full))
    tr_v = complex(np.trace(sqrt_rho @ v_full.conj().T @ sqrt_rho @ v_full))
    f_disc = float(tr_w.real * tr_v.real)

    f_unreg = complex(np.trace(w_t.conj().T @ v_full.conj().T @ w_t @ v_full @ rho))
    return OtocSample(f_reg=f_reg, f_disc=f_disc, c_unreg=float(1.0 - f_unreg.real))


def haar_unitaries(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """Stack of n Haar-random unitaries via QR of complex Gaussians with the
    R-diagonal phase fix."""
    z = (rng.standard_normal((n, dim, dim)) + 1j * rng.standard_normal((n, dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.einsum("nii->ni", r)
    return q * (diag / np.abs(diag))[:, None, :]


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    n_samples: int

    def z_score(self, target: float) -> float:
        if self.stderr == 0.0:
            return 0.0 if self.mean == target else np.inf
        return (self.mean - target) / self.stderr


@dataclass(frozen=True)
class HaarOracleResult:
    g_disc: Estimate
    g_reg: Estimate
    g_unreg: Estimate


def _batched_trace(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Tr[a_n b_n] over a stack of matrix pairs."""
    return np.einsum("nij,nji->n", a, b)


def haar_mc_oracle(
    ctx: ThermalContext,
    t: float,
    part: Bipartition,
    n_samples: int,
    rng: np.random.Generator,
    chunk: int = 20000,
) -> HaarOracleResult:
    """Monte-Carlo estimate of the three bipartite Haar averages.

    Samples independent Haar unitaries on A and B, evaluates the pre-averaged
    correlators in vectorized chunks, and reports mean and standard error of
    the mean for each quantity.
    """
    if n_samples < 100:
        raise DomainError(f"need at least 100 samples, got {n_samples}")
    if part.dim_total != ctx.dim:
        raise DomainError("bipartition does not match the Hamiltonian dimension")
    energies = ctx.spectral.energies
    vectors = ctx.spectral.vectors
    shifted = energies - energies[0]
    z_shift = float(np.exp(-ctx.beta * shifted).sum())
    x = np.asarray(_mat_from_eigs(vectors, np.exp(-ctx.beta * shifted / 4)), dtype=complex)
    sqrt_rho = np.asarray(
        _mat_from_eigs(vectors, np.exp(-ctx.beta * shifted / 2) / np.sqrt(z_shift)), dtype=complex
    )
    rho = np.asarray(_mat_from_eigs(vectors, ctx.gibbs), dtype=complex)
    u_t = np.asarray(_mat_from_eigs(vectors, np.exp(-1j * t * energies)), dtype=complex)
    eye_a = np.eye(part.dim_a)
    eye_b = np.eye(part.dim_b)

    reg_parts, disc_parts, unreg_parts = [], [], []
    done = 0
    while done < n_samples:
        c = min(chunk, n_samples - done)
        v_loc = haar_unitaries(c, part.dim_a, rng)
        w_loc = haar_unitaries(c, part.dim_b, rng)
        d = ctx.dim
        v_full = np.einsum("nac,bd->nabcd", v_loc, eye_b).reshape(c, d, d)
        w_full = np.einsum("ac,nbd->nabcd", eye_a, w_loc).reshape(c, d, d)
        w_t = u_t.conj().T @ w_full @ u_t
        w_t_h = w_t.conj().transpose(0, 2, 1)
        p = x @ v_full @ x
        reg_parts.append(
            _batched_trace(w_t_h @ p.conj().transpose(0, 2, 1), w_t @ p).real / z_shift
        )
        w_full_h = w_full.conj().transpose(0, 2, 1)
        v_full_h = v_full.conj().transpose(0, 2, 1)
        tr_w = _batched_trace(sqrt_rho @ w_full_h, sqrt_rho @ w_full).real
        tr_v = _batched_trace(sqrt_rho @ v_full_h, sqrt_rho @ v_full).real
        disc_parts.append(tr_w * tr_v)
        unreg_parts.append(1.0 - _batched_trace(w_t_h @ v_full_h, w_t @ (v_full @ rho)).real)
        done += c

    def estimate(parts: list) -> Estimate:
        vals = np.concatenate(parts)
        return Estimate(
            mean=float(vals.mean()),
            stderr=float(vals.std(ddof=1) / np.sqrt(len(vals))),
            n_samples=len(vals),
        )

    return HaarOracleResult(
        g_disc=estimate(disc_parts), g_reg=estimate(reg_parts), g_unreg=estimate(unreg_parts)
    )


@dataclass(frozen=True)
class GlobalAverageReport:
    """Global Haar-average of the four-point regularized correlator versus its
    spectral-form-factor target R4(beta/4, t) / (d^3 Z(beta))."""

    estimate: Estimate
    target: float
    imag_mean: float

    @property
    def z_score(self) -> float:
        return self.estimate.z_score(self.target)


def global_haar_sff_check(
    ctx: ThermalContext,
    t: float,
    n_samples: int,
    rng: np.random.Generator,
    chunk: int = 5000,
) -> GlobalAverageReport:
    """Sample global Haar triples (A1, B1, A2), close the loop with
    B2 = A2^dag B1^dag A1^dag, and compare the average against the four-point
    spectral form factor prediction."""
    if ctx.dim > 16:
        raise DomainError(f"global-average check is a d <= 16 oracle, got d = {ctx.dim}")
    if n_samples < 1000:
        raise DomainError(f"need at least 1000 samples, got {n_samples}")
    energies = ctx.spectral.energies
    vectors = ctx.spectral.vectors
    shifted = energies - energies[0]
    z_shift = float(np.exp(-ctx.beta * shifted).sum())
    x = np.asarray(_mat_from_eigs(vectors, np.exp(-ctx.beta * shifted / 4)), dtype=complex)
    u_t = np.asarray(_mat_from_eigs(vectors, np.exp(-1j * t * energies)), dtype=complex)

    quarter = np.exp(-ctx.beta * shifted / 4 + 1j * t * energies)
    target = float(np.abs(quarter.sum()) ** 4 / (ctx.dim**3 * z_shift))

    vals = []
    done = 0
    while done < n_samples:
        c = min(chunk, n_samples - done)
        a1 = haar_unitaries(c, ctx.dim, rng)
        b1 = haar_unitaries(c, ctx.dim, rng)
        a2 = haar_unitaries(c, ctx.dim, rng)
        b2 = a2.conj().transpose(0, 2, 1) @ b1.conj().transpose(0, 2, 1) @ a1.conj().transpose(0, 2, 1)
        a1t = u_t.conj().T @ a1 @ u_t
        a2t = u_t.conj().T @ a2 @ u_t
        m = x @ a1t @ x @ b1 @ x @ a2t @ x @ b2
        vals.append(np.einsum("nii->n", m) / z_shift)
        done += c
    samples = np.concatenate(vals)
    real = samples.real
    est = Estimate(
        mean=float(real.mean()),
        stderr=float(real.std(ddof=1) / np.sqrt(len(real))),
        n_samples=len(real),
    )
    return GlobalAverageReport(
        estimate=est, target=target, imag_mean=float(samples.imag.mean())
    )
