"""Truncated Fock-space reference implementation.

Everything in this module works with explicit density matrices on a
``cutoff**n_modes`` dimensional Hilbert space (``cutoff`` Fock levels per
mode).  It is deliberately independent of the Gaussian phase-space engine:
states are built by lifting the Williamson/Euler factors of a covariance
matrix to truncated unitaries, channels act through the Lindblad generator
integrated as an ordinary differential equation, and SLDs come from the
spectral formula.  The package test-suite uses these routines as the oracle
against which the closed-form Gaussian results are validated.

Density matrices are vectorised row-major, so ``A rho B`` corresponds to
``kron(A, B.T) @ vec(rho)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from numpy.typing import NDArray
from scipy.integrate import solve_ivp
from scipy.linalg import expm, logm
from scipy.sparse.linalg import expm_multiply

from .channel import ChannelPoint, ParameterIndex, channel_from_values, parameter_list, parameter_values
from .errors import BadModeIndex, CutoffTooSmall, DimensionMismatch, StiffnessFailure
from .gaussian import GaussianState, bloch_messiah, passive_to_unitary, williamson

__all__ = [
    "TruncatedOps",
    "truncated_ops",
    "state_to_fock",
    "quadrature_moments",
    "lindblad_superop",
    "lindblad_apply",
    "dissipator_derivative",
    "sld_fock",
    "qfi_fock",
    "fidelity_fock",
    "quadrature_polynomial",
    "qfi_from_fidelity_fd",
]

#: trace loss above which a Fock-space construction refuses to proceed
TRACE_DEFICIT_TOL = 1e-8


@dataclass(frozen=True)
class TruncatedOps:
    """Per-mode annihilation operators embedded in the full tensor space."""

    n_modes: int
    cutoff: int
    a: tuple[NDArray[np.complex128], ...]

    @property
    def dim(self) -> int:
        return self.cutoff**self.n_modes

    def number(self, mode: int) -> NDArray[np.complex128]:
        return self.a[mode].conj().T @ self.a[mode]


def truncated_ops(n_modes: int, cutoff: int) -> TruncatedOps:
    """Build annihilation operators for ``n_modes`` modes at ``cutoff`` levels."""
    if n_modes < 1 or cutoff < 2:
        raise DimensionMismatch(f"need n_modes >= 1 and cutoff >= 2, got {n_modes}, {cutoff}")
    single = np.diag(np.sqrt(np.arange(1, cutoff, dtype=float)), k=1).astype(complex)
    eye = np.eye(cutoff, dtype=complex)
    ops = []
    for k in range(n_modes):
        factors = [eye] * n_modes
        factors[k] = single
        ops.append(reduce(np.kron, factors))
    return TruncatedOps(n_modes=n_modes, cutoff=cutoff, a=tuple(ops))


def _thermal_diagonal(nbar: float, cutoff: int) -> NDArray[np.float64]:
    if nbar < 1e-14:
        p = np.zeros(cutoff)
        p[0] = 1.0
        return p
    ratio = nbar / (1.0 + nbar)
    return ratio ** np.arange(cutoff) / (1.0 + nbar)


def _passive_hamiltonian(ops: TruncatedOps, k: NDArray) -> NDArray[np.complex128]:
    """Number-conserving Hamiltonian whose lift realises the passive ``k``."""
    u = passive_to_unitary(k)
    h = -1j * logm(u)
    h = 0.5 * (h + h.conj().T)
    ham = np.zeros((ops.dim, ops.dim), dtype=complex)
    for j in range(ops.n_modes):
        for l in range(ops.n_modes):
            if abs(h[j, l]) > 1e-15:
                ham += h[j, l] * (ops.a[j].conj().T @ ops.a[l])
    return ham


def state_to_fock(
    state: GaussianState,
    cutoff: int,
    trace_tol: float = TRACE_DEFICIT_TOL,
    pad: int = 10,
) -> NDArray[np.complex128]:
    """Density matrix of a Gaussian state in the truncated Fock basis.

    The covariance matrix is Williamson-decomposed, the symplectic factor is
    split into passive/squeezer/passive layers, and each layer is lifted to
    the truncated space as the exponential of its generator; the displacement
    is applied last.

    The lifted generators are anti-Hermitian, so their truncated exponentials
    are exactly unitary and amplitude that should leave the space reflects
    off the top of the ladder instead.  To keep that reflection away from the
    levels the caller asked for, the pipeline runs in a working space with
    ``pad`` extra levels per mode and projects down at the end; the projection
    loss is then the genuine occupation tail.  Raises
    :class:`CutoffTooSmall` when that loss exceeds ``trace_tol``.
    """
    work = cutoff + pad
    ops = truncated_ops(state.n_modes, work)
    dec = williamson(state.cov)
    k1, z, k2 = bloch_messiah(dec.symplectic)

    diagonals = [_thermal_diagonal((nu - 1.0) / 2.0, work) for nu in dec.nu]
    rho = np.diag(reduce(np.kron, diagonals)).astype(complex)

    u2 = expm(1j * _passive_hamiltonian(ops, k2))
    rho = u2 @ rho @ u2.conj().T
    for mode, zk in enumerate(z):
        if abs(zk - 1.0) < 1e-14:
            continue
        r = -np.log(zk)
        a = ops.a[mode]
        gen = 0.5 * r * (a @ a - a.conj().T @ a.conj().T)
        u = expm(gen)
        rho = u @ rho @ u.conj().T
    u1 = expm(1j * _passive_hamiltonian(ops, k1))
    rho = u1 @ rho @ u1.conj().T

    alphas = (state.mean[0::2] + 1j * state.mean[1::2]) / np.sqrt(2.0)
    if np.max(np.abs(alphas)) > 1e-14:
        gen = np.zeros((ops.dim, ops.dim), dtype=complex)
        for mode, alpha in enumerate(alphas):
            gen += alpha * ops.a[mode].conj().T - np.conj(alpha) * ops.a[mode]
        u = expm(gen)
        rho = u @ rho @ u.conj().T

    # project the working space down to the requested cutoff
    shape = (work,) * state.n_modes
    rho = rho.reshape(shape + shape)
    keep = (slice(0, cutoff),) * (2 * state.n_modes)
    rho = np.ascontiguousarray(rho[keep]).reshape(
        cutoff**state.n_modes, cutoff**state.n_modes
    )

    rho = 0.5 * (rho + rho.conj().T)
    deficit = 1.0 - float(np.real(np.trace(rho)))
    if deficit > trace_tol:
        raise CutoffTooSmall(
            f"trace deficit {deficit:.3e} exceeds {trace_tol:.1e} at cutoff {cutoff};"
            " increase the cutoff or reduce the photon number"
        )
    return rho


def quadrature_moments(
    rho: NDArray, ops: TruncatedOps
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Quadrature mean vector and covariance matrix of a Fock density matrix.

    Used to round-trip Fock constructions against their Gaussian sources.
    """
    dim = 2 * ops.n_modes
    quads = []
    for k in range(ops.n_modes):
        a = ops.a[k]
        quads.append((a + a.conj().T) / np.sqrt(2.0))
        quads.append((a - a.conj().T) / (1j * np.sqrt(2.0)))
    mean = np.array([np.real(np.trace(rho @ q)) for q in quads])
    cov = np.empty((dim, dim))
    for i in range(dim):
        for j in range(i, dim):
            sym = 0.5 * (quads[i] @ quads[j] + quads[j] @ quads[i])
            val = np.real(np.trace(rho @ sym)) - mean[i] * mean[j]
            cov[i, j] = cov[j, i] = val
    return mean, cov


def _check_channel_args(
    ops: TruncatedOps,
    gammas: Sequence[float],
    n_th: Sequence[float],
    m_corr: Sequence[complex],
) -> tuple[NDArray, NDArray, NDArray]:
    gammas = np.asarray(gammas, dtype=float)
    n_th = np.asarray(n_th, dtype=float)
    m_corr = np.asarray(m_corr, dtype=complex)
    if not (len(gammas) == len(n_th) == len(m_corr)):
        raise DimensionMismatch("channel parameter lists must have equal length")
    if len(gammas) > ops.n_modes:
        raise BadModeIndex(
            f"{len(gammas)} channel modes but operators cover {ops.n_modes}"
        )
    return gammas, n_th, m_corr


def lindblad_superop(
    ops: TruncatedOps,
    gammas: Sequence[float],
    n_th: Sequence[float],
    m_corr: Sequence[complex],
) -> sp.csr_matrix:
    """Sparse superoperator of the dissipative Gaussian generator.

    Mode ``k`` of the register relaxes with rate ``gammas[k]`` towards the
    Gaussian environment with thermal occupation ``n_th[k]`` and anomalous
    correlation ``m_corr[k]``; modes beyond ``len(gammas)`` idle.
    """
    gammas, n_th, m_corr = _check_channel_args(ops, gammas, n_th, m_corr)
    dim = ops.dim
    eye = sp.identity(dim, dtype=complex, format="csr")
    total = sp.csr_matrix((dim * dim, dim * dim), dtype=complex)

    def left_right(a_mat: NDArray, b_mat: NDArray) -> sp.csr_matrix:
        return sp.kron(sp.csr_matrix(a_mat), sp.csr_matrix(b_mat.T), format="csr")

    def lindblad_term(o: NDArray) -> sp.csr_matrix:
        quad = o.conj().T @ o
        return (
            2.0 * left_right(o, o.conj().T)
            - sp.kron(sp.csr_matrix(quad), eye, format="csr")
            - sp.kron(eye, sp.csr_matrix(quad.T), format="csr")
        )

    def anomalous_term(o: NDArray) -> sp.csr_matrix:
        quad = o @ o
        return (
            2.0 * left_right(o, o)
            - sp.kron(sp.csr_matrix(quad), eye, format="csr")
            - sp.kron(eye, sp.csr_matrix(quad.T), format="csr")
        )

    for k, (gamma, n_k, m_k) in enumerate(zip(gammas, n_th, m_corr)):
        if gamma == 0.0:
            continue
        a = ops.a[k]
        ad = a.conj().T
        term = (
            n_k * lindblad_term(ad)
            + (n_k + 1.0) * lindblad_term(a)
            + np.conj(m_k) * anomalous_term(a)
            + m_k * anomalous_term(ad)
        )
        total = total + (0.5 * gamma) * term
    return total.tocsr()


def lindblad_apply(
    rho: NDArray,
    ops: TruncatedOps,
    gammas: Sequence[float],
    n_th: Sequence[float],
    m_corr: Sequence[complex],
    time: float = 1.0,
    method: str = "rk",
    rtol: float = 1e-10,
    atol: float = 1e-10,
) -> NDArray[np.complex128]:
    """Evolve ``rho`` for ``time`` under the dissipative Gaussian generator.

    ``method="rk"`` integrates the master equation with an explicit
    Runge-Kutta scheme; ``method="krylov"`` applies the exact exponential of
    the (time-independent) superoperator through Krylov iteration.  The two
    agree to integration tolerance and the Krylov path is considerably
    faster, so tests validate their equivalence and use it for bulk work.
    """
    superop = lindblad_superop(ops, gammas, n_th, m_corr)
    vec = np.asarray(rho, dtype=complex).reshape(-1)
    if method == "krylov":
        out = expm_multiply(superop * time, vec)
    elif method == "rk":
        sol = solve_ivp(
            lambda _t, v: superop @ v,
            (0.0, time),
            vec,
            method="DOP853",
            rtol=rtol,
            atol=atol,
        )
        if not sol.success:
            raise StiffnessFailure(f"master-equation integration failed: {sol.message}")
        out = sol.y[:, -1]
    else:
        raise ValueError(f"unknown integration method {method!r}")
    result = out.reshape(rho.shape)
    return 0.5 * (result + result.conj().T)


def _lindblad_d(o: NDArray, rho: NDArray) -> NDArray:
    quad = o.conj().T @ o
    return 2.0 * o @ rho @ o.conj().T - quad @ rho - rho @ quad


def _anomalous_d(o: NDArray, rho: NDArray) -> NDArray:
    quad = o @ o
    return 2.0 * o @ rho @ o - quad @ rho - rho @ quad


def dissipator_derivative(
    rho_out: NDArray,
    ops: TruncatedOps,
    mode: int,
    which: str,
    gamma: float,
    n_th: float,
    m_corr: complex,
) -> NDArray[np.complex128]:
    """Exact parameter derivative of the channel output, as a superoperator.

    For a channel with relaxation rate ``gamma``, thermal occupation ``n_th``
    and anomalous correlation ``m_corr`` acting on ``mode``, the derivative of
    the output state with respect to each parameter is a fixed quadratic
    dissipator applied to the output itself; no finite differencing enters.
    The ``gamma`` derivative carries no damping prefactor, the environment
    parameters are scaled by ``1 - exp(-gamma)``.
    """
    a = ops.a[mode]
    ad = a.conj().T
    damp = 1.0 - np.exp(-gamma)
    if which == "gamma":
        out = 0.5 * (
            n_th * _lindblad_d(ad, rho_out)
            + (n_th + 1.0) * _lindblad_d(a, rho_out)
            + np.conj(m_corr) * _anomalous_d(a, rho_out)
            + m_corr * _anomalous_d(ad, rho_out)
        )
    elif which == "N":
        out = damp * 0.5 * (_lindblad_d(a, rho_out) + _lindblad_d(ad, rho_out))
    elif which == "ReM":
        out = damp * 0.5 * (_anomalous_d(a, rho_out) + _anomalous_d(ad, rho_out))
    elif which == "ImM":
        out = damp * 0.5 * (
            -1j * _anomalous_d(a, rho_out) + 1j * _anomalous_d(ad, rho_out)
        )
    else:
        raise ValueError(f"unknown parameter kind {which!r}")
    return np.asarray(out, dtype=complex)


def sld_fock(
    rho: NDArray, drho: NDArray, kernel_tol: float = 1e-12
) -> NDArray[np.complex128]:
    """Symmetric logarithmic derivative from the spectral formula.

    Solves ``drho = (L rho + rho L) / 2`` in the eigenbasis of ``rho``;
    matrix elements on eigenvalue pairs with ``p_a + p_b <= kernel_tol`` are
    set to zero (they do not contribute to any expectation value).
    """
    vals, vecs = np.linalg.eigh(np.asarray(rho, dtype=complex))
    d_tilde = vecs.conj().T @ np.asarray(drho, dtype=complex) @ vecs
    denom = vals[:, None] + vals[None, :]
    l_tilde = np.where(denom > kernel_tol, 2.0 * d_tilde / np.where(denom > kernel_tol, denom, 1.0), 0.0)
    sld = vecs @ l_tilde @ vecs.conj().T
    return 0.5 * (sld + sld.conj().T)


def qfi_fock(rho: NDArray, slds: Sequence[NDArray]) -> NDArray[np.float64]:
    """Quantum Fisher information matrix ``tr[rho (L_mu ∘ L_nu)]``."""
    m = len(slds)
    out = np.empty((m, m))
    for i in range(m):
        for j in range(i, m):
            val = 0.5 * np.real(np.trace(rho @ (slds[i] @ slds[j] + slds[j] @ slds[i])))
            out[i, j] = out[j, i] = val
    return out


def fidelity_fock(rho: NDArray, sigma: NDArray) -> float:
    """Uhlmann fidelity ``(tr sqrt(sqrt(rho) sigma sqrt(rho)))**2``.

    Accurate to roughly ``dim * sqrt(eps) * eps`` absolute: near-kernel
    eigenvalues of the inner product are known only to ``O(eps)`` and the
    square root lifts that noise to ``O(sqrt(eps))`` per direction, so
    finite differences of this value should keep steps well above the
    resulting ``~1e-7`` plateau.
    """
    vals, vecs = np.linalg.eigh(np.asarray(rho, dtype=complex))
    root = vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None))) @ vecs.conj().T
    inner = root @ np.asarray(sigma, dtype=complex) @ root
    inner_vals = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    return float(np.sum(np.sqrt(np.clip(inner_vals, 0.0, None))) ** 2)


def quadrature_polynomial(
    ops: TruncatedOps,
    constant: float,
    linear: NDArray,
    quadratic: NDArray,
    center: NDArray | None = None,
) -> NDArray[np.complex128]:
    """Lift ``c + sum l_k X_k + sum q_kl (X_k ∘ X_l)`` to a Fock operator.

    ``X = R - center`` are the quadratures shifted by ``center``; used to
    realise phase-space SLD polynomials as explicit Hermitian matrices.
    """
    dim = 2 * ops.n_modes
    linear = np.asarray(linear, dtype=float)
    quadratic = np.asarray(quadratic, dtype=float)
    if linear.shape != (dim,) or quadratic.shape != (dim, dim):
        raise DimensionMismatch(
            f"coefficients for {ops.n_modes} modes need shape ({dim},) and "
            f"({dim}, {dim}), got {linear.shape} and {quadratic.shape}"
        )
    quads = []
    for k in range(ops.n_modes):
        a = ops.a[k]
        quads.append((a + a.conj().T) / np.sqrt(2.0))
        quads.append((a - a.conj().T) / (1j * np.sqrt(2.0)))
    if center is not None:
        center = np.asarray(center, dtype=float)
        eye = np.eye(ops.dim)
        quads = [q - c * eye for q, c in zip(quads, center)]
    out = constant * np.eye(ops.dim, dtype=complex)
    for k in range(dim):
        if linear[k] != 0.0:
            out += linear[k] * quads[k]
    for k in range(dim):
        for l in range(dim):
            if quadratic[k, l] != 0.0:
                out += quadratic[k, l] * 0.5 * (
                    quads[k] @ quads[l] + quads[l] @ quads[k]
                )
    return out


def _evolved_output(
    rho0: NDArray, ops: TruncatedOps, values: NDArray, method: str
) -> NDArray[np.complex128]:
    channel = channel_from_values(values)
    gammas = [m.gamma for m in channel.modes]
    n_th = [m.n_th for m in channel.modes]
    m_corr = [m.m_corr for m in channel.modes]
    return lindblad_apply(rho0, ops, gammas, n_th, m_corr, method=method)


def qfi_from_fidelity_fd(
    channel: ChannelPoint,
    probe: GaussianState,
    params: Sequence[ParameterIndex] | None = None,
    cutoff: int = 20,
    base_step: float = 3e-2,
    method: str = "krylov",
) -> NDArray[np.float64]:
    """Fisher information from finite differences of the Bures distance.

    Around the working point, ``8 (1 - sqrt(F))`` between the output there and
    the output at a shifted channel grows quadratically with the information
    matrix as its Hessian.  Central differences at two step sizes are combined
    by Richardson extrapolation.  Purely a cross-check: slow, truncated, but
    entirely independent of the SLD machinery.

    The shifted channels must stay physical, so keep the working point at
    least ``2 * base_step`` away from ``gamma = 0``, ``N = 0`` and the
    ``|M|^2 = N(N+1)`` boundary.
    """
    if params is None:
        params = parameter_list(channel)
    ops = truncated_ops(probe.n_modes, cutoff)
    rho0 = state_to_fock(probe, cutoff)
    x0 = parameter_values(channel)
    base_rho = _evolved_output(rho0, ops, x0, method)
    kind_pos = {"gamma": 0, "N": 1, "ReM": 2, "ImM": 3}
    positions = [4 * p.mode + kind_pos[p.kind] for p in params]

    def bures_sq(shift: NDArray) -> float:
        out = _evolved_output(rho0, ops, x0 + shift, method)
        fid = min(max(fidelity_fock(base_rho, out), 0.0), 1.0)
        return 8.0 * (1.0 - np.sqrt(fid))

    def hessian_entry(i: int, j: int, step: float) -> float:
        e_i = np.zeros_like(x0)
        e_i[positions[i]] = step
        if i == j:
            return (bures_sq(e_i) + bures_sq(-e_i)) / step**2
        e_j = np.zeros_like(x0)
        e_j[positions[j]] = step
        return (
            bures_sq(e_i + e_j)
            - bures_sq(e_i - e_j)
            - bures_sq(-e_i + e_j)
            + bures_sq(-e_i - e_j)
        ) / (4.0 * step**2)

    d = len(params)
    matrix = np.empty((d, d))
    for i in range(d):
        for j in range(i, d):
            coarse = hessian_entry(i, j, base_step)
            fine = hessian_entry(i, j, base_step / 2.0)
            entry = 0.5 * (4.0 * fine - coarse) / 3.0
            matrix[i, j] = matrix[j, i] = entry
    return matrix
