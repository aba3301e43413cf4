"""Gaussian states of n bosonic modes and symplectic linear algebra.

Conventions used throughout the package:

- quadratures are interleaved, ``R = (Q1, P1, ..., Qn, Pn)``, with ``hbar = 1``
  so the vacuum covariance matrix is ``I/2``;
- the symplectic form is ``Omega = diag([[0, 1], [-1, 0]], ...)`` and satisfies
  ``[R_i, R_j] = i Omega_ij``;
- a symplectic matrix ``s`` acts as ``mean -> s mean``, ``cov -> s cov s^T`` and
  obeys ``s Omega s^T = Omega``;
- thermal parameters ``nu_k >= 1`` normalise the Williamson form so that
  ``cov = s (1/2 diag(nu_1, nu_1, ..., nu_n, nu_n)) s^T`` with the vacuum at
  ``nu = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import schur

from .errors import (
    BadModeIndex,
    DimensionMismatch,
    NonPhysicalCovariance,
    NonSymmetric,
)

__all__ = [
    "GaussianState",
    "WilliamsonDecomposition",
    "symplectic_form",
    "check_physical",
    "williamson",
    "symplectic_spectrum",
    "bloch_messiah",
    "passive_to_unitary",
    "unitary_to_passive",
    "vacuum_state",
    "thermal_state",
    "coherent_state",
    "two_mode_squeezed",
    "squeeze_symplectic",
    "rotation_symplectic",
    "tms_symplectic",
    "embed_symplectic",
    "apply_symplectic",
    "partial_trace",
    "purify",
    "mean_photon",
]

#: tolerance for relative symmetry violations of covariance matrices
SYMMETRY_TOL = 1e-12
#: slack allowed on the uncertainty relation eigenvalues
PHYSICALITY_TOL = 1e-10


def symplectic_form(n_modes: int) -> NDArray[np.float64]:
    """Return the 2n-by-2n symplectic form in interleaved (Q, P) ordering."""
    omega = np.zeros((2 * n_modes, 2 * n_modes))
    for k in range(n_modes):
        omega[2 * k, 2 * k + 1] = 1.0
        omega[2 * k + 1, 2 * k] = -1.0
    return omega


def _as_matrix(cov: NDArray, n_modes: int | None = None) -> NDArray[np.float64]:
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] % 2:
        raise DimensionMismatch(f"covariance must be (2n, 2n), got {cov.shape}")
    if n_modes is not None and cov.shape[0] != 2 * n_modes:
        raise DimensionMismatch(
            f"covariance shape {cov.shape} inconsistent with {n_modes} modes"
        )
    return cov


def check_physical(cov: NDArray, atol: float = PHYSICALITY_TOL) -> tuple[bool, dict]:
    """Check that ``cov`` is a valid quantum covariance matrix.

    Verifies symmetry and the uncertainty relation ``cov + i Omega / 2 >= 0``
    (equivalently, all symplectic eigenvalues at least ``1/2``).

    Returns
    -------
    (ok, diagnostics):
        ``ok`` is True when physical.  ``diagnostics`` reports the worst
        symmetry violation, the minimum eigenvalue of the uncertainty matrix
        and the symplectic spectrum in thermal normalisation (vacuum = 1).
    """
    cov = _as_matrix(cov)
    scale = max(1.0, float(np.max(np.abs(cov))))
    asym = float(np.max(np.abs(cov - cov.T))) / scale
    diagnostics: dict = {"asymmetry": asym}
    if asym > SYMMETRY_TOL:
        diagnostics["reason"] = "not symmetric"
        return False, diagnostics

    n_modes = cov.shape[0] // 2
    omega = symplectic_form(n_modes)
    uncertainty = cov + 0.5j * omega
    min_eig = float(np.linalg.eigvalsh(uncertainty)[0])
    diagnostics["min_uncertainty_eig"] = min_eig
    try:
        diagnostics["nu"] = symplectic_spectrum(cov)
    except (NonPhysicalCovariance, np.linalg.LinAlgError):
        diagnostics["nu"] = None
    if min_eig < -atol:
        diagnostics["reason"] = "uncertainty relation violated"
        return False, diagnostics
    return True, diagnostics


@dataclass(frozen=True)
class GaussianState:
    """Gaussian state given by a quadrature mean vector and covariance matrix.

    Both arrays are copied and frozen at construction time; states are
    immutable.  Construction validates symmetry and physicality.
    """

    mean: NDArray[np.float64]
    cov: NDArray[np.float64]

    def __post_init__(self) -> None:
        mean = np.array(self.mean, dtype=float, copy=True)
        cov = np.array(self.cov, dtype=float, copy=True)
        if mean.ndim != 1:
            raise DimensionMismatch(f"mean must be a vector, got shape {mean.shape}")
        cov = _as_matrix(cov)
        if mean.shape[0] != cov.shape[0]:
            raise DimensionMismatch(
                f"mean length {mean.shape[0]} != covariance size {cov.shape[0]}"
            )
        scale = max(1.0, float(np.max(np.abs(cov))))
        if float(np.max(np.abs(cov - cov.T))) > SYMMETRY_TOL * scale:
            raise NonSymmetric("covariance matrix is not symmetric")
        cov = 0.5 * (cov + cov.T)
        ok, diagnostics = check_physical(cov)
        if not ok:
            raise NonPhysicalCovariance(
                f"covariance violates the uncertainty relation: {diagnostics}"
            )
        mean.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def n_modes(self) -> int:
        return self.mean.shape[0] // 2


def vacuum_state(n_modes: int) -> GaussianState:
    """Vacuum on ``n_modes`` modes."""
    return GaussianState(np.zeros(2 * n_modes), 0.5 * np.eye(2 * n_modes))


def thermal_state(nu: Sequence[float]) -> GaussianState:
    """Product thermal state with thermal parameters ``nu_k >= 1``."""
    nu = np.asarray(nu, dtype=float)
    diag = np.repeat(nu, 2)
    return GaussianState(np.zeros(2 * len(nu)), 0.5 * np.diag(diag))


def coherent_state(alphas: Sequence[complex]) -> GaussianState:
    """Coherent state with complex amplitudes ``alphas`` (one per mode)."""
    alphas = np.asarray(alphas, dtype=complex)
    mean = np.empty(2 * len(alphas))
    mean[0::2] = np.sqrt(2.0) * alphas.real
    mean[1::2] = np.sqrt(2.0) * alphas.imag
    return GaussianState(mean, 0.5 * np.eye(2 * len(alphas)))


def rotation_symplectic(theta: float) -> NDArray[np.float64]:
    """Single-mode phase rotation (an orthogonal symplectic 2x2 block)."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def squeeze_symplectic(r: float, theta: float = 0.0) -> NDArray[np.float64]:
    """Single-mode squeezer with the squeezed axis rotated by ``theta``.

    At ``theta = 0`` the Q variance is scaled by ``exp(-2r)``.
    """
    rot = rotation_symplectic(theta)
    return rot @ np.diag([np.exp(-r), np.exp(r)]) @ rot.T


def tms_symplectic(r: float) -> NDArray[np.float64]:
    """Two-mode squeezing symplectic on a pair of modes."""
    ch, sh = np.cosh(r), np.sinh(r)
    sz = np.diag([1.0, -1.0])
    out = np.zeros((4, 4))
    out[:2, :2] = ch * np.eye(2)
    out[2:, 2:] = ch * np.eye(2)
    out[:2, 2:] = sh * sz
    out[2:, :2] = sh * sz
    return out


def embed_symplectic(
    block: NDArray, modes: Sequence[int], n_modes: int
) -> NDArray[np.float64]:
    """Embed a symplectic acting on ``modes`` into the identity on ``n_modes``."""
    modes = list(modes)
    if len(set(modes)) != len(modes) or any(
        m < 0 or m >= n_modes for m in modes
    ):
        raise BadModeIndex(f"invalid mode selection {modes} for {n_modes} modes")
    block = np.asarray(block, dtype=float)
    if block.shape != (2 * len(modes), 2 * len(modes)):
        raise DimensionMismatch(
            f"block shape {block.shape} does not act on {len(modes)} modes"
        )
    out = np.eye(2 * n_modes)
    idx = np.concatenate([[2 * m, 2 * m + 1] for m in modes])
    out[np.ix_(idx, idx)] = block
    return out


def two_mode_squeezed(r: float) -> GaussianState:
    """Two-mode squeezed vacuum with squeezing parameter ``r``.

    Each arm has mean photon number ``sinh(r)^2``; tracing out one arm leaves
    a thermal state with ``nu = cosh(2r)``.
    """
    return apply_symplectic(vacuum_state(2), tms_symplectic(r))


def apply_symplectic(state: GaussianState, s: NDArray) -> GaussianState:
    """Return the state transformed by the symplectic matrix ``s``."""
    s = np.asarray(s, dtype=float)
    if s.shape != (2 * state.n_modes,) * 2:
        raise DimensionMismatch(
            f"symplectic shape {s.shape} does not match {state.n_modes} modes"
        )
    return GaussianState(s @ state.mean, s @ state.cov @ s.T)


@dataclass(frozen=True)
class WilliamsonDecomposition:
    """Normal-mode decomposition ``cov = s * (1/2 diag(nu ⊗ (1,1))) * s^T``.

    ``nu`` is sorted ascending with ``nu_k >= 1`` for physical states; ``s``
    is symplectic.  ``thermal_cov`` rebuilds the diagonal thermal factor.
    """

    nu: NDArray[np.float64]
    symplectic: NDArray[np.float64]

    @property
    def thermal_cov(self) -> NDArray[np.float64]:
        return 0.5 * np.diag(np.repeat(self.nu, 2))


def _matrix_sqrt_spd(mat: NDArray, name: str) -> tuple[NDArray, NDArray]:
    """Return (sqrt, inverse sqrt) of a symmetric positive-definite matrix."""
    vals, vecs = np.linalg.eigh(0.5 * (mat + mat.T))
    if vals[0] <= 0.0:
        raise NonPhysicalCovariance(
            f"{name} is not positive definite (min eigenvalue {vals[0]:.3e})"
        )
    root = vecs @ np.diag(np.sqrt(vals)) @ vecs.T
    inv_root = vecs @ np.diag(1.0 / np.sqrt(vals)) @ vecs.T
    return root, inv_root


def _normalise_schur_pairs(
    t_mat: NDArray, q_mat: NDArray
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Sort and gauge-fix the real Schur form of an antisymmetric matrix.

    Returns ``(d, q)`` with ``q`` orthogonal and ``q^T A q`` equal to
    block-diagonal ``[[0, d_k], [-d_k, 0]]`` blocks, ``d`` ascending.  The
    rotation freedom inside each block is fixed by making the component of the
    first column with the largest pair magnitude positive and the matching
    second-column component zero.
    """
    dim = t_mat.shape[0]
    n = dim // 2
    off = np.array([t_mat[2 * k, 2 * k + 1] for k in range(n)])
    # tolerate tiny junk outside the 2x2 diagonal blocks
    block = np.zeros_like(t_mat)
    for k in range(n):
        block[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] = t_mat[
            2 * k : 2 * k + 2, 2 * k : 2 * k + 2
        ]
    if np.max(np.abs(t_mat - block)) > 1e-8 * max(1.0, np.max(np.abs(off))):
        raise NonPhysicalCovariance("Schur form of symplectic product not block-diagonal")

    q = q_mat.copy()
    # flip pairs so the (2k, 2k+1) entry is positive
    for k in range(n):
        if off[k] < 0.0:
            q[:, [2 * k, 2 * k + 1]] = q[:, [2 * k + 1, 2 * k]]
            off[k] = -off[k]
    order = np.argsort(off, kind="stable")
    perm = np.empty(dim, dtype=int)
    for new, old in enumerate(order):
        perm[2 * new] = 2 * old
        perm[2 * new + 1] = 2 * old + 1
    q = q[:, perm]
    d = off[order]

    for k in range(n):
        c1 = q[:, 2 * k].copy()
        c2 = q[:, 2 * k + 1].copy()
        r = int(np.argmax(c1**2 + c2**2))
        theta = np.arctan2(c2[r], c1[r])
        ct, st = np.cos(theta), np.sin(theta)
        q[:, 2 * k] = ct * c1 + st * c2
        q[:, 2 * k + 1] = -st * c1 + ct * c2
    return d, q


def williamson(cov: NDArray) -> WilliamsonDecomposition:
    """Williamson normal-mode decomposition of a covariance matrix.

    Computed from the antisymmetric product ``cov^{1/2} Omega cov^{1/2}``
    brought to real Schur form, which keeps the construction symmetric and
    well conditioned.  Raises :class:`NonPhysicalCovariance` when ``cov`` is
    not positive definite.
    """
    cov = _as_matrix(cov)
    scale = max(1.0, float(np.max(np.abs(cov))))
    if float(np.max(np.abs(cov - cov.T))) > SYMMETRY_TOL * scale:
        raise NonSymmetric("covariance matrix is not symmetric")
    n_modes = cov.shape[0] // 2
    omega = symplectic_form(n_modes)
    root, _ = _matrix_sqrt_spd(cov, "covariance")
    anti = root @ omega @ root
    anti = 0.5 * (anti - anti.T)
    t_mat, q_mat = schur(anti, output="real")
    d, q = _normalise_schur_pairs(t_mat, q_mat)
    s = root @ q @ np.diag(np.repeat(1.0 / np.sqrt(d), 2))
    return WilliamsonDecomposition(nu=2.0 * d, symplectic=s)


def symplectic_spectrum(cov: NDArray) -> NDArray[np.float64]:
    """Symplectic eigenvalues in thermal normalisation (vacuum = 1), ascending."""
    cov = _as_matrix(cov)
    n_modes = cov.shape[0] // 2
    omega = symplectic_form(n_modes)
    eigs = np.linalg.eigvals(1j * (omega @ cov))
    # absolute eigenvalues come in duplicate pairs (d, d); keep one per pair
    nu = 2.0 * np.sort(np.abs(eigs))[::2]
    return nu


def bloch_messiah(
    s: NDArray,
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """Euler decomposition ``s = k1 @ Z @ k2`` of a symplectic matrix.

    ``k1`` and ``k2`` are orthogonal symplectic (passive) and
    ``Z = diag(z_1, 1/z_1, ..., z_n, 1/z_n)`` with ``z_k >= 1`` collects the
    single-mode squeezers.  Returns ``(k1, z, k2)`` with ``z`` the vector of
    per-mode factors.
    """
    s = np.asarray(s, dtype=float)
    dim = s.shape[0]
    n = dim // 2
    omega = symplectic_form(n)
    if np.max(np.abs(s @ omega @ s.T - omega)) > 1e-10 * max(
        1.0, float(np.max(np.abs(s))) ** 2
    ):
        raise DimensionMismatch("matrix is not symplectic")

    gram = s.T @ s
    p_mat, p_inv = _matrix_sqrt_spd(gram, "polar factor")
    ortho = s @ p_inv
    # re-orthogonalise against rounding drift
    u_svd, _, vt_svd = np.linalg.svd(ortho)
    ortho = u_svd @ vt_svd

    vals, vecs = np.linalg.eigh(p_mat)
    # collect eigenvectors with eigenvalue >= 1, pair them through Omega^T
    columns: list[NDArray] = []
    z = []
    used = np.zeros(dim, dtype=bool)
    order = np.argsort(-vals, kind="stable")
    basis = vecs[:, order]
    lam = vals[order]
    for idx in range(dim):
        if used[idx] or lam[idx] < 1.0 - 1e-9:
            continue
        v = basis[:, idx]
        # remove components of already-selected pair partners
        for col in columns:
            v = v - col * (col @ v)
        nrm = np.linalg.norm(v)
        if nrm < 1e-8:
            continue
        v = v / nrm
        w = omega.T @ v
        for col in columns:
            w = w - col * (col @ w)
        w = w / np.linalg.norm(w)
        used[idx] = True
        columns.extend([v, w])
        z.append(max(lam[idx], 1.0))
        if len(z) == n:
            break
    if len(z) != n:
        raise NonPhysicalCovariance("failed to pair symplectic polar eigenvectors")
    k = np.column_stack(columns)
    z = np.array(z)
    k1 = ortho @ k
    k2 = k.T
    return k1, z, k2


def passive_to_unitary(k: NDArray) -> NDArray[np.complex128]:
    """Complex n-by-n unitary representing an orthogonal symplectic matrix.

    The passive block structure is ``k[2j:2j+2, 2l:2l+2] =
    [[Re u_jl, -Im u_jl], [Im u_jl, Re u_jl]]``.
    """
    k = np.asarray(k, dtype=float)
    n = k.shape[0] // 2
    u = k[0::2, 0::2] + 1j * k[1::2, 0::2]
    if np.max(np.abs(u @ u.conj().T - np.eye(n))) > 1e-8:
        raise DimensionMismatch("matrix is not orthogonal symplectic")
    return u


def unitary_to_passive(u: NDArray) -> NDArray[np.float64]:
    """Real symplectic representation of a complex n-by-n unitary."""
    u = np.asarray(u, dtype=complex)
    n = u.shape[0]
    k = np.zeros((2 * n, 2 * n))
    k[0::2, 0::2] = u.real
    k[0::2, 1::2] = -u.imag
    k[1::2, 0::2] = u.imag
    k[1::2, 1::2] = u.real
    return k


def _quad_indices(modes: Iterable[int], n_modes: int) -> NDArray[np.intp]:
    modes = list(modes)
    if len(set(modes)) != len(modes) or any(m < 0 or m >= n_modes for m in modes):
        raise BadModeIndex(f"invalid mode selection {modes} for {n_modes} modes")
    return np.concatenate([[2 * m, 2 * m + 1] for m in modes]).astype(np.intp)


def partial_trace(state: GaussianState, keep: Sequence[int]) -> GaussianState:
    """Reduced Gaussian state on the ``keep`` modes (input left untouched)."""
    idx = _quad_indices(keep, state.n_modes)
    return GaussianState(state.mean[idx], state.cov[np.ix_(idx, idx)])


def purify(state: GaussianState) -> GaussianState:
    """Return a pure 2n-mode state whose first n modes reduce to ``state``.

    Built from the Williamson decomposition by pairing each normal mode with
    an ancilla through two-mode squeezing with ``cosh(2r) = nu``.
    """
    decomp = williamson(state.cov)
    n = state.n_modes
    nu = np.maximum(decomp.nu, 1.0)
    big = np.zeros((4 * n, 4 * n))
    for k in range(n):
        c = nu[k] / 2.0
        x = np.sqrt(nu[k] ** 2 - 1.0) / 2.0
        sys_sl = slice(2 * k, 2 * k + 2)
        anc_sl = slice(2 * (n + k), 2 * (n + k) + 2)
        big[sys_sl, sys_sl] = c * np.eye(2)
        big[anc_sl, anc_sl] = c * np.eye(2)
        big[sys_sl, anc_sl] = x * np.diag([1.0, -1.0])
        big[anc_sl, sys_sl] = x * np.diag([1.0, -1.0])
    s_full = np.eye(4 * n)
    s_full[: 2 * n, : 2 * n] = decomp.symplectic
    cov = s_full @ big @ s_full.T
    mean = np.concatenate([state.mean, np.zeros(2 * n)])
    return GaussianState(mean, cov)


def mean_photon(state: GaussianState, modes: Sequence[int] | None = None) -> float:
    """Total mean photon number over ``modes`` (all modes by default)."""
    if modes is None:
        modes = range(state.n_modes)
    total = 0.0
    for m in modes:
        if m < 0 or m >= state.n_modes:
            raise BadModeIndex(f"mode {m} out of range for {state.n_modes} modes")
        q, p = 2 * m, 2 * m + 1
        total += 0.5 * (state.cov[q, q] + state.cov[p, p] - 1.0)
        total += 0.5 * (state.mean[q] ** 2 + state.mean[p] ** 2)
    return float(total)
