"""Closed-form SLDs and quantum Fisher information at the phase-space level.

For a Gaussian probe sent through a dissipative Gaussian channel, the
derivative of the output state with respect to any channel parameter is a
fixed quadratic dissipator applied to the output.  Converting that dissipator
to quadrature indices and solving the symmetric-logarithmic-derivative
equation mode by mode in phase space yields SLDs that are themselves
quadratic polynomials in the quadratures, and a Fisher information matrix
assembled from small matrix contractions; no Hilbert-space truncation enters
anywhere.

Two equivalent tensor routes are implemented.  The ``cayley`` route applies
the Cayley-type map ``f(x) = (x - i/2) / (x + i/2)`` to the matrix
``cov @ Omega`` and inverts ``f ⊗ 1 + 1 ⊗ f^{-1}``; the ``rational`` route
rewrites the same inverse through ``cov Omega ⊗ cov Omega - 1/4`` and needs
no eigendecomposition.  Both are exposed and tested against each other; both
are singular exactly when the output state has a pure normal mode, which
raises :class:`SingularPureMode` unless a regularisation policy is selected.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .channel import (
    ChannelMode,
    ChannelPoint,
    ParameterIndex,
    apply_channel,
    parameter_list,
)
from .errors import IllConditioned, SingularPureMode
from .gaussian import GaussianState, symplectic_form, williamson

__all__ = [
    "SldForm",
    "QfiMatrix",
    "channel_alpha",
    "alpha_quadrature",
    "sld",
    "qfi",
    "regularize_pure",
    "reparametrize",
]

#: condition number of the mode-pair tensor beyond which the state counts as pure
CONDITION_LIMIT = 1e12
#: largest imaginary residue tolerated in quantities that must come out real
IMAG_RESIDUE_TOL = 1e-8
#: probe regularisation strengths used by the extrapolation policy
EXTRAPOLATION_EPS = (1e-4, 1e-5, 1e-6)


@dataclass(frozen=True)
class SldForm:
    """A symmetric logarithmic derivative as a quadrature polynomial.

    The operator is ``constant + sum_k linear[k] X_k + sum_kl quadratic[k, l]
    (X_k ∘ X_l)`` with ``X = R - center`` the quadratures shifted to the
    output mean and ``∘`` the symmetrised product.
    """

    label: str
    constant: float
    linear: NDArray[np.float64]
    quadratic: NDArray[np.float64]
    center: NDArray[np.float64]


@dataclass(frozen=True)
class QfiMatrix:
    """Quantum Fisher information matrix with row/column parameter labels."""

    labels: tuple[str, ...]
    matrix: NDArray[np.float64]
    diagnostics: dict


def mode_transform(n_modes: int) -> NDArray[np.complex128]:
    """Block-diagonal map from ladder pairs ``(a_k, a_k^†)`` to ``(Q_k, P_k)``."""
    block = np.array([[1.0, 1.0], [-1j, 1j]]) / np.sqrt(2.0)
    out = np.zeros((2 * n_modes, 2 * n_modes), dtype=complex)
    for k in range(n_modes):
        out[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] = block
    return out


def channel_alpha(kind: str, mode: ChannelMode) -> NDArray[np.complex128]:
    """Derivative-dissipator coefficients in the ladder basis ``(a, a^†)``.

    These are the weights of ``chi_i rho chi_j - (chi_j chi_i) ∘ rho`` such
    that the sum equals the derivative of the unit-time channel output with
    respect to the parameter ``kind``.  The rate derivative is exact at every
    ``gamma`` (including 0); the environment derivatives carry the integrated
    damping factor ``1 - exp(-gamma)``.
    """
    n, m = mode.n_th, mode.m_corr
    damp = 1.0 - np.exp(-mode.gamma)
    if kind == "gamma":
        return np.array([[np.conj(m), n + 1.0], [n, m]], dtype=complex)
    if kind == "N":
        return damp * np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
    if kind == "ReM":
        return damp * np.eye(2, dtype=complex)
    if kind == "ImM":
        return damp * np.diag([-1j, 1j])
    raise ValueError(f"unknown parameter kind {kind!r}")


def alpha_quadrature(
    param: ParameterIndex, channel: ChannelPoint, n_total: int
) -> NDArray[np.complex128]:
    """The derivative dissipator of ``param`` in quadrature indices.

    Embeds the 2x2 ladder-basis block of the parameter's mode into the full
    register and conjugates with the ladder-to-quadrature transform.
    """
    block = channel_alpha(param.kind, channel.modes[param.mode])
    full = np.zeros((2 * n_total, 2 * n_total), dtype=complex)
    sl = slice(2 * param.mode, 2 * param.mode + 2)
    full[sl, sl] = block
    h_dag = mode_transform(n_total).conj().T
    return np.einsum("ab,ai,bj->ij", full, h_dag, h_dag)


@dataclass(frozen=True)
class _Tensors:
    """Flattened four-index tensors of one output state (see module docstring)."""

    sigma: NDArray[np.float64]
    mean: NDArray[np.float64]
    omega: NDArray[np.float64]
    l0_flat: NDArray[np.complex128]
    l2_flat: NDArray[np.complex128]
    d4_flat: NDArray[np.complex128]
    sigma_inv: NDArray[np.float64]
    cond: float


def _purity_condition(cov: NDArray) -> tuple[float, NDArray[np.float64]]:
    """Condition number of the mode-pair tensor, from the symplectic spectrum.

    The flattened tensor ``cov Omega ⊗ cov Omega - 1/4`` has eigenvalues
    ``-(nu_j nu_k + 1)/4`` and ``(nu_j nu_k - 1)/4`` over mode pairs, so its
    conditioning is governed by how close ``nu_j nu_k`` comes to 1.
    """
    nu = williamson(cov).nu
    products = np.outer(nu, nu).ravel()
    smallest = float(np.min(np.abs(products - 1.0))) / 4.0
    largest = float(np.max(products + 1.0)) / 4.0
    if smallest == 0.0:
        return np.inf, nu
    return largest / smallest, nu


def _tensors(state: GaussianState, form: str) -> _Tensors:
    """Build the flattened SLD tensors for an output state."""
    n = state.n_modes
    dim = 2 * n
    omega = symplectic_form(n)
    sigma = state.cov
    sigma_tilde = sigma @ omega

    cond, nu = _purity_condition(sigma)
    if cond > CONDITION_LIMIT:
        pure = [f"nu_{k} = {v:.12g}" for k, v in enumerate(nu) if abs(v - 1.0) < 1e-6]
        raise SingularPureMode(
            "output state has (nearly) pure normal modes, the SLD tensors are "
            f"singular (condition {cond:.3e}; {', '.join(pure) or 'pair degeneracy'})"
        )

    eye_flat = np.eye(dim * dim)
    if form == "cayley":
        vals, vecs = np.linalg.eig(sigma_tilde)
        if np.min(np.abs(vals + 0.5j)) < 1.0 / (2.0 * CONDITION_LIMIT) or np.min(
            np.abs(vals - 0.5j)
        ) < 1.0 / (2.0 * CONDITION_LIMIT):
            raise SingularPureMode(
                "cayley map has a pole: an output normal mode is pure"
            )
        f_vals = (vals - 0.5j) / (vals + 0.5j)
        f_mat = vecs @ np.diag(f_vals) @ np.linalg.inv(vecs)
        f_inv = vecs @ np.diag(1.0 / f_vals) @ np.linalg.inv(vecs)
        eye = np.eye(dim)
        pair = np.kron(f_mat, eye) + np.kron(eye, f_inv)
        pair_inv = np.linalg.solve(pair, eye_flat)
        l0_flat = 1j * (pair_inv + 0.5 * eye_flat)
        l2_flat = 2.0 * (pair_inv - 0.5 * eye_flat)
    elif form == "rational":
        eye = np.eye(dim)
        skew = 0.5j * (np.kron(eye, sigma_tilde) - np.kron(sigma_tilde, eye))
        d4 = np.kron(sigma_tilde, sigma_tilde) - 0.25 * eye_flat
        l2_flat = np.linalg.solve(d4, skew + 0.5 * eye_flat)
        l0_flat = np.linalg.solve(
            d4, 1.0j * np.kron(sigma_tilde, sigma_tilde) + 0.5j * skew
        )
    else:
        raise ValueError(f"unknown tensor form {form!r}")

    d4_flat = np.kron(sigma_tilde, sigma_tilde) - 0.25 * eye_flat
    residual = np.linalg.norm(d4_flat @ l2_flat - (
        0.5j * (np.kron(np.eye(dim), sigma_tilde) - np.kron(sigma_tilde, np.eye(dim)))
        + 0.5 * eye_flat
    )) / max(1.0, np.linalg.norm(l2_flat))
    if residual > 1e-6:
        raise IllConditioned(
            f"tensor solve residual {residual:.3e} is too large "
            f"(pair condition {cond:.3e})"
        )

    sigma_inv = np.linalg.solve(sigma, np.eye(dim))
    return _Tensors(
        sigma=sigma,
        mean=state.mean,
        omega=omega,
        l0_flat=l0_flat,
        l2_flat=l2_flat,
        d4_flat=d4_flat,
        sigma_inv=sigma_inv,
        cond=cond,
    )


def _linear_tensor(t: _Tensors) -> NDArray[np.complex128]:
    """Three-index tensor whose contraction with the dissipator gives the
    linear SLD coefficients; built from ``(i/2) (cov Omega)^{-1}`` blocks."""
    st_inv = -t.omega @ t.sigma_inv  # inverse of cov @ Omega
    up = np.einsum("ik,j->ijk", st_inv, t.mean)
    down = np.einsum("jk,i->ijk", st_inv, t.mean)
    return 0.5j * (up - down)


def _real_part(value: NDArray | complex, what: str, scale: float) -> NDArray | float:
    residue = float(np.max(np.abs(np.imag(np.atleast_1d(value)))))
    if residue > IMAG_RESIDUE_TOL * max(1.0, scale):
        raise IllConditioned(
            f"{what} has imaginary residue {residue:.3e}; "
            "the tensor solves are unreliable for this state"
        )
    return np.real(value)


def _assemble(
    channel: ChannelPoint,
    output: GaussianState,
    params: Sequence[ParameterIndex],
    form: str,
) -> tuple[list[SldForm], NDArray[np.float64], dict]:
    t = _tensors(output, form)
    dim = 2 * output.n_modes
    l1 = _linear_tensor(t)
    vec_omega = t.omega.reshape(-1)
    vec_sigma = t.sigma.reshape(-1)

    forms: list[SldForm] = []
    linears = np.empty((len(params), dim))
    quads_flat = np.empty((len(params), dim * dim), dtype=complex)
    weights_flat = np.empty((len(params), dim * dim), dtype=complex)
    for row, param in enumerate(params):
        alpha = alpha_quadrature(param, channel, output.n_modes)
        va = alpha.reshape(-1)
        constant = complex(va @ (t.l0_flat @ vec_omega))
        linear = np.einsum("ij,ijk->k", alpha, l1)
        quad_flat = va @ t.l2_flat
        quad = quad_flat.reshape(dim, dim)
        quad_sym = 0.5 * (quad + quad.T)

        scale = float(np.max(np.abs(quad_flat))) + abs(constant)
        constant = float(_real_part(constant, f"SLD constant of {param.label}", scale))
        linear = np.asarray(
            _real_part(linear, f"SLD linear term of {param.label}", scale)
        )
        quad_sym = np.asarray(
            _real_part(quad_sym, f"SLD quadratic term of {param.label}", scale)
        )
        # consistency: the constant balances the quadratic trace, tr[rho L] = 0
        balance = constant + float(np.sum(quad_sym * t.sigma))
        if abs(balance) > 1e-6 * max(1.0, scale):
            raise IllConditioned(
                f"SLD of {param.label} violates tr[rho L] = 0 by {balance:.3e}"
            )
        forms.append(
            SldForm(
                label=param.label,
                constant=constant,
                linear=linear,
                quadratic=quad_sym,
                center=t.mean,
            )
        )
        linears[row] = linear
        quads_flat[row] = quad_flat
        weights_flat[row] = quad_flat @ t.d4_flat

    # information matrix: linear sensitivities plus the double contraction of
    # the quadratic weights against the symplectic form
    quads = quads_flat.reshape(len(params), dim, dim)
    weights = weights_flat.reshape(len(params), dim, dim)
    term1 = linears @ t.sigma @ linears.T
    term2 = np.einsum(
        "mij,ik,jl,nkl->mn", weights, t.omega, t.omega, quads
    ) + np.einsum("mij,il,jk,nkl->mn", weights, t.omega, t.omega, quads)
    matrix = term1 + term2
    matrix = 0.5 * (matrix + matrix.T)
    matrix = np.asarray(
        _real_part(matrix, "information matrix", float(np.max(np.abs(matrix))))
    )

    eigs = np.linalg.eigvalsh(matrix)
    diagnostics = {
        "pair_condition": t.cond,
        "min_eigenvalue": float(eigs[0]),
        "max_eigenvalue": float(eigs[-1]),
        "form": form,
    }
    return forms, matrix, diagnostics


def regularize_pure(state: GaussianState, eps: float = 1e-6) -> GaussianState:
    """Lift every normal mode of ``state`` to thermal parameter ``>= 1 + eps``.

    States already that mixed are returned unchanged, making the operation
    idempotent; otherwise the covariance is rebuilt in the Williamson basis
    with the small modes floored.
    """
    dec = williamson(state.cov)
    if np.all(dec.nu >= 1.0 + eps):
        return state
    nu = np.maximum(dec.nu, 1.0 + eps)
    cov = dec.symplectic @ (0.5 * np.diag(np.repeat(nu, 2))) @ dec.symplectic.T
    return GaussianState(state.mean, cov)


def _extrapolation_weights() -> NDArray[np.float64]:
    """Lagrange weights sending the regularisation ladder to zero."""
    x = np.asarray(EXTRAPOLATION_EPS)
    return np.array(
        [
            np.prod([-x[j] / (x[i] - x[j]) for j in range(3) if j != i])
            for i in range(3)
        ]
    )


def sld(
    channel: ChannelPoint,
    probe: GaussianState,
    params: Sequence[ParameterIndex] | None = None,
    form: str = "cayley",
    pure_policy: str = "raise",
    eps: float = 1e-6,
) -> list[SldForm]:
    """Symmetric logarithmic derivatives of the channel output.

    One quadrature polynomial per requested parameter (all channel parameters
    by default), evaluated at the output of ``channel`` on ``probe``.
    ``pure_policy`` follows :func:`qfi`: ``"regularize"`` returns the SLDs of
    the ``1 + eps``-floored probe, while ``"extrapolate"`` sends the
    coefficients to zero regularisation (exact whenever the unregularised
    SLD is finite, as it is for pure modes the parameters do not touch).
    """
    params = parameter_list(channel) if params is None else list(params)

    if pure_policy == "extrapolate":
        ladders = [
            _assemble(
                channel, apply_channel(channel, regularize_pure(probe, e)), params, form
            )[0]
            for e in EXTRAPOLATION_EPS
        ]
        weights = _extrapolation_weights()
        forms = []
        for trio in zip(*ladders):
            forms.append(
                SldForm(
                    label=trio[0].label,
                    constant=float(sum(w * f.constant for w, f in zip(weights, trio))),
                    linear=sum(w * f.linear for w, f in zip(weights, trio)),
                    quadratic=sum(w * f.quadratic for w, f in zip(weights, trio)),
                    center=trio[0].center,
                )
            )
        return forms

    output = apply_channel(channel, probe)
    try:
        forms, _, _ = _assemble(channel, output, params, form)
    except SingularPureMode:
        if pure_policy != "regularize":
            raise
        output = apply_channel(channel, regularize_pure(probe, eps))
        forms, _, _ = _assemble(channel, output, params, form)
    return forms


def qfi(
    channel: ChannelPoint,
    probe: GaussianState,
    params: Sequence[ParameterIndex] | None = None,
    form: str = "cayley",
    pure_policy: str = "raise",
    eps: float = 1e-6,
) -> QfiMatrix:
    """Quantum Fisher information matrix of the channel output.

    ``pure_policy`` controls what happens when the output has pure normal
    modes (which makes the SLD tensors singular):

    - ``"raise"``: propagate :class:`SingularPureMode`;
    - ``"regularize"``: retry once with the probe's normal modes floored at
      ``1 + eps``;
    - ``"extrapolate"``: evaluate at three regularisation strengths and
      polynomial-extrapolate the matrix to zero regularisation.
    """
    params = parameter_list(channel) if params is None else list(params)

    if pure_policy == "extrapolate":
        points = []
        for e in EXTRAPOLATION_EPS:
            out = apply_channel(channel, regularize_pure(probe, e))
            _, matrix, diagnostics = _assemble(channel, out, params, form)
            points.append(matrix)
        # quadratic (Lagrange) extrapolation of each entry to eps = 0
        weights = _extrapolation_weights()
        matrix = sum(w * m for w, m in zip(weights, points))
        matrix = 0.5 * (matrix + matrix.T)
        diagnostics = dict(diagnostics)
        diagnostics["pure_policy"] = "extrapolate"
        diagnostics["min_eigenvalue"] = float(np.linalg.eigvalsh(matrix)[0])
        return QfiMatrix(tuple(p.label for p in params), matrix, diagnostics)

    output = apply_channel(channel, probe)
    try:
        _, matrix, diagnostics = _assemble(channel, output, params, form)
    except SingularPureMode:
        if pure_policy != "regularize":
            raise
        output = apply_channel(channel, regularize_pure(probe, eps))
        _, matrix, diagnostics = _assemble(channel, output, params, form)
        diagnostics = dict(diagnostics)
        diagnostics["pure_policy"] = f"regularized eps={eps:g}"
    return QfiMatrix(tuple(p.label for p in params), matrix, diagnostics)


def reparametrize(
    qfi_matrix: QfiMatrix, jacobian: NDArray, labels: Sequence[str]
) -> QfiMatrix:
    """Pull the information matrix back through a smooth reparametrisation.

    ``jacobian[mu, nu] = d x_mu / d y_nu`` maps old coordinates ``x`` to new
    coordinates ``y``; information transforms by congruence.
    """
    jac = np.asarray(jacobian, dtype=float)
    if jac.shape[0] != qfi_matrix.matrix.shape[0]:
        raise IllConditioned(
            f"jacobian rows {jac.shape[0]} do not match {qfi_matrix.matrix.shape[0]}"
        )
    new = jac.T @ qfi_matrix.matrix @ jac
    new = 0.5 * (new + new.T)
    return QfiMatrix(tuple(labels), new, dict(qfi_matrix.diagnostics))
