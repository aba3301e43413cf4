"""Tests for the closed-form SLD and Fisher-information engine.

Frozen values: for the channel ``gamma = ln 2, N = 1/2, M = 0`` on the
thermal probe with symplectic eigenvalue 2 the output is again thermal with
occupation 1/2, and the SLD of the occupation parameter is
``(Q^2 + P^2)/3 - 2/3`` with information exactly 1/3.  These literals were
derived by hand from the thermal family (where the SLD is
``(n - nbar)/(nbar(nbar+1))``) and are locked in below; everything else is
cross-validated against the truncated Fock oracle.
"""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gchmetric.channel import (
    ChannelMode,
    ChannelPoint,
    apply_channel,
    parameter_list,
)
from gchmetric.errors import SingularPureMode
from gchmetric.fock import (
    dissipator_derivative,
    lindblad_apply,
    qfi_fock,
    qfi_from_fidelity_fd,
    quadrature_polynomial,
    sld_fock,
    state_to_fock,
    truncated_ops,
)
from gchmetric.gaussian import (
    GaussianState,
    apply_symplectic,
    coherent_state,
    squeeze_symplectic,
    symplectic_spectrum,
    thermal_state,
    two_mode_squeezed,
    vacuum_state,
)
from gchmetric.qfi import (
    QfiMatrix,
    alpha_quadrature,
    channel_alpha,
    qfi,
    regularize_pure,
    reparametrize,
    sld,
)
from gchmetric.channel import ParameterIndex

from conftest import random_covariance


def _single_mode_channel(gamma=0.7, n_th=0.35, m_corr=0.22 - 0.13j) -> ChannelPoint:
    return ChannelPoint((ChannelMode(gamma, n_th, m_corr),))


def _displaced_mixed_probe() -> GaussianState:
    probe = apply_symplectic(thermal_state([1.4]), squeeze_symplectic(0.3, 0.5))
    return GaussianState(probe.mean + np.array([0.5, -0.3]), probe.cov)


# ---------------------------------------------------------------------------
# derivative dissipator coefficients


def test_alpha_rate_is_damping_free_and_env_terms_carry_integrated_damping():
    mode = ChannelMode(np.log(2.0), 0.5, 0.1 + 0.2j)
    a_gamma = channel_alpha("gamma", mode)
    assert np.allclose(a_gamma, [[0.1 - 0.2j, 1.5], [0.5, 0.1 + 0.2j]])
    a_n = channel_alpha("N", mode)
    assert np.allclose(a_n, 0.5 * np.array([[0, 1], [1, 0]]))  # 1 - e^{-ln 2}
    a_re = channel_alpha("ReM", mode)
    assert np.allclose(a_re, 0.5 * np.eye(2))
    a_im = channel_alpha("ImM", mode)
    assert np.allclose(a_im, 0.5 * np.diag([-1j, 1j]))


def test_alpha_occupation_is_identity_in_quadratures():
    channel = _single_mode_channel(gamma=np.log(2.0), n_th=0.5, m_corr=0.0)
    alpha = alpha_quadrature(ParameterIndex("N", 0), channel, 1)
    assert np.allclose(alpha, 0.5 * np.eye(2))


def test_alpha_embeds_on_the_right_mode():
    channel = ChannelPoint((ChannelMode(0.5, 0.2), ChannelMode(0.5, 0.2)))
    alpha = alpha_quadrature(ParameterIndex("N", 1), channel, 3)
    assert np.allclose(alpha[:2, :2], 0.0)
    assert np.allclose(alpha[4:, 4:], 0.0)
    assert not np.allclose(alpha[2:4, 2:4], 0.0)


# ---------------------------------------------------------------------------
# frozen thermal case


def test_thermal_sld_frozen_values():
    channel = ChannelPoint((ChannelMode(np.log(2.0), 0.5),))
    form = sld(channel, thermal_state([2.0]), [ParameterIndex("N", 0)])[0]
    assert form.constant == pytest.approx(-2.0 / 3.0, abs=1e-12)
    assert np.max(np.abs(form.linear)) < 1e-12
    assert np.allclose(form.quadratic, np.eye(2) / 3.0, atol=1e-12)
    assert form.label == "N[0]"


def test_thermal_qfi_frozen_value():
    channel = ChannelPoint((ChannelMode(np.log(2.0), 0.5),))
    result = qfi(channel, thermal_state([2.0]), [ParameterIndex("N", 0)])
    assert result.matrix[0, 0] == pytest.approx(1.0 / 3.0, abs=1e-12)


def test_occupation_qfi_closed_form_on_vacuum():
    """J_NN = (1 - e^{-gamma})^2 / (nbar (nbar + 1)) with nbar = N(1 - e^{-gamma})."""
    gamma, n_th = 0.3, 1.0
    channel = ChannelPoint((ChannelMode(gamma, n_th),))
    result = qfi(channel, vacuum_state(1), [ParameterIndex("N", 0)])
    damp = 1.0 - np.exp(-gamma)
    nbar = n_th * damp
    assert result.matrix[0, 0] == pytest.approx(
        damp**2 / (nbar * (nbar + 1)), rel=1e-12
    )


# ---------------------------------------------------------------------------
# the two tensor routes agree


@pytest.mark.parametrize("n_modes", [1, 2])
def test_cayley_and_rational_forms_agree(n_modes):
    rng = np.random.default_rng(31 + n_modes)
    cov = random_covariance(n_modes, rng, nu_max=1.6, max_squeeze=0.4)
    probe = GaussianState(0.4 * rng.normal(size=2 * n_modes), cov)
    channel = _single_mode_channel()
    a = qfi(channel, probe, form="cayley")
    b = qfi(channel, probe, form="rational")
    assert np.max(np.abs(a.matrix - b.matrix)) < 1e-9
    sa = sld(channel, probe, form="cayley")
    sb = sld(channel, probe, form="rational")
    for fa, fb in zip(sa, sb):
        assert fa.constant == pytest.approx(fb.constant, abs=1e-9)
        assert np.allclose(fa.linear, fb.linear, atol=1e-9)
        assert np.allclose(fa.quadratic, fb.quadratic, atol=1e-9)


# ---------------------------------------------------------------------------
# oracle cross-checks


def test_sld_solves_the_lyapunov_equation_in_fock_space():
    """d rho = L ∘ rho, with d rho from the exact derivative dissipator."""
    probe = _displaced_mixed_probe()
    gamma, n_th, m_corr = 0.7, 0.35, 0.22 - 0.13j
    channel = _single_mode_channel(gamma, n_th, m_corr)
    params = parameter_list(channel)
    forms = sld(channel, probe, params)

    cutoff = 30
    ops = truncated_ops(1, cutoff)
    rho_out = lindblad_apply(
        state_to_fock(probe, cutoff), ops, [gamma], [n_th], [m_corr], method="krylov"
    )
    for param, form in zip(params, forms):
        drho = dissipator_derivative(
            rho_out, ops, 0, param.kind, gamma, n_th, m_corr
        )
        lifted = quadrature_polynomial(
            ops, form.constant, form.linear, form.quadratic, form.center
        )
        residual = drho - 0.5 * (lifted @ rho_out + rho_out @ lifted)
        trace_norm = np.sum(
            np.abs(np.linalg.eigvalsh(0.5 * (residual + residual.conj().T)))
        )
        assert trace_norm < 1e-7, f"{param.label}: {trace_norm:.3e}"
        assert abs(np.trace(rho_out @ lifted)) < 1e-8


def test_qfi_matches_fock_sld_oracle():
    probe = _displaced_mixed_probe()
    gamma, n_th, m_corr = 0.7, 0.35, 0.22 - 0.13j
    channel = _single_mode_channel(gamma, n_th, m_corr)
    params = parameter_list(channel)
    result = qfi(channel, probe, params)

    cutoff = 30
    ops = truncated_ops(1, cutoff)
    rho_out = lindblad_apply(
        state_to_fock(probe, cutoff), ops, [gamma], [n_th], [m_corr], method="krylov"
    )
    slds = [
        sld_fock(
            rho_out,
            dissipator_derivative(rho_out, ops, 0, p.kind, gamma, n_th, m_corr),
        )
        for p in params
    ]
    reference = qfi_fock(rho_out, slds)
    rel = np.linalg.norm(result.matrix - reference) / np.linalg.norm(reference)
    assert rel < 1e-6


def test_qfi_matches_bures_hessian_oracle():
    probe = _displaced_mixed_probe()
    channel = _single_mode_channel()
    params = parameter_list(channel)
    result = qfi(channel, probe, params)
    reference = qfi_from_fidelity_fd(channel, probe, params, cutoff=30)
    rel = np.linalg.norm(result.matrix - reference) / np.linalg.norm(reference)
    assert rel < 5e-5


# ---------------------------------------------------------------------------
# pure probes and regularisation


def test_pure_output_raises_by_default():
    channel = ChannelPoint((ChannelMode(0.6, 0.0),))  # pure loss
    with pytest.raises(SingularPureMode):
        qfi(channel, coherent_state([0.8]))


def test_idle_pure_ancilla_raises_by_default():
    channel = ChannelPoint((ChannelMode(0.6, 0.3),))
    probe = GaussianState(np.zeros(4), 0.5 * np.eye(4))  # product vacuum pair
    with pytest.raises(SingularPureMode):
        qfi(channel, probe)


def test_regularize_pure_is_idempotent_and_floors_nu():
    state = vacuum_state(2)
    lifted = regularize_pure(state, eps=1e-4)
    assert np.all(symplectic_spectrum(lifted.cov) >= 1.0 + 0.9e-4)
    again = regularize_pure(lifted, eps=1e-4)
    assert again is lifted
    mixed = thermal_state([1.5])
    assert regularize_pure(mixed, eps=1e-4) is mixed


def test_coherent_probe_loss_rate_information_by_extrapolation():
    """Pure-loss rate information from a coherent probe is e^{-gamma} |alpha|^2."""
    alpha, gamma = 0.8, 0.6
    channel = ChannelPoint((ChannelMode(gamma, 0.0),))
    probe = coherent_state([alpha])
    result = qfi(
        channel, probe, [ParameterIndex("gamma", 0)], pure_policy="extrapolate"
    )
    want = np.exp(-gamma) * alpha**2
    assert result.matrix[0, 0] == pytest.approx(want, rel=1e-6)
    assert result.diagnostics["pure_policy"] == "extrapolate"


def test_regularize_policy_close_to_extrapolation():
    channel = ChannelPoint((ChannelMode(0.6, 0.0),))
    probe = coherent_state([0.8])
    param = [ParameterIndex("gamma", 0)]
    a = qfi(channel, probe, param, pure_policy="regularize", eps=1e-6)
    b = qfi(channel, probe, param, pure_policy="extrapolate")
    assert a.matrix[0, 0] == pytest.approx(b.matrix[0, 0], rel=1e-4)
    assert "regularized" in a.diagnostics["pure_policy"]


def test_sld_policies_are_no_ops_on_mixed_outputs():
    channel = ChannelPoint((ChannelMode(0.4, 0.6, 0.2 + 0.1j),))
    probe = two_mode_squeezed(0.35)  # one-sided loss mixes both normal modes
    direct = sld(channel, probe)
    regularized = sld(channel, probe, pure_policy="regularize")
    extrapolated = sld(channel, probe, pure_policy="extrapolate")
    for a, b, c in zip(direct, regularized, extrapolated):
        assert np.array_equal(a.quadratic, b.quadratic)
        assert np.array_equal(a.linear, b.linear)
        assert a.constant == b.constant
        np.testing.assert_allclose(c.quadratic, a.quadratic, atol=1e-10)
        np.testing.assert_allclose(c.linear, a.linear, atol=1e-10)
        assert c.constant == pytest.approx(a.constant, abs=1e-10)


def test_sld_extrapolation_beats_flooring_for_idle_pure_ancilla():
    """A floored SLD keeps an O(eps)-scale defining-equation residual; the
    zero-regularisation limit removes it (the limit exists because the channel
    parameters never touch the pure ancilla)."""
    channel = ChannelPoint((ChannelMode(0.3, 0.8),))
    probe = coherent_state([0.3, 0.0])  # coherent signal, vacuum ancilla
    with pytest.raises(SingularPureMode):
        sld(channel, probe)

    cutoff = 14
    ops = truncated_ops(2, cutoff)
    rho_out = state_to_fock(apply_channel(channel, probe), cutoff)
    params = parameter_list(channel)
    worst = {}
    for policy in ("extrapolate", "regularize"):
        forms = sld(channel, probe, params, pure_policy=policy)
        residuals = []
        traces = []
        for param, form in zip(params, forms):
            mode = channel.modes[0]
            drho = dissipator_derivative(
                rho_out, ops, 0, param.kind, mode.gamma, mode.n_th, mode.m_corr
            )
            lifted = quadrature_polynomial(
                ops, form.constant, form.linear, form.quadratic, form.center
            )
            residual = drho - 0.5 * (lifted @ rho_out + rho_out @ lifted)
            residuals.append(np.sum(np.abs(np.linalg.eigvalsh(residual))))
            traces.append(abs(np.trace(rho_out @ lifted)))
        worst[policy] = max(residuals)
        # zero-mean holds exactly in the limit; the floored SLD keeps an
        # O(eps)-sized offset against the true (unfloored) output state
        assert max(traces) < (1e-7 if policy == "extrapolate" else 1e-5)
    assert worst["extrapolate"] < 5e-7
    assert worst["regularize"] > 5 * worst["extrapolate"]


# ---------------------------------------------------------------------------
# structural properties


def test_product_probe_independent_channels_give_block_diagonal_qfi():
    channel = ChannelPoint((ChannelMode(0.5, 0.3, 0.1), ChannelMode(0.9, 0.2, -0.1j)))
    probe = thermal_state([1.3, 1.7])
    result = qfi(channel, probe)
    cross = result.matrix[:4, 4:]
    assert np.max(np.abs(cross)) < 1e-10


def test_qfi_labels_follow_parameter_order():
    channel = ChannelPoint((ChannelMode(0.5, 0.3), ChannelMode(0.9, 0.2)))
    result = qfi(channel, thermal_state([1.3, 1.7]))
    assert result.labels == (
        "gamma[0]", "N[0]", "ReM[0]", "ImM[0]",
        "gamma[1]", "N[1]", "ReM[1]", "ImM[1]",
    )


def test_reparametrize_is_congruence():
    channel = _single_mode_channel()
    result = qfi(channel, thermal_state([1.6]))
    rng = np.random.default_rng(2)
    jac = rng.normal(size=(4, 4))
    new = reparametrize(result, jac, [f"y{i}" for i in range(4)])
    assert np.allclose(new.matrix, jac.T @ result.matrix @ jac, atol=1e-12)
    assert new.labels == ("y0", "y1", "y2", "y3")


def test_gamma_zero_environment_rows_vanish():
    """At gamma = 0 the environment has not acted: only the rate is visible."""
    channel = ChannelPoint((ChannelMode(0.0, 0.4, 0.1),))
    result = qfi(channel, thermal_state([1.8]))
    matrix = result.matrix
    for row, label in enumerate(result.labels):
        if label != "gamma[0]":
            assert np.max(np.abs(matrix[row])) < 1e-12
    assert matrix[0, 0] > 0.0


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**31 - 1))
def test_qfi_is_positive_semidefinite(seed):
    rng = np.random.default_rng(seed)
    cov = random_covariance(1, rng, nu_max=1.8, max_squeeze=0.5)
    probe = GaussianState(0.5 * rng.normal(size=2), cov)
    gamma = rng.uniform(0.1, 1.5)
    n_th = rng.uniform(0.05, 0.8)
    m_max = np.sqrt(n_th * (n_th + 1.0))
    m_corr = rng.uniform(0, 0.7) * m_max * np.exp(2j * np.pi * rng.uniform())
    channel = ChannelPoint((ChannelMode(gamma, n_th, m_corr),))
    result = qfi(channel, probe)
    assert np.linalg.eigvalsh(result.matrix)[0] > -1e-8


def test_qfi_output_is_exactly_symmetric():
    channel = _single_mode_channel()
    result = qfi(channel, _displaced_mixed_probe())
    assert np.array_equal(result.matrix, result.matrix.T)
    assert isinstance(result, QfiMatrix)
