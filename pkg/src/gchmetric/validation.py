"""Cross-validation of the Gaussian engine against the Fock-space oracle.

The regression grid pairs a handful of channel points (covering plain loss,
thermal occupation, and complex anomalous correlations) with probe families
that exercise displacement, thermal mixing, and probe--ancilla entanglement.
Every pair is checked by rebuilding the information matrix from scratch in
the truncated number basis — exact parameter derivatives, spectral SLDs —
and comparing with the closed-form engine result.

The grid is deliberately confined to the regime where the default cutoff of
20 certifies tight tolerances.  Residuals of the logarithmic-derivative
defining equation are evaluated by lifting a quadratic polynomial whose
matrix elements grow with the photon number, so number-basis tails that are
irrelevant for trace or moment accuracy get amplified by the cutoff boundary.
Keeping every probe at modest energy and every ancilla strictly mixed makes
those boundary terms negligible and keeps all twelve outputs away from the
singular pure-state limit, where the logarithmic derivative itself stops
being unique.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .channel import ChannelMode, ChannelPoint, ParameterIndex, parameter_list
from .errors import GchMetricError
from .fock import (
    dissipator_derivative,
    lindblad_apply,
    qfi_fock,
    sld_fock,
    state_to_fock,
    truncated_ops,
)
from .gaussian import GaussianState, thermal_state, two_mode_squeezed
from .qfi import qfi

__all__ = [
    "CheckResult",
    "regression_grid",
    "oracle_qfi_matrix",
    "run_oracle_checks",
]

#: engine/oracle agreement required of every grid pair (relative Frobenius)
GRID_RTOL = 1e-4


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one oracle comparison."""

    name: str
    status: str  # "pass" | "fail" | "error"
    residual: float | None
    tolerance: float
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "pass"


#: thermal parameter of the idle ancilla carried by the unentangled probes;
#: slightly above vacuum so every grid output is strictly mixed and the
#: logarithmic derivatives stay finite without any regularisation
ANCILLA_NU = 1.15


def _coherent_with_ancilla(phi_star: float) -> GaussianState:
    """Coherent signal mode (mean photon ``phi_star``) with a warm ancilla."""
    mean = np.zeros(4)
    mean[0] = np.sqrt(2.0 * phi_star)
    cov = 0.5 * np.diag([1.0, 1.0, ANCILLA_NU, ANCILLA_NU])
    return GaussianState(mean, cov)


def regression_grid(
    phi_star: float = 0.1,
) -> list[tuple[str, ChannelPoint, GaussianState]]:
    """The fixed (channel, probe) pairs every oracle check runs over.

    Four single-mode channel points crossed with three two-mode probes
    (channel mode plus one ancilla), each probe carrying ``phi_star`` mean
    photons on the channel mode.  The channel points span weak to deep
    damping, hot to cold baths, and real, complex, and imaginary anomalous
    correlations; the default energy keeps number-basis tails thin enough
    that the cutoff-20 oracle certifies the defining equation of every
    logarithmic derivative to well below 1e-6 in trace norm.
    """
    channels = [
        ("weak_loss_hot_env", ChannelPoint((ChannelMode(0.2, 1.0),))),
        ("mid_loss_squeezed_env", ChannelPoint((ChannelMode(0.35, 0.8, 0.25 + 0.15j),))),
        ("strong_loss_imag_corr", ChannelPoint((ChannelMode(0.7, 0.5, -0.25j),))),
        ("deep_loss_cold_env", ChannelPoint((ChannelMode(1.0, 0.3, 0.2),))),
    ]
    probes = [
        ("thermal", thermal_state([1.0 + 2.0 * phi_star, ANCILLA_NU])),
        ("coherent", _coherent_with_ancilla(phi_star)),
        ("entangled", two_mode_squeezed(float(np.arcsinh(np.sqrt(phi_star))))),
    ]
    return [
        (f"{channel_name}__{probe_name}", channel, probe)
        for channel_name, channel in channels
        for probe_name, probe in probes
    ]


def oracle_qfi_matrix(
    channel: ChannelPoint,
    probe: GaussianState,
    cutoff: int = 20,
    params: list[ParameterIndex] | None = None,
    method: str = "krylov",
) -> NDArray[np.float64]:
    """Information matrix rebuilt entirely in the truncated number basis.

    The channel output comes from integrating the master equation, the
    parameter derivatives from the exact dissipator formulas, and the SLDs
    from the spectral solve — no ingredient is shared with the engine.
    """
    if params is None:
        params = parameter_list(channel)
    ops = truncated_ops(probe.n_modes, cutoff)
    rho0 = state_to_fock(probe, cutoff)
    rho_out = lindblad_apply(
        rho0,
        ops,
        [m.gamma for m in channel.modes],
        [m.n_th for m in channel.modes],
        [m.m_corr for m in channel.modes],
        method=method,
    )
    slds = []
    for param in params:
        mode = channel.modes[param.mode]
        drho = dissipator_derivative(
            rho_out, ops, param.mode, param.kind, mode.gamma, mode.n_th, mode.m_corr
        )
        slds.append(sld_fock(rho_out, drho))
    return qfi_fock(rho_out, slds)


def run_oracle_checks(
    cutoff: int = 20, phi_star: float = 0.1, rtol: float = GRID_RTOL
) -> list[CheckResult]:
    """Engine-versus-oracle comparison over the whole regression grid.

    Deterministic (the grid is fixed and nothing draws randomness), so two
    runs always agree check by check.  Oracle-side failures such as a cutoff
    too small for the requested probe energy are reported as structured
    ``"error"`` results rather than raised.
    """
    results = []
    for name, channel, probe in regression_grid(phi_star):
        try:
            engine = qfi(channel, probe, pure_policy="regularize").matrix
            oracle = oracle_qfi_matrix(channel, probe, cutoff=cutoff)
            residual = float(
                np.linalg.norm(engine - oracle) / max(np.linalg.norm(oracle), 1e-300)
            )
            status = "pass" if residual <= rtol else "fail"
            results.append(CheckResult(name, status, residual, rtol))
        except GchMetricError as err:
            results.append(
                CheckResult(name, "error", None, rtol, f"{type(err).__name__}: {err}")
            )
    return results
