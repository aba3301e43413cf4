"""Multi-mode dissipative Gaussian channels at the covariance-matrix level.

Each channel mode relaxes independently with rate ``gamma`` towards a Gaussian
environment described by a thermal occupation ``N`` and an anomalous
correlation ``M`` (``|M|^2 <= N(N+1)``).  Acting for unit time on a probe
state, first moments damp by ``exp(-gamma/2)`` per mode and the covariance
matrix interpolates exactly between the probe and the environment fixed
point; ancilla modes beyond the channel register idle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np
from numpy.typing import NDArray

from .errors import InvalidChannel, ModeMismatch
from .gaussian import GaussianState

__all__ = [
    "ChannelMode",
    "ChannelPoint",
    "ParameterIndex",
    "PARAMETER_KINDS",
    "parameter_list",
    "parameter_values",
    "channel_from_values",
    "asymptotic_cm",
    "damping_matrix",
    "environment_cm",
    "apply_channel",
]

#: parameter kinds per channel mode, in canonical order
PARAMETER_KINDS = ("gamma", "N", "ReM", "ImM")

#: slack on the environment physicality bound |M|^2 <= N(N+1)
ENVIRONMENT_TOL = 1e-12


@dataclass(frozen=True)
class ChannelMode:
    """Environment parameters seen by one channel mode."""

    gamma: float
    n_th: float
    m_corr: complex = 0.0

    def __post_init__(self) -> None:
        if self.gamma < 0.0 or not np.isfinite(self.gamma):
            raise InvalidChannel(f"relaxation rate must be >= 0, got {self.gamma}")
        if self.n_th < 0.0 or not np.isfinite(self.n_th):
            raise InvalidChannel(f"thermal occupation must be >= 0, got {self.n_th}")
        bound = self.n_th * (self.n_th + 1.0)
        if abs(self.m_corr) ** 2 > bound + ENVIRONMENT_TOL:
            raise InvalidChannel(
                f"|M|^2 = {abs(self.m_corr) ** 2:.6g} exceeds N(N+1) = {bound:.6g}"
            )


@dataclass(frozen=True)
class ChannelPoint:
    """A point in channel-parameter space: one :class:`ChannelMode` per mode."""

    modes: tuple[ChannelMode, ...]

    def __post_init__(self) -> None:
        if not self.modes:
            raise InvalidChannel("channel needs at least one mode")
        object.__setattr__(self, "modes", tuple(self.modes))

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def n_parameters(self) -> int:
        return 4 * len(self.modes)


@dataclass(frozen=True)
class ParameterIndex:
    """One coordinate of channel-parameter space.

    ``kind`` is one of ``gamma | N | ReM | ImM`` and ``mode`` the channel mode
    it belongs to; ``label`` reads e.g. ``"ReM[1]"``.
    """

    kind: str
    mode: int

    def __post_init__(self) -> None:
        if self.kind not in PARAMETER_KINDS:
            raise InvalidChannel(f"unknown parameter kind {self.kind!r}")
        if self.mode < 0:
            raise InvalidChannel(f"mode index must be >= 0, got {self.mode}")

    @property
    def label(self) -> str:
        return f"{self.kind}[{self.mode}]"


def parameter_list(channel: ChannelPoint) -> list[ParameterIndex]:
    """Canonical parameter ordering: all four kinds of mode 0, then mode 1, ..."""
    return [
        ParameterIndex(kind, k)
        for k in range(channel.n_modes)
        for kind in PARAMETER_KINDS
    ]


def _iter_values(channel: ChannelPoint) -> Iterator[float]:
    for mode in channel.modes:
        yield mode.gamma
        yield mode.n_th
        yield mode.m_corr.real
        yield mode.m_corr.imag


def parameter_values(channel: ChannelPoint) -> NDArray[np.float64]:
    """Channel coordinates in the order of :func:`parameter_list`."""
    return np.fromiter(_iter_values(channel), dtype=float, count=channel.n_parameters)


def channel_from_values(values: NDArray) -> ChannelPoint:
    """Inverse of :func:`parameter_values`."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size % 4:
        raise InvalidChannel(f"expected 4 values per mode, got shape {values.shape}")
    modes = [
        ChannelMode(gamma=v[0], n_th=v[1], m_corr=complex(v[2], v[3]))
        for v in values.reshape(-1, 4)
    ]
    return ChannelPoint(tuple(modes))


def asymptotic_cm(mode: ChannelMode) -> NDArray[np.float64]:
    """Fixed-point covariance block of one channel mode.

    The environment drives ``<n> -> N`` and ``<a^2> -> -M``, which in
    quadratures reads ``qq = 1/2 + N - Re M``, ``pp = 1/2 + N + Re M`` and
    ``qp = -Im M``.
    """
    n, m = mode.n_th, mode.m_corr
    return np.array(
        [[0.5 + n - m.real, -m.imag], [-m.imag, 0.5 + n + m.real]]
    )


def environment_cm(channel: ChannelPoint, n_total: int) -> NDArray[np.float64]:
    """Fixed-point covariance on ``n_total`` modes (vacuum on ancillas)."""
    if n_total < channel.n_modes:
        raise ModeMismatch(
            f"state has {n_total} modes but the channel acts on {channel.n_modes}"
        )
    out = 0.5 * np.eye(2 * n_total)
    for k, mode in enumerate(channel.modes):
        out[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] = asymptotic_cm(mode)
    return out


def damping_matrix(channel: ChannelPoint, n_total: int) -> NDArray[np.float64]:
    """Diagonal amplitude-damping factors ``exp(-gamma_k/2)`` (1 on ancillas)."""
    if n_total < channel.n_modes:
        raise ModeMismatch(
            f"state has {n_total} modes but the channel acts on {channel.n_modes}"
        )
    factors = np.ones(2 * n_total)
    for k, mode in enumerate(channel.modes):
        factors[2 * k : 2 * k + 2] = np.exp(-0.5 * mode.gamma)
    return np.diag(factors)


def apply_channel(channel: ChannelPoint, state: GaussianState) -> GaussianState:
    """Unit-time action of the channel on the first ``channel.n_modes`` modes.

    Exact for Gaussian inputs: ``cov -> G (cov - cov_env) G + cov_env`` and
    ``mean -> G mean`` with ``G`` the per-mode damping and ``cov_env`` the
    fixed point; cross moments with ancillas pick up one damping factor.
    """
    damp = damping_matrix(channel, state.n_modes)
    env = environment_cm(channel, state.n_modes)
    cov = damp @ (state.cov - env) @ damp + env
    return GaussianState(damp @ state.mean, cov)
