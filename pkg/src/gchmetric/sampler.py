"""Randomised Gaussian probes that spend an exact photon budget.

A probe for an ``n``-mode channel lives on ``2n`` modes: each channel mode is
paired with one ancilla.  The photon budget ``phi_star`` (total mean photon
number in the channel modes) is split between three resources —
single-mode squeezing, two-mode squeezing with the ancilla, and coherent
displacement — and the construction saturates the budget exactly:

1. two-mode squeezing puts ``E_t`` photons into each channel mode and leaves
   its covariance block isotropic;
2. single-mode squeezing on the isotropic block has a closed-form strength
   that adds exactly ``E_s`` more;
3. random passives mix the channel block and the ancilla block separately,
   which redistributes but never creates photons;
4. displacement adds exactly ``|alpha|^2 = E_d`` on top.

Sampling is keyed by ``(seed, counter)`` so that any sample can be
regenerated in isolation; the first three counters visit the pure-resource
corners of the simplex before the interior is explored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import InvalidSplit
from .gaussian import (
    GaussianState,
    embed_symplectic,
    squeeze_symplectic,
    tms_symplectic,
    unitary_to_passive,
    vacuum_state,
)

__all__ = [
    "ResourceSplit",
    "random_passive",
    "resource_parameters",
    "split_for_counter",
    "sample_probe",
    "probe_from_split",
    "probe_for_counter",
]

#: tolerance on the resource-weight normalisation
WEIGHT_TOL = 1e-9

#: counters below this index sample the pure-resource corner splits
N_CORNER_SAMPLES = 3


@dataclass(frozen=True)
class ResourceSplit:
    """How one probe spends its photon budget.

    ``weights = (squeezing, pair_entanglement, displacement)`` must be
    non-negative and sum to one; the phase arrays orient each channel mode's
    squeezing axis and displacement direction.
    """

    weights: tuple[float, float, float]
    squeeze_phases: tuple[float, ...]
    displacement_phases: tuple[float, ...]

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (3,) or np.any(w < -WEIGHT_TOL):
            raise InvalidSplit(f"need three non-negative weights, got {self.weights}")
        if abs(float(w.sum()) - 1.0) > WEIGHT_TOL:
            raise InvalidSplit(f"weights must sum to 1, got {w.sum()!r}")
        if len(self.squeeze_phases) != len(self.displacement_phases):
            raise InvalidSplit("phase arrays must have one entry per channel mode")
        object.__setattr__(self, "weights", tuple(float(x) for x in np.clip(w, 0.0, None)))
        object.__setattr__(self, "squeeze_phases", tuple(float(x) for x in self.squeeze_phases))
        object.__setattr__(
            self, "displacement_phases", tuple(float(x) for x in self.displacement_phases)
        )

    @property
    def n_modes(self) -> int:
        return len(self.squeeze_phases)


def random_passive(n_modes: int, rng: np.random.Generator) -> NDArray[np.float64]:
    """Haar-random passive (orthogonal symplectic) on ``n_modes`` modes."""
    z = rng.normal(size=(n_modes, n_modes)) + 1j * rng.normal(size=(n_modes, n_modes))
    q, r = np.linalg.qr(z)
    u = q * (np.diagonal(r) / np.abs(np.diagonal(r)))
    return unitary_to_passive(u)


def _rng_for(seed: int, counter: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, counter)))


def _draw_split(rng: np.random.Generator, counter: int, n_modes: int) -> ResourceSplit:
    if counter < N_CORNER_SAMPLES:
        weights = tuple(1.0 if i == counter else 0.0 for i in range(3))
    else:
        weights = tuple(rng.dirichlet(np.ones(3)))
    squeeze_phases = tuple(rng.uniform(0.0, np.pi, size=n_modes))
    displacement_phases = tuple(rng.uniform(0.0, 2.0 * np.pi, size=n_modes))
    return ResourceSplit(weights, squeeze_phases, displacement_phases)


def split_for_counter(seed: int, counter: int, n_modes: int) -> ResourceSplit:
    """Deterministic resource split for a sample counter.

    Counters 0, 1, 2 return the pure squeezing / pair-entanglement /
    displacement corners; later counters draw a flat Dirichlet split.  Phases
    are always drawn from the counter's stream.
    """
    return _draw_split(_rng_for(seed, counter), counter, n_modes)


def resource_parameters(split: ResourceSplit, phi_star: float) -> tuple[float, float, float]:
    """Closed-form resource strengths for one channel--ancilla mode pair.

    Returns ``(r_sms, r_tms, alpha)``: the single-mode squeezing parameter,
    the two-mode squeezing parameter, and the coherent amplitude.  The photon
    budget divides evenly over the mode pairs, and within a pair the three
    contributions add up exactly: ``sinh^2 r_tms`` from pair entanglement,
    the single-mode squeezer's increment on the already-entangled block, and
    ``alpha^2`` from displacement.
    """
    if phi_star < 0.0:
        raise InvalidSplit(f"photon budget must be >= 0, got {phi_star}")
    per_mode = phi_star / split.n_modes
    w_sms, w_tms, w_disp = split.weights
    e_sms, e_tms, e_disp = w_sms * per_mode, w_tms * per_mode, w_disp * per_mode
    r_tms = float(np.arcsinh(np.sqrt(e_tms)))
    # the squeezer acts on an isotropic block already holding e_tms photons
    cosh2r = (1.0 + 2.0 * e_sms + 2.0 * e_tms) / (1.0 + 2.0 * e_tms)
    r_sms = 0.5 * float(np.arccosh(max(cosh2r, 1.0)))
    return r_sms, r_tms, float(np.sqrt(e_disp))


def sample_probe(
    phi_star: float,
    split: ResourceSplit,
    rng: np.random.Generator,
) -> GaussianState:
    """Draw one probe with exactly ``phi_star`` photons in the channel modes.

    The returned state has ``2 n`` modes (channel modes first, one ancilla
    per channel mode); its randomness beyond ``split`` consists of the two
    Haar passives mixing the channel block and the ancilla block.
    """
    r_sms, r_tms, alpha = resource_parameters(split, phi_star)
    n = split.n_modes

    total = np.eye(4 * n)
    if r_tms > 0.0:
        for k in range(n):
            total = embed_symplectic(tms_symplectic(r_tms), [k, n + k], 2 * n) @ total
    if r_sms > 0.0:
        for k in range(n):
            block = squeeze_symplectic(r_sms, split.squeeze_phases[k])
            total = embed_symplectic(block, [k], 2 * n) @ total
    passive_channel = random_passive(n, rng)
    passive_ancilla = random_passive(n, rng)
    total = embed_symplectic(passive_channel, list(range(n)), 2 * n) @ total
    total = embed_symplectic(passive_ancilla, list(range(n, 2 * n)), 2 * n) @ total

    mean = np.zeros(4 * n)
    if alpha > 0.0:
        amp = np.sqrt(2.0) * alpha
        for k in range(n):
            mean[2 * k] = amp * np.cos(split.displacement_phases[k])
            mean[2 * k + 1] = amp * np.sin(split.displacement_phases[k])

    base = vacuum_state(2 * n)
    return GaussianState(mean, total @ base.cov @ total.T)


def probe_from_split(split: ResourceSplit, phi_star: float, seed: int) -> GaussianState:
    """Probe for a pinned resource split.

    Only the two block passives are random, drawn from ``seed``'s stream, so
    a fixed split (say a pure-resource corner) yields a reproducible family
    member rather than a fresh draw of everything.
    """
    return sample_probe(phi_star, split, _rng_for(seed, 0))


def probe_for_counter(
    seed: int, counter: int, n_modes: int, phi_star: float
) -> tuple[ResourceSplit, GaussianState]:
    """Regenerate the probe of one sample counter (split and state).

    The split and the passives are drawn from the same per-counter stream,
    so the result is a pure function of ``(seed, counter, n_modes,
    phi_star)``.
    """
    rng = _rng_for(seed, counter)
    split = _draw_split(rng, counter, n_modes)
    return split, sample_probe(phi_star, split, rng)
