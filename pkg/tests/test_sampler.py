"""Tests for budget-exact probe sampling."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gchmetric.errors import InvalidSplit
from gchmetric.gaussian import (
    mean_photon,
    symplectic_form,
    symplectic_spectrum,
)
from gchmetric.sampler import (
    N_CORNER_SAMPLES,
    ResourceSplit,
    probe_for_counter,
    random_passive,
    resource_parameters,
    sample_probe,
    split_for_counter,
)


def test_split_validation():
    with pytest.raises(InvalidSplit):
        ResourceSplit((0.5, 0.6, 0.2), (0.0,), (0.0,))  # does not sum to 1
    with pytest.raises(InvalidSplit):
        ResourceSplit((-0.1, 0.6, 0.5), (0.0,), (0.0,))
    with pytest.raises(InvalidSplit):
        ResourceSplit((0.2, 0.3, 0.5), (0.0, 0.0), (0.0,))  # phase length mismatch


def test_corner_counters_use_pure_resources():
    corners = [split_for_counter(5, c, 1).weights for c in range(N_CORNER_SAMPLES)]
    assert corners == [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)]


def test_probe_is_deterministic_per_counter():
    a_split, a_probe = probe_for_counter(seed=11, counter=7, n_modes=2, phi_star=0.4)
    b_split, b_probe = probe_for_counter(seed=11, counter=7, n_modes=2, phi_star=0.4)
    assert a_split == b_split
    assert np.array_equal(a_probe.cov, b_probe.cov)
    assert np.array_equal(a_probe.mean, b_probe.mean)
    c_split, c_probe = probe_for_counter(seed=12, counter=7, n_modes=2, phi_star=0.4)
    assert not np.array_equal(a_probe.cov, c_probe.cov)


def test_split_for_counter_matches_probe_split():
    for counter in (0, 4, 9):
        assert split_for_counter(9, counter, 2) == probe_for_counter(9, counter, 2, 0.1)[0]


@settings(max_examples=40, deadline=None)
@given(
    counter=st.integers(min_value=0, max_value=200),
    n_modes=st.integers(min_value=1, max_value=3),
    phi=st.floats(min_value=1e-4, max_value=3.0),
    seed=st.integers(min_value=0, max_value=2**31 - 1),
)
def test_budget_is_saturated_exactly(counter, n_modes, phi, seed):
    _, probe = probe_for_counter(seed, counter, n_modes, phi)
    photons = mean_photon(probe, list(range(n_modes)))
    assert photons == pytest.approx(phi, abs=1e-9 * max(1.0, phi))
    assert probe.n_modes == 2 * n_modes


def test_probes_are_pure():
    for counter in range(5):
        _, probe = probe_for_counter(3, counter, 2, 0.5)
        assert np.max(np.abs(symplectic_spectrum(probe.cov) - 1.0)) < 1e-8


def test_zero_budget_gives_vacuum():
    split = ResourceSplit((0.3, 0.3, 0.4), (0.1,), (0.2,))
    probe = sample_probe(0.0, split, np.random.default_rng(0))
    assert np.allclose(probe.mean, 0.0)
    # passives still act, but on vacuum they do nothing
    assert np.allclose(probe.cov, 0.5 * np.eye(4))


def test_resource_parameters_closed_forms():
    phases = ((0.0,), (0.0,))
    r_sms, r_tms, alpha = resource_parameters(ResourceSplit((1, 0, 0), *phases), 0.2)
    assert np.sinh(r_sms) ** 2 == pytest.approx(0.2, abs=1e-14)
    assert r_tms == 0.0 and alpha == 0.0
    _, r_tms, _ = resource_parameters(ResourceSplit((0, 1, 0), *phases), 0.2)
    assert np.sinh(r_tms) ** 2 == pytest.approx(0.2, abs=1e-14)
    *_, alpha = resource_parameters(ResourceSplit((0, 0, 1), *phases), 0.2)
    assert alpha**2 == pytest.approx(0.2, abs=1e-14)
    with pytest.raises(InvalidSplit):
        resource_parameters(ResourceSplit((0, 0, 1), *phases), -0.5)


def test_equal_split_spends_equal_thirds():
    """Each resource contributes a third of the budget, per round-trip photon count."""
    split = ResourceSplit((1 / 3, 1 / 3, 1 / 3), (0.4,), (1.1,))
    r_sms, r_tms, alpha = resource_parameters(split, 0.3)
    assert np.sinh(r_tms) ** 2 == pytest.approx(0.1, abs=1e-14)
    assert alpha**2 == pytest.approx(0.1, abs=1e-14)
    probe = sample_probe(0.3, split, np.random.default_rng(2))
    assert mean_photon(probe, [0]) == pytest.approx(0.3, abs=1e-12)


def test_random_passive_is_orthogonal_symplectic():
    rng = np.random.default_rng(0)
    for n in (1, 2, 3):
        k = random_passive(n, rng)
        omega = symplectic_form(n)
        assert np.allclose(k @ k.T, np.eye(2 * n), atol=1e-12)
        assert np.allclose(k @ omega @ k.T, omega, atol=1e-12)


def test_displacement_corner_is_coherent():
    """Counter 2 spends everything on displacement: covariance stays vacuum."""
    _, probe = probe_for_counter(seed=1, counter=2, n_modes=1, phi_star=0.6)
    assert np.allclose(probe.cov, 0.5 * np.eye(4), atol=1e-12)
    assert mean_photon(probe, [0]) == pytest.approx(0.6, abs=1e-12)
