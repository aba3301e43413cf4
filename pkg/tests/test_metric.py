"""Tests for the minimum-determinant covering solver and sampling loop."""

from __future__ import annotations

import numpy as np
import pytest
import scipy.optimize

from gchmetric.channel import ChannelMode, ChannelPoint
from gchmetric.errors import DimensionMismatch, NonSymmetric
from gchmetric.metric import (
    ConstraintSet,
    MetricResult,
    TraceEntry,
    containment_check,
    default_regularization,
    min_det_upper_bound,
    sample_and_solve,
)
from gchmetric.qfi import qfi
from gchmetric.sampler import probe_for_counter


def grid_min_det_2x2(mats, passes=6, points=51):
    """Coarse-to-fine brute force over symmetric 2x2 covers of ``mats``.

    Each pass recenters the search box on the best feasible point found so
    far, so later passes refine the global incumbent rather than the latest
    grid winner.
    """
    top = max(float(np.linalg.eigvalsh(m)[-1]) for m in mats)
    lo = np.array([0.0, -1.5 * top, 0.0])
    hi = np.array([3.0 * top, 1.5 * top, 3.0 * top])
    best, best_det = None, np.inf
    for _ in range(passes):
        axes = [np.linspace(lo[i], hi[i], points) for i in range(3)]
        aa, bb, cc = np.meshgrid(*axes, indexing="ij")
        feasible = np.ones(aa.shape, dtype=bool)
        for m in mats:
            da, db, dc = aa - m[0, 0], bb - m[0, 1], cc - m[1, 1]
            feasible &= (da >= 0) & (dc >= 0) & (da * dc - db**2 >= 0)
        det = np.where(feasible, aa * cc - bb**2, np.inf)
        idx = np.unravel_index(int(np.argmin(det)), det.shape)
        if det[idx] < best_det:
            best, best_det = np.array([aa[idx], bb[idx], cc[idx]]), float(det[idx])
        span = (hi - lo) / (points - 1)
        lo, hi = best - 3.0 * span, best + 3.0 * span
    return best_det


def slsqp_min_det(mats, seed=0, starts=6):
    """Multi-start nonlinear-programming oracle for d x d covers.

    Works on eigenvalue-normalized matrices with a guarded log-det objective
    (the raw determinant is a cubic and sends the SQP subproblems off to
    infinity); every returned candidate is projected back into the feasible
    cone before its determinant counts, so the result is a true upper bound.
    """
    d = mats[0].shape[0]
    scale = max(float(np.linalg.eigvalsh(m)[-1]) for m in mats)
    normed = [m / scale for m in mats]
    iu = np.triu_indices(d)

    def unpack(x):
        j = np.zeros((d, d))
        j[iu] = x
        return j + np.triu(j, 1).T

    def objective(x):
        sign, logdet = np.linalg.slogdet(unpack(x))
        return logdet if sign > 0 else 1e3

    cons = [
        {"type": "ineq", "fun": (lambda x, m=m: np.linalg.eigvalsh(unpack(x) - m)[0])}
        for m in normed
    ]
    rng = np.random.default_rng(seed)
    best = np.inf
    for s in range(starts):
        x0 = ((1.1 + 0.5 * s / starts) * np.eye(d) + np.diag(rng.uniform(0, 0.3, size=d)))[iu]
        out = scipy.optimize.minimize(
            objective,
            x0,
            method="SLSQP",
            constraints=cons,
            options={"maxiter": 600, "ftol": 1e-14},
        )
        cand = unpack(out.x)
        viol = max(0.0, -min(np.linalg.eigvalsh(cand - m)[0] for m in normed))
        if viol < 1e-6:
            cand = cand + (viol + 1e-14) * np.eye(d)
            best = min(best, float(np.linalg.det(cand)))
    return best * scale**d


def random_psd_set(rng, d, count, scale_spread=0.5):
    mats = []
    for _ in range(count):
        g = rng.normal(size=(d, d))
        mats.append(g @ g.T * 10.0 ** rng.uniform(-scale_spread, scale_spread))
    return tuple(mats)


def test_constraint_set_validation():
    with pytest.raises(DimensionMismatch):
        ConstraintSet(())
    with pytest.raises(DimensionMismatch):
        ConstraintSet((np.eye(2), np.eye(3)))
    with pytest.raises(NonSymmetric):
        ConstraintSet((np.array([[1.0, 0.5], [0.0, 1.0]]),))
    with pytest.raises(DimensionMismatch):
        ConstraintSet((np.diag([1.0, -0.5]),))


def test_single_constraint_is_tight():
    j = np.array([[2.0, 0.3], [0.3, 1.0]])
    res = min_det_upper_bound(ConstraintSet((j,)))
    assert np.allclose(res.metric, j + res.regularization * np.eye(2), atol=1e-15)
    assert res.kkt_residual == 0.0


def test_dominated_constraint_is_inactive():
    big, small = np.diag([5.0, 3.0]), np.diag([2.0, 1.0])
    res = min_det_upper_bound(ConstraintSet((big, small)))
    assert np.abs(res.metric - big).max() < 1e-6


def test_frozen_crossed_pair_against_grid_oracle():
    """{diag(4,1), diag(1,4)} has the closed cover diag(4,4), det 16."""
    mats = (np.diag([4.0, 1.0]), np.diag([1.0, 4.0]))
    res = min_det_upper_bound(ConstraintSet(mats))
    assert np.abs(res.metric - np.diag([4.0, 4.0])).max() < 1e-5
    assert res.det_value == pytest.approx(16.0, rel=1e-6)
    oracle = min(grid_min_det_2x2(mats), slsqp_min_det(mats))
    assert res.det_value == pytest.approx(oracle, rel=1e-3)
    assert res.kkt_residual <= 1e-7


def test_random_2x2_sets_match_grid_oracle():
    rng = np.random.default_rng(7)
    for _ in range(6):
        mats = random_psd_set(rng, 2, int(rng.integers(2, 6)))
        res = min_det_upper_bound(ConstraintSet(mats))
        oracle = min(grid_min_det_2x2(mats), slsqp_min_det(mats))
        assert res.det_value == pytest.approx(oracle, rel=1e-3)
        norm = float(np.linalg.norm(res.metric))
        assert all(containment_check(res, m) <= 1e-8 * norm for m in mats)


def test_random_3x3_sets_match_slsqp_oracle():
    rng = np.random.default_rng(11)
    for _ in range(4):
        mats = random_psd_set(rng, 3, int(rng.integers(2, 6)))
        res = min_det_upper_bound(ConstraintSet(mats))
        oracle = slsqp_min_det(mats)
        assert res.det_value == pytest.approx(oracle, rel=1e-3)
        norm = float(np.linalg.norm(res.metric))
        assert all(containment_check(res, m) <= 1e-8 * norm for m in mats)


def test_order_invariance():
    rng = np.random.default_rng(13)
    mats = random_psd_set(rng, 3, 6)
    res = min_det_upper_bound(ConstraintSet(mats))
    shuffled = tuple(mats[i] for i in rng.permutation(len(mats)))
    res_shuffled = min_det_upper_bound(ConstraintSet(shuffled))
    assert np.abs(res.metric - res_shuffled.metric).max() <= 1e-7 * np.abs(res.metric).max()


def test_solver_congruence_covariance():
    """Default-path congruence on strictly positive-definite constraint sets.

    The Tikhonov shift eps*1 does not transform congruently, so the identity
    holds through the default entry point only when eps is negligible against
    the smallest constraint eigenvalue; strictly PD sets are that regime.
    """
    rng = np.random.default_rng(17)
    for _ in range(3):
        mats = tuple(m + 0.6 * np.trace(m) / 3 * np.eye(3) for m in random_psd_set(rng, 3, 4))
        res = min_det_upper_bound(ConstraintSet(mats))
        delta = rng.normal(size=(3, 3)) + 0.8 * np.eye(3)
        pushed = tuple(delta.T @ m @ delta for m in mats)
        res_pushed = min_det_upper_bound(ConstraintSet(pushed))
        expected = delta.T @ res.metric @ delta
        assert np.abs(res_pushed.metric - expected).max() <= 1e-6 * np.abs(expected).max()


def test_solver_congruence_exact_with_matched_shift():
    """Pushing the already-shifted constraints makes the identity exact.

    This isolates the solver: with the regularization applied congruently the
    only residual left is centering error, orders below the shift effect.
    """
    rng = np.random.default_rng(19)
    mats = random_psd_set(rng, 3, 4)
    res = min_det_upper_bound(ConstraintSet(mats))
    eps = res.regularization
    delta = rng.normal(size=(3, 3)) + 0.8 * np.eye(3)
    pushed = tuple(delta.T @ (m + eps * np.eye(3)) @ delta for m in mats)
    res_pushed = min_det_upper_bound(ConstraintSet(pushed), regularization=1e-300)
    expected = delta.T @ res.metric @ delta
    assert np.abs(res_pushed.metric - expected).max() <= 1e-9 * np.abs(expected).max()


def test_containment_check_signs_and_errors():
    metric = np.diag([2.0, 2.0])
    assert containment_check(metric, metric) == pytest.approx(0.0, abs=1e-14)
    assert containment_check(metric, 0.5 * metric) < 0.0
    with pytest.raises(DimensionMismatch):
        containment_check(metric, np.eye(3))


def test_default_regularization_scales_with_trace():
    assert default_regularization([np.eye(2)]) == pytest.approx(1e-8 * 3.0)
    assert default_regularization([np.eye(2), 100 * np.eye(2)]) == pytest.approx(1e-8 * 201.0)


def test_metric_result_rejects_decreasing_trace():
    entries = (
        TraceEntry(0, 1, 2.0, -1e-9),
        TraceEntry(1, 2, 1.9, -1e-9),
    )
    with pytest.raises(Exception):
        MetricResult(
            metric=np.eye(2),
            det_value=1.0,
            regularization=1e-8,
            kkt_residual=0.0,
            trace=entries,
        )


@pytest.fixture(scope="module")
def lossy_channel():
    return ChannelPoint((ChannelMode(gamma=0.1, n_th=1.0),))


def test_sample_and_solve_single_sample_equals_qfi(lossy_channel):
    res = sample_and_solve(lossy_channel, phi_star=0.2, rounds=1, batch=1, seed=5)
    _, probe = probe_for_counter(5, 0, 1, 0.2)
    j = qfi(lossy_channel, probe, pure_policy="regularize")
    assert np.allclose(res.metric, j.matrix + res.regularization * np.eye(4), atol=1e-12)
    assert res.labels == j.labels


def test_sample_and_solve_trace_and_determinism(lossy_channel):
    kwargs = dict(phi_star=0.2, rounds=4, batch=5, seed=21)
    res = sample_and_solve(lossy_channel, **kwargs)
    again = sample_and_solve(lossy_channel, **kwargs)
    assert np.array_equal(res.metric, again.metric)
    assert res.trace == again.trace
    dets = [e.det_value for e in res.trace]
    assert all(b >= a * (1 - 1e-6) for a, b in zip(dets, dets[1:]))
    assert all(e.max_violation <= 1e-8 * np.linalg.norm(res.metric) for e in res.trace)
    counts = [e.sample_count for e in res.trace]
    assert counts == [5 * (r + 1) for r in range(len(res.trace))]


def test_sample_and_solve_parallel_batches_match_serial(lossy_channel):
    kwargs = dict(phi_star=0.2, rounds=3, batch=4, seed=33)
    serial = sample_and_solve(lossy_channel, **kwargs, threads=1)
    parallel = sample_and_solve(lossy_channel, **kwargs, threads=3)
    assert np.array_equal(serial.metric, parallel.metric)
    assert serial.trace == parallel.trace


class _DictStore:
    def __init__(self):
        self.records = {}
        self.putcalls = 0

    def get(self, counter):
        rec = self.records.get(counter)
        return None if rec is None else (rec[1], rec[2])

    def put(self, counter, split, status, matrix):
        self.putcalls += 1
        self.records[counter] = (split, status, matrix)


def test_sample_and_solve_resumes_from_store(lossy_channel):
    kwargs = dict(phi_star=0.2, rounds=3, batch=3, seed=8)
    store = _DictStore()
    first = sample_and_solve(lossy_channel, **kwargs, store=store)
    puts_after_first = store.putcalls
    resumed = sample_and_solve(lossy_channel, **kwargs, store=store)
    assert store.putcalls == puts_after_first  # nothing recomputed
    assert np.array_equal(first.metric, resumed.metric)
    assert first.trace == resumed.trace


def test_sample_and_solve_skips_failed_records(lossy_channel):
    store = _DictStore()
    # pre-mark the second sample as failed; the loop must skip it but keep
    # counting it in the trace
    store.records[1] = (None, 1, np.zeros((4, 4)))
    res = sample_and_solve(lossy_channel, phi_star=0.2, rounds=1, batch=3, seed=8, store=store)
    assert res.trace[0].sample_count == 2
    assert res.trace[0].n_failed == 1


def test_sample_and_solve_stagnates(lossy_channel):
    res = sample_and_solve(lossy_channel, phi_star=0.2, rounds=40, batch=10, seed=42)
    assert res.stop_reason == "stagnated"
    assert len(res.trace) < 40
