"""Criterion values, annealing search, and membership mapping."""

import numpy as np
import pytest

from panelbounds.core import ParamPoint
from panelbounds.dgp import B6Draws, DgpConfig, b6_primitives, simulate_b6_binary
from panelbounds.idset import (
    AnnealConfig,
    anneal_maximize,
    map_identified_set,
    membership_interval,
    membership_tolerance,
    q_of,
    q_star,
)

FAST = AnnealConfig(restarts=3, steps=2500, seed=11)


def _cfg(gamma_true=10.0, b_draws=1500, seed=7, design="dynamic-binary-B6-discrete"):
    return DgpConfig(design=design, n=1, seed=seed, b_draws=b_draws,
                     theta_true=ParamPoint(beta=(), gamma=(float(gamma_true),)))


class TestCriterionValue:
    def test_hand_crafted_draws(self):
        """Four draws, two periods: criterion from explicit index events."""
        draws = B6Draws(
            y=np.array([[1, 0], [1, 1], [0, 0], [0, 1]]),
            x=np.array([[0.0, 1.0], [1.0, 1.0], [0.0, 0.0], [1.0, 0.0]]),
            z=np.array([0.0, 0.0]),
            alpha=np.zeros(4),
        )
        # gamma = 2, c = 1: idx = 2 * x
        # period 0: y=1 & idx<=1 -> draw 0 only (idx 0): 1/4
        #           y=0 & idx>=1 -> draw 3 (idx 2): 1/4
        # period 1: y=1 & idx<=1 -> draw 3 (idx 0): 1/4
        #           y=0 & idx>=1 -> draw 0 (idx 2): 1/4
        # q = max lower + max upper-complement - 1 = 1/4 + 1/4 - 1
        assert q_of(2.0, 1.0, draws.z, draws) == pytest.approx(-0.5)

    def test_violation_detected_when_lower_exceeds_upper(self):
        draws = B6Draws(
            y=np.array([[1, 0], [1, 0], [1, 1], [0, 0]]),
            x=np.array([[0.0, 1.0], [0.0, 1.0], [0.0, 1.0], [0.0, 0.0]]),
            z=np.array([0.0, 0.0]),
            alpha=np.zeros(4),
        )
        # gamma = 5, c = 0: idx period 0 all 0, period 1 = (5, 5, 5, 0)
        # lower period 0: y=1 & idx<=0: 3/4;  upper period 1: y=0 & idx>=0: 3/4
        # q = 3/4 + 3/4 - 1 = 1/2 > 0: the parameter is contradicted
        assert q_of(5.0, 0.0, draws.z, draws) == pytest.approx(0.5)

    def test_bounded_in_minus_one_one(self):
        prim = b6_primitives(_cfg(b_draws=500), n_periods=2)
        draws = simulate_b6_binary(_cfg(b_draws=500), np.array([1.0, -1.0]))
        for gamma in (-5.0, 0.0, 5.0):
            for c in (-3.0, 0.0, 3.0):
                v = q_of(gamma, c, draws.z, draws)
                assert -1.0 <= v <= 1.0


class TestAnnealMaximize:
    def test_finds_a_smooth_global_maximum(self):
        def fn(points):
            return -np.sum((points - np.array([0.7, -0.3])) ** 2, axis=1)

        bounds = np.array([[-2.0, 2.0], [-2.0, 2.0]])
        val, pt, _, evals = anneal_maximize(fn, bounds, AnnealConfig(
            restarts=4, steps=4000, seed=0))
        assert val == pytest.approx(0.0, abs=1e-3)
        np.testing.assert_allclose(pt, [0.7, -0.3], atol=0.05)
        assert evals == 4 + 4 * 4000

    def test_deterministic_under_a_fixed_seed(self):
        def fn(points):
            return np.cos(points[:, 0]) * np.sin(2 * points[:, 1])

        bounds = np.array([[-3.0, 3.0], [-3.0, 3.0]])
        cfg = AnnealConfig(restarts=2, steps=1000, seed=5)
        a = anneal_maximize(fn, bounds, cfg)
        b = anneal_maximize(fn, bounds, cfg)
        assert a[0] == b[0]
        np.testing.assert_array_equal(a[1], b[1])

    def test_probes_set_a_floor_on_the_result(self):
        def fn(points):
            return -np.sum(points**2, axis=1)

        bounds = np.array([[-1.0, 1.0]])
        # one step: the chains have no time to find the optimum themselves
        val, pt, _, _ = anneal_maximize(fn, bounds, AnnealConfig(
            restarts=1, steps=1, seed=3), probes=np.array([[0.0]]))
        assert val == pytest.approx(0.0)
        assert pt[0] == pytest.approx(0.0)

    def test_aux_rides_with_the_best_point(self):
        def fn(points):
            vals = points[:, 0]
            return vals, vals * 10.0

        bounds = np.array([[0.0, 1.0]])
        val, _, aux, _ = anneal_maximize(fn, bounds, AnnealConfig(
            restarts=3, steps=500, seed=1))
        assert aux == pytest.approx(val * 10.0)


class TestQStar:
    def test_truth_accepted_and_sign_flip_rejected(self):
        cfg = _cfg(gamma_true=10.0, b_draws=1500)
        ok = q_star(10.0, cfg, anneal=FAST, n_periods=3)
        bad = q_star(-10.0, cfg, anneal=FAST, n_periods=3)
        assert ok.in_set and ok.q_star <= ok.tolerance
        assert not bad.in_set and bad.q_star > bad.tolerance

    def test_tolerance_formula(self):
        from panelbounds.idset import MEMBERSHIP_TOL_SCALE
        assert membership_tolerance(2000) == pytest.approx(
            MEMBERSHIP_TOL_SCALE * np.sqrt(np.log(2000) / 2000))
        assert membership_tolerance(8000) < membership_tolerance(500)

    def test_deterministic(self):
        cfg = _cfg(b_draws=800)
        a = q_star(5.0, cfg, anneal=FAST, n_periods=2)
        b = q_star(5.0, cfg, anneal=FAST, n_periods=2)
        assert a.q_star == b.q_star
        assert a.argmax_c == b.argmax_c


class TestMapIdentifiedSet:
    def test_membership_and_interval(self):
        cfg = _cfg(gamma_true=10.0, b_draws=1200)
        grid = np.array([-10.0, 0.0, 8.0, 10.0, 12.0])
        res = map_identified_set(grid, cfg, anneal=FAST, n_periods=3)
        assert res.q_values.shape == grid.shape
        assert bool(res.membership[3])       # the truth stays in
        assert not bool(res.membership[0])   # the flipped sign is out
        lo, hi = membership_interval(res)
        assert lo <= 10.0 <= hi
        assert res.metadata["b_draws"] == 1200

    def test_empty_set_reports_nan_interval(self):
        res = map_identified_set(np.array([-20.0]), _cfg(b_draws=1000),
                                 anneal=FAST, n_periods=3)
        if not res.membership.any():
            lo, hi = membership_interval(res)
            assert np.isnan(lo) and np.isnan(hi)
