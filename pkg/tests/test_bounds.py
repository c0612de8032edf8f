"""Bound envelopes per family: hand oracles, cross-family identities, cutoff grids."""

import numpy as np
import pytest

from panelbounds.bounds import (
    CutoffGrid,
    binary_bounds,
    censored_bounds,
    check_inequalities,
    critical_cutoffs,
    default_tolerance,
    general_bounds,
    multinomial_bounds,
    ordered_bounds,
    ordered_bounds_naive,
)
from panelbounds.core import (
    ConditioningCell,
    ModelSpec,
    MultinomialPanel,
    PanelDataset,
    ParamPoint,
    build_cells,
)
from panelbounds.dgp import DgpConfig, simulate

from conftest import exact_logit_panel, hand_panel

BETA1 = ParamPoint(beta=(1.0,), pinned=0)


def _unit_cell(n, periods=(0, 1)):
    return ConditioningCell(z_value=np.zeros((len(periods), 1)), periods=periods,
                            weights=np.ones(n))


class TestBinaryBounds:
    """Hand-computed envelopes on the six-unit panel's first covariate cell."""

    def setup_method(self):
        self.data, self.spec = hand_panel()
        cells = build_cells(self.data, scheme="all-period", match="exact")
        self.cell = next(c for c in cells if c.weights[0] == 1.0)  # units 0-2

    def test_lower_envelope_hand_values(self):
        # within the cell: idx_0 = 1, idx_1 = 0; y_0 = (1,1,0), y_1 = (0,1,0)
        c = np.array([-0.5, 0.0, 0.5, 1.0, 1.5])
        L, U = binary_bounds(BETA1, self.spec, self.cell, self.data, c)
        np.testing.assert_allclose(L[0], [0, 0, 0, 2 / 3, 2 / 3])
        np.testing.assert_allclose(L[1], [0, 1 / 3, 1 / 3, 1 / 3, 1 / 3])

    def test_upper_envelope_hand_values(self):
        c = np.array([-0.5, 0.0, 0.5, 1.0, 1.5])
        _, U = binary_bounds(BETA1, self.spec, self.cell, self.data, c)
        np.testing.assert_allclose(U[0], [2 / 3, 2 / 3, 2 / 3, 2 / 3, 1])
        np.testing.assert_allclose(U[1], [1 / 3, 1 / 3, 1, 1, 1])

    def test_envelopes_sandwich_the_choice_probability(self):
        c = np.linspace(-3, 3, 41)
        L, U = binary_bounds(BETA1, self.spec, self.cell, self.data, c)
        for k, t in enumerate(self.cell.periods):
            p = np.mean(self.data.y[:3, t] == 1)
            assert np.all(L[k] <= p + 1e-12) and np.all(U[k] >= p - 1e-12)

    def test_envelopes_are_nondecreasing_in_c(self):
        c = np.linspace(-3, 3, 61)
        L, U = binary_bounds(BETA1, self.spec, self.cell, self.data, c)
        assert np.all(np.diff(L, axis=1) >= -1e-15)
        assert np.all(np.diff(U, axis=1) >= -1e-15)


class TestOrderedBounds:
    """Three-category hand oracle: constant-zero index, thresholds (-1, 1)."""

    def setup_method(self):
        self.spec = ModelSpec(family="ordered", thresholds=(-1.0, 1.0),
                              categories=(1, 2, 3))
        y = np.array([[1, 1], [2, 1], [2, 2], [3, 3]])
        self.data = PanelDataset(y=y, z=np.zeros((4, 2, 1)))
        self.cell = _unit_cell(4)

    def test_hand_values(self):
        c = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
        L, U = ordered_bounds(BETA1, self.spec, self.cell, self.data, c)
        np.testing.assert_allclose(L[0], [0, 1 / 4, 1 / 4, 3 / 4, 3 / 4])
        np.testing.assert_allclose(L[1], [0, 1 / 2, 1 / 2, 3 / 4, 3 / 4])
        np.testing.assert_allclose(U[0], [1 / 4, 1 / 4, 3 / 4, 3 / 4, 1])
        np.testing.assert_allclose(U[1], [1 / 2, 1 / 2, 3 / 4, 3 / 4, 1])

    def test_non_stationary_outcome_shift_is_detected(self):
        # P(Y <= 1) moves from 1/4 to 1/2 while the index stays constant
        res = check_inequalities(BETA1, self.spec, [self.cell], self.data,
                                 grid=np.array([-1.0]), tol=0.0)
        assert not res.passed
        assert res.worst_slack == pytest.approx(-1 / 4)
        assert res.violations[0]["slack"] == pytest.approx(-1 / 4)

    def test_critical_grid_reproduces_the_violation(self):
        res = check_inequalities(BETA1, self.spec, [self.cell], self.data, tol=0.0)
        assert not res.passed
        assert res.worst_slack == pytest.approx(-1 / 4)


class TestNaiveOrderedRelaxation:
    def _random_case(self, seed):
        rng = np.random.default_rng(seed)
        n = 60
        spec = ModelSpec(family="ordered", thresholds=(-0.8, 0.9), categories=(1, 2, 3))
        y = rng.integers(1, 4, size=(n, 2))
        z = rng.normal(size=(n, 2, 1))
        data = PanelDataset(y=y, z=z)
        cell = ConditioningCell(z_value=np.zeros((2, 1)), periods=(0, 1),
                                weights=rng.random(n), kind="kernel")
        return spec, data, cell

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_single_cut_envelopes_are_weakly_looser(self, seed):
        spec, data, cell = self._random_case(seed)
        c = np.linspace(-4, 4, 57)
        L, U = ordered_bounds(BETA1, spec, cell, data, c)
        for j in range(len(spec.categories) - 1):
            Lj, Uj = ordered_bounds_naive(BETA1, spec, cell, data, c, j)
            assert np.all(Lj <= L + 1e-12)
            assert np.all(Uj >= U - 1e-12)

    def test_cut_index_validated(self):
        spec, data, cell = self._random_case(9)
        with pytest.raises(ValueError):
            ordered_bounds_naive(BETA1, spec, cell, data, [0.0], j=2)


class TestCrossFamilyIdentities:
    """The exact algebraic maps between families, asserted to 1e-15."""

    def _binary_case(self, seed):
        rng = np.random.default_rng(seed)
        n = 80
        data = PanelDataset(y=rng.integers(0, 2, size=(n, 2)),
                            z=rng.normal(size=(n, 2, 1)))
        cell = ConditioningCell(z_value=np.zeros((2, 1)), periods=(0, 1),
                                weights=rng.random(n), kind="kernel")
        return data, cell

    @pytest.mark.parametrize("seed", [5, 6, 7])
    def test_two_category_ordered_equals_binary_through_negation(self, seed):
        data, cell = self._binary_case(seed)
        spec_b = ModelSpec(family="binary")
        spec_o = ModelSpec(family="ordered", thresholds=(0.0,), categories=(0, 1))
        c = np.linspace(-3, 3, 41)
        Lb, Ub = binary_bounds(BETA1, spec_b, cell, data, -c)
        Lo, Uo = ordered_bounds(BETA1, spec_o, cell, data, c)
        np.testing.assert_allclose(Lo, 1.0 - Ub, atol=1e-15)
        np.testing.assert_allclose(Uo, 1.0 - Lb, atol=1e-15)

    @pytest.mark.parametrize("seed", [5, 6, 7])
    def test_monotone_family_at_level_zero_complements_binary(self, seed):
        data, cell = self._binary_case(seed)
        spec_b = ModelSpec(family="binary")
        spec_m = ModelSpec(family="monotone", categories=(0, 1))
        c = np.linspace(-3, 3, 41)
        Lb, Ub = binary_bounds(BETA1, spec_b, cell, data, c)
        Lm, Um = general_bounds(BETA1, spec_m, cell, data, c, y=0)
        np.testing.assert_allclose(Lm, 1.0 - Ub, atol=1e-15)
        np.testing.assert_allclose(Um, 1.0 - Lb, atol=1e-15)


class TestCensoredBounds:
    def setup_method(self):
        self.spec = ModelSpec(family="censored")
        y = np.array([[0.0, 0.0], [1.0, 2.0], [2.0, 2.0], [3.0, 4.0]])
        z = np.ones((4, 2, 1))
        self.data = PanelDataset(y=y, z=z)
        self.cell = _unit_cell(4)

    def test_hand_values(self):
        # idx = 1 everywhere; gaps y - idx: t0 (-1, 0, 1, 2), t1 (-1, 1, 1, 3)
        c = np.array([-1.0, 0.0, 1.0])
        L, U = censored_bounds(BETA1, self.spec, self.cell, self.data, c)
        np.testing.assert_allclose(L[0], [3 / 4, 2 / 4, 1 / 4])
        np.testing.assert_allclose(L[1], [3 / 4, 1 / 4, 1 / 4])
        # positive-outcome part plus the point mass at zero (1/4)
        np.testing.assert_allclose(U[0], [2 / 4 + 1 / 4, 1 / 4 + 1 / 4, 0 + 1 / 4])
        np.testing.assert_allclose(U[1], [2 / 4 + 1 / 4, 0 + 1 / 4, 0 + 1 / 4])

    def test_envelopes_nonincreasing_and_aggregation_max_max(self):
        c = np.linspace(-3, 3, 25)
        L, U = censored_bounds(BETA1, self.spec, self.cell, self.data, c)
        assert np.all(np.diff(L, axis=1) <= 1e-15)
        assert np.all(np.diff(U, axis=1) <= 1e-15)
        res = check_inequalities(BETA1, self.spec, [self.cell], self.data,
                                 grid=c, tol=0.0)
        prof = res.profiles[0]
        assert prof.aggregation == "max-max"
        np.testing.assert_allclose(prof.slack, U.max(axis=0) - L.max(axis=0))

    def test_negative_outcomes_rejected(self):
        data = PanelDataset(y=np.array([[-1.0, 0.0]]), z=np.ones((1, 2, 1)))
        with pytest.raises(ValueError):
            censored_bounds(BETA1, self.spec, _unit_cell(1), data, [0.0])

    def test_latent_lag_variant_restricts_to_positive_lags(self):
        y = np.array([[2.0, 1.0], [0.0, 3.0], [1.0, 0.0]])
        z = np.ones((3, 2, 1))
        x = y[:, :1] * 0  # placeholder lag column, filled below
        x = np.stack([np.column_stack([np.array([1.0, 2.0, 1.0]), y[:, 0]])], axis=2)
        data = PanelDataset(y=y, z=z, x=x, lagged_outcome=0)
        c = np.array([0.0])
        theta = ParamPoint(beta=(1.0,), gamma=(0.0,), pinned=0)
        L, U = censored_bounds(theta, self.spec, _unit_cell(3), data, c,
                               latent_lag=True)
        # period 1: lag = y_0 = (2, 0, 1); units with positive lag: 0 and 2
        # gap_1 = y_1 - 1 = (0, 2, -1); lower = P(gap <= 0, lag > 0) = 2/3
        assert L[1, 0] == pytest.approx(2 / 3)
        # upper: P(y>0, lag>0, gap<=0) = 1/3, escape P(y>0, lag=0) = 1/3,
        # point mass P(y=0) = 1/3
        assert U[1, 0] == pytest.approx(1 / 3 + 1 / 3 + 1 / 3)


class TestMultinomialBounds:
    def setup_method(self):
        # three alternatives, utilities equal to the single covariate coordinate
        w = np.zeros((4, 1, 3, 1))
        w[:, 0, :, 0] = np.array([
            [2.0, 1.0, 0.0],
            [0.0, 1.0, 2.0],
            [1.0, 1.0, 1.0],
            [3.0, 0.0, 0.0],
        ])
        y = np.array([[0], [2], [1], [0]])
        self.data = MultinomialPanel(y=y, w=w)
        self.theta = ParamPoint(beta=(1.0,), pinned=0)
        self.cell = ConditioningCell(z_value=np.zeros((1, 1)), periods=(0,),
                                     weights=np.ones(4))

    def test_hand_values_for_a_singleton_subset(self):
        # K = {0}: diffs W0-W1, W0-W2 per unit: (1,2), (-1,-2), (0,0), (3,3)
        L, U = multinomial_bounds(self.theta, self.cell, self.data, [0],
                                  np.array([[1.0, 2.0]]))
        # lower: Y=0 and diffs <= (1,2): unit 0 qualifies, unit 3 fails -> 1/4
        assert L[0] == pytest.approx(1 / 4)
        # upper: 1 - P(Y!=0, diffs >= (1,2)): none of units 1,2 qualify -> 1
        assert U[0] == pytest.approx(1.0)

    def test_infinite_cutoffs_make_the_lower_event_unconditional(self):
        L, _ = multinomial_bounds(self.theta, self.cell, self.data, [0],
                                  np.array([[np.inf, np.inf]]))
        assert L[0] == pytest.approx(1 / 2)  # P(Y = 0)

    def test_subset_validation(self):
        with pytest.raises(ValueError):
            multinomial_bounds(self.theta, self.cell, self.data, [], 0.0)
        with pytest.raises(ValueError):
            multinomial_bounds(self.theta, self.cell, self.data, [0, 1, 2], 0.0)


class TestCriticalCutoffs:
    def test_discrete_binary_grid_is_the_realized_index_set(self):
        rng = np.random.default_rng(2)
        z = rng.choice([-1.0, 0.0, 1.0], size=(40, 2, 1))
        data = PanelDataset(y=rng.integers(0, 2, size=(40, 2)), z=z)
        cell = _unit_cell(40)
        grid = critical_cutoffs(BETA1, ModelSpec(family="binary"), cell, data)
        assert grid.provenance == "critical-discrete"
        np.testing.assert_array_equal(grid.values, np.unique(z))

    def test_ordered_grid_offsets_by_thresholds(self):
        z = np.zeros((10, 2, 1))
        z[:5] = 1.0
        data = PanelDataset(y=np.ones((10, 2), dtype=int), z=z)
        spec = ModelSpec(family="ordered", thresholds=(-1.0, 1.0), categories=(0, 1, 2))
        # thresholds minus realized indices: {-1, 1} - {0, 1}
        grid = critical_cutoffs(BETA1, spec, _unit_cell(10), data)
        np.testing.assert_array_equal(grid.values, [-2.0, -1.0, 0.0, 1.0])

    def test_rich_support_falls_back_to_quantiles(self):
        rng = np.random.default_rng(3)
        data = PanelDataset(y=rng.integers(0, 2, size=(200, 2)),
                            z=rng.normal(size=(200, 2, 1)))
        grid = critical_cutoffs(BETA1, ModelSpec(family="binary"),
                                _unit_cell(200), data, max_discrete=64)
        assert grid.provenance == "quantile-grid"
        assert grid.values.min() == pytest.approx(data.z.min())
        assert grid.values.max() == pytest.approx(data.z.max())

    def test_verdicts_match_a_much_finer_mesh(self):
        """On discrete data the finite critical grid loses nothing."""
        data = exact_logit_panel((1.0,), z_support=(-1.0, 0.0, 1.0),
                                 n_per_cell=2000, T=2)
        spec = ModelSpec(family="binary")
        cells = build_cells(data, scheme="all-period", match="exact")
        rng = np.random.default_rng(17)
        for theta in (ParamPoint(beta=(1.0,), pinned=0),
                      ParamPoint(beta=(-1.0,), pinned=0),
                      ParamPoint(beta=(0.4,), pinned=None)):
            coarse = check_inequalities(theta, spec, cells, data, tol=1e-3)
            lo = min(float(np.min(p.labels)) for p in coarse.profiles) - 0.5
            hi = max(float(np.max(p.labels)) for p in coarse.profiles) + 0.5
            n_fine = 10 * max(len(p.labels) for p in coarse.profiles)
            mesh = np.linspace(lo, hi, n_fine) + rng.uniform(-1e-4, 1e-4, n_fine)
            fine = check_inequalities(theta, spec, cells, data,
                                      grid=np.sort(mesh), tol=1e-3)
            assert coarse.passed == fine.passed
            assert coarse.worst_slack <= fine.worst_slack + 1e-12


class TestCheckInequalities:
    def test_truth_is_contained_in_an_exact_population(self, logit_population):
        data, spec, theta = logit_population
        cells = build_cells(data, scheme="all-period", match="exact")
        res = check_inequalities(theta, spec, cells, data, tol=1e-3)
        assert res.passed
        assert res.worst_slack >= -1e-3

    def test_flipped_coefficient_is_rejected(self, logit_population):
        data, spec, _ = logit_population
        cells = build_cells(data, scheme="all-period", match="exact")
        bad = ParamPoint(beta=(-1.0, -0.7), pinned=0)
        res = check_inequalities(bad, spec, cells, data, tol=1e-3)
        assert not res.passed
        assert res.worst_slack < -0.05
        assert res.violations and all(v["slack"] < 0 for v in res.violations)

    def test_default_tolerance_shrinks_with_cell_size(self):
        big = ConditioningCell(z_value=np.zeros((1, 1)), periods=(0,),
                               weights=np.ones(10_000))
        small = ConditioningCell(z_value=np.zeros((1, 1)), periods=(0,),
                                 weights=np.ones(25))
        assert default_tolerance(10_000, big) < default_tolerance(10_000, small)

    def test_user_grid_and_cutoff_grid_objects_agree(self):
        data, spec = hand_panel()
        cells = build_cells(data, scheme="all-period", match="exact")
        vals = np.array([-1.0, 0.0, 1.0])
        a = check_inequalities(BETA1, spec, cells, data, grid=vals, tol=0.0)
        b = check_inequalities(BETA1, spec, cells, data,
                               grid=CutoffGrid(vals, "user-grid"), tol=0.0)
        assert a.passed == b.passed
        assert a.worst_slack == pytest.approx(b.worst_slack)


class TestDynamicContainment:
    def test_truth_passes_with_lagged_outcomes_in_the_index(self):
        """Simulated dynamic binary panel: truth passes on covariate cells."""
        sim = simulate(DgpConfig(
            design="custom-binary-ARp", n=30_000, seed=12,
            theta_true=ParamPoint(beta=(1.0,), gamma=(0.8,), pinned=0),
            z_support=(-1.0, 1.0), n_periods=3))
        cells = build_cells(sim.data, scheme="pairwise", match="exact")
        res = check_inequalities(sim.config.theta_true, sim.spec, cells, sim.data,
                                 tol=None)  # size-adaptive allowance
        assert res.passed
        assert res.worst_slack >= -0.05
