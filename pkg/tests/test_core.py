"""Dataset containers, parameter points, conditioning cells, and panel I/O."""

import numpy as np
import pytest

from panelbounds.core import (
    ConditioningCell,
    ModelSpec,
    PanelDataError,
    PanelDataset,
    ParamPoint,
    build_cells,
    gaussian_weights,
    load_panel,
    quantile_lattice,
    rule_of_thumb_bandwidth,
    save_panel,
)
from panelbounds.dgp import DgpConfig, simulate

from conftest import hand_panel


class TestPanelDataset:
    def test_shapes_and_counts(self):
        data, _ = hand_panel()
        assert data.n_units == 6
        assert data.n_periods == 2
        assert data.d_z == 1
        assert data.d_x == 0

    def test_rejects_mismatched_shapes(self):
        with pytest.raises(PanelDataError):
            PanelDataset(y=np.zeros((4, 2)), z=np.zeros((4, 3, 1)))
        with pytest.raises(PanelDataError):
            PanelDataset(y=np.zeros((4, 2)), z=np.zeros((5, 2, 1)))

    def test_lag_column_must_match_outcomes(self):
        y = np.array([[1, 0], [0, 1]])
        z = np.zeros((2, 2, 1))
        x_good = np.array([[[0.0], [1.0]], [[1.0], [0.0]]])
        d = PanelDataset(y=y, z=z, x=x_good, y0=np.array([0, 1]), lagged_outcome=0)
        assert d.lagged_outcome == 0
        x_bad = x_good.copy()
        x_bad[0, 1, 0] = 0.0  # contradicts y[0, 0] = 1
        with pytest.raises(PanelDataError):
            PanelDataset(y=y, z=z, x=x_bad, y0=np.array([0, 1]), lagged_outcome=0)

    def test_index_is_linear_in_both_parts(self):
        y = np.array([[1, 0]])
        z = np.array([[[2.0, 1.0], [0.0, -1.0]]])
        x = np.array([[[3.0], [4.0]]])
        d = PanelDataset(y=y, z=z, x=x)
        idx = d.index(np.array([1.0, 2.0]), np.array([0.5]))
        np.testing.assert_allclose(idx, [[2 + 2 + 1.5, -2 + 2.0]])


class TestParamPoint:
    def test_normalization_enforced(self):
        ParamPoint(beta=(1.0, 0.3), pinned=0)
        ParamPoint(beta=(0.3, -1.0), pinned=1)
        with pytest.raises(ValueError):
            ParamPoint(beta=(0.5, 1.0), pinned=0)
        with pytest.raises(ValueError):
            ParamPoint(beta=(1.0,), pinned=3)

    def test_unpinned_skips_the_scale_check(self):
        p = ParamPoint(beta=(0.2, 0.4), gamma=(7.0,), pinned=None)
        np.testing.assert_array_equal(p.theta, [0.2, 0.4, 7.0])

    def test_coordinates_coerce_to_floats(self):
        p = ParamPoint(beta=(1,), gamma=(2,), pinned=0)
        assert isinstance(p.beta[0], float) and isinstance(p.gamma[0], float)


class TestModelSpec:
    def test_binary_defaults(self):
        spec = ModelSpec(family="binary")
        assert spec.categories == (0, 1)
        assert spec.n_categories == 2

    def test_ordered_requires_sorted_thresholds(self):
        spec = ModelSpec(family="ordered", thresholds=(-1.0, 1.0), categories=(1, 2, 3))
        assert spec.n_categories == 3
        with pytest.raises(ValueError):
            ModelSpec(family="ordered", thresholds=(1.0, -1.0), categories=(1, 2, 3))

    def test_unknown_family_rejected(self):
        with pytest.raises(ValueError):
            ModelSpec(family="poisson")


class TestBuildCells:
    def test_exact_all_period_cells_partition_the_units(self):
        data, _ = hand_panel()
        cells = build_cells(data, scheme="all-period", match="exact")
        assert len(cells) == 2
        total = np.zeros(data.n_units)
        for cell in cells:
            assert set(np.unique(cell.weights)) <= {0.0, 1.0}
            total += cell.weights
        np.testing.assert_array_equal(total, np.ones(data.n_units))

    def test_pairwise_cells_cover_every_period_pair(self):
        sim = simulate(DgpConfig(design="static-ordered-2p", n=40, seed=1,
                                 theta_true=ParamPoint(beta=(1.0, 1.0), pinned=0)))
        cells = build_cells(sim.data, scheme="pairwise", match="exact")
        pairs = {c.periods for c in cells}
        assert pairs == {(0, 1)}
        for pair in pairs:
            mass = sum(c.mass for c in cells if c.periods == pair)
            assert mass == pytest.approx(sim.data.n_units)

    def test_kernel_weights_peak_at_the_eval_point(self):
        data, _ = hand_panel()
        [cell] = build_cells(data, scheme="all-period", match="kernel",
                             eval_points=np.array([[1.0, 0.0]]), bandwidth=0.5)
        assert cell.kind == "kernel"
        # units 0-2 sit exactly on the eval point, units 3-5 two+ bandwidths out
        assert np.all(cell.weights[:3] > cell.weights[3:].max())
        np.testing.assert_allclose(cell.weights[:3], 1.0)

    def test_y0_conditioning_splits_cells(self):
        y = np.array([[1, 0], [1, 0], [0, 1], [0, 1]])
        z = np.zeros((4, 2, 1))
        d = PanelDataset(y=y, z=z, y0=np.array([0, 1, 0, 1]))
        cells = build_cells(d, scheme="all-period", match="exact", condition_on_y0=True)
        assert sorted(c.y0 for c in cells) == [0, 1]
        for c in cells:
            assert c.mass == 2.0

    def test_ess_equals_member_count_for_exact_cells(self):
        data, _ = hand_panel()
        for cell in build_cells(data, scheme="all-period", match="exact"):
            assert cell.ess == pytest.approx(cell.mass)


class TestKernelHelpers:
    def test_bandwidth_rule_matches_the_formula(self):
        rng = np.random.default_rng(0)
        zf = rng.normal(size=(500, 3))
        h = rule_of_thumb_bandwidth(zf)
        expected = 1.06 * zf.std(axis=0, ddof=1) * 500 ** (-1.0 / (4 + 3))
        np.testing.assert_allclose(h, expected)

    def test_gaussian_weights_formula(self):
        zf = np.array([[0.0], [1.0], [2.0]])
        w = gaussian_weights(zf, np.array([0.0]), np.array([1.0]))
        np.testing.assert_allclose(w, np.exp(-0.5 * np.array([0.0, 1.0, 4.0])))

    def test_quantile_lattice_is_a_product_of_marginal_quantiles(self):
        rng = np.random.default_rng(1)
        zf = rng.normal(size=(200, 2))
        pts = quantile_lattice(zf, levels=(0.25, 0.75))
        assert pts.shape == (4, 2)
        qx = np.quantile(zf[:, 0], [0.25, 0.75])
        assert set(np.round(pts[:, 0], 12)) == set(np.round(qx, 12))


class TestPanelIO:
    def test_round_trip_preserves_everything(self, tmp_path):
        sim = simulate(DgpConfig(design="custom-binary-ARp", n=30, seed=9,
                                 theta_true=ParamPoint(beta=(1.0,), gamma=(0.5,), pinned=0)))
        path = tmp_path / "panel.csv"
        save_panel(sim.data, path)
        back = load_panel(path)
        np.testing.assert_array_equal(back.y, sim.data.y)
        np.testing.assert_allclose(back.z, sim.data.z)
        np.testing.assert_allclose(back.x, sim.data.x)
        np.testing.assert_array_equal(back.y0, sim.data.y0)
        assert back.lagged_outcome == sim.data.lagged_outcome

    def test_save_is_deterministic(self, tmp_path):
        data, _ = hand_panel()
        save_panel(data, tmp_path / "a.csv")
        save_panel(data, tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_unbalanced_panel_rejected(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("id,t,y,z1\n0,1,1,0.5\n0,2,0,0.1\n1,1,1,0.3\n")
        with pytest.raises(PanelDataError):
            load_panel(p)


class TestConditioningCell:
    def test_describe_mentions_periods_and_kind(self):
        cell = ConditioningCell(z_value=np.array([[0.5]]), periods=(0,),
                                weights=np.array([1.0, 0.0]))
        text = cell.describe()
        assert "periods=(0,)" in text and "exact" in text

    def test_kish_ess_for_unequal_weights(self):
        cell = ConditioningCell(z_value=np.array([[0.0]]), periods=(0,),
                                weights=np.array([1.0, 0.5]), kind="kernel")
        assert cell.ess == pytest.approx(1.5**2 / 1.25)
