"""Weighted choice-probability estimation: hand counts and exact round trips."""

import numpy as np
import pytest

from panelbounds.ccp import (
    dataset_from_table,
    event_prob,
    joint_path_probs,
    table_from_population,
)
from panelbounds.core import ConditioningCell, build_cells

from conftest import hand_panel


def _first_cell(data):
    cells = build_cells(data, scheme="all-period", match="exact")
    # hand_panel's first three units share the path (1, 0)
    return next(c for c in cells if c.weights[0] == 1.0)


class TestEventProb:
    def test_matches_hand_counts(self):
        data, _ = hand_panel()
        cell = _first_cell(data)
        # among units 0-2: y_1 values are 1, 1, 0
        assert event_prob(cell, data.y[:, 0] == 1) == pytest.approx(2 / 3)
        assert event_prob(cell, data.y[:, 1] == 1) == pytest.approx(1 / 3)

    def test_disjoint_events_add_exactly(self):
        rng = np.random.default_rng(4)
        w = rng.random(50)
        cell = ConditioningCell(z_value=np.zeros((1, 1)), periods=(0,),
                                weights=w, kind="kernel")
        a = rng.random(50) < 0.3
        b = (~a) & (rng.random(50) < 0.5)
        total = event_prob(cell, a) + event_prob(cell, b)
        assert total == pytest.approx(event_prob(cell, a | b), abs=1e-12)

    def test_zero_mass_cell_rejected(self):
        cell = ConditioningCell(z_value=np.zeros((1, 1)), periods=(0,),
                                weights=np.zeros(3))
        with pytest.raises(ValueError):
            event_prob(cell, np.ones(3, dtype=bool))


class TestJointPathProbs:
    def test_matches_hand_frequencies(self):
        data, _ = hand_panel()
        cell = _first_cell(data)
        table = joint_path_probs(cell, data)
        assert table.mass[((1, 0), ())] == pytest.approx(1 / 3)
        assert table.mass[((1, 1), ())] == pytest.approx(1 / 3)
        assert table.mass[((0, 0), ())] == pytest.approx(1 / 3)
        assert table.total() == pytest.approx(1.0)

    def test_conditional_and_marginal_queries(self):
        table = table_from_population({
            ((0, 0), ((0.0,), (0.0,))): 0.2,
            ((1, 0), ((0.0,), (1.0,))): 0.3,
            ((1, 1), ((0.0,), (1.0,))): 0.5,
        })
        w_hot = ((0.0,), (1.0,))
        assert table.p_w(w_hot) == pytest.approx(0.8)
        assert table.p_y_given_w((1, 1), w_hot) == pytest.approx(0.5 / 0.8)
        assert table.p_event_given_w(1, lambda y: y == 1, w_hot) == pytest.approx(0.5 / 0.8)
        assert table.marginal_event(0, lambda y: y == 1) == pytest.approx(0.8)

    def test_continuous_covariates_rejected(self):
        rng = np.random.default_rng(0)
        from panelbounds.core import PanelDataset
        n = 50
        data = PanelDataset(y=np.zeros((n, 2), dtype=int), z=np.zeros((n, 2, 1)),
                            x=rng.normal(size=(n, 2, 1)))
        cell = ConditioningCell(z_value=np.zeros((2, 1)), periods=(0, 1),
                                weights=np.ones(n))
        with pytest.raises(ValueError, match="continuous"):
            joint_path_probs(cell, data, max_support=10)


class TestTableRoundTrip:
    def test_population_table_to_dataset_and_back(self):
        probs = {
            ((0, 0), ((0.0,), (0.0,))): 0.15,
            ((0, 1), ((0.0,), (0.0,))): 0.25,
            ((1, 0), ((1.0,), (0.0,))): 0.35,
            ((1, 1), ((1.0,), (1.0,))): 0.25,
        }
        table = table_from_population(probs)
        data, cell = dataset_from_table(table, z_value=np.array([[0.5], [0.5]]))
        back = joint_path_probs(cell, data)
        for key, p in probs.items():
            assert back.mass[key] == pytest.approx(p, abs=1e-15)

    def test_normalization_and_validation(self):
        table = table_from_population({((0,), ()): 2.0, ((1,), ()): 6.0})
        assert table.mass[((1,), ())] == pytest.approx(0.75)
        with pytest.raises(ValueError):
            table_from_population({((0,), ()): -0.1, ((1,), ()): 1.1})
        with pytest.raises(ValueError):
            table_from_population({})
