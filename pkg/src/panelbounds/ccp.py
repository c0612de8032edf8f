"""Weighted conditional choice probabilities on conditioning cells.

Two estimators: :func:`event_prob` for single events (any family), and
:func:`joint_path_probs` for full outcome-path tables (discrete outcomes
and discrete/recurring covariate paths only).  Kernel-weighted sums use
compensated summation so probabilities of disjoint events add exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ConditioningCell, PanelDataset


def _wsum(weights: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Correctly rounded weighted sum. Exact for 0/1 weights (integer counts)."""
    w = weights if mask is None else weights[mask]
    if w.size == 0:
        return 0.0
    # integer-valued weights sum exactly in float64 below 2^53; fsum otherwise
    return math.fsum(w.tolist())


def event_prob(cell: ConditioningCell, indicator: np.ndarray) -> float:
    """Weighted relative frequency of a unit-level event within a cell.

    ``indicator`` is an (n,) boolean (or 0/1) array computed by the caller
    from the dataset; the cell supplies the weights.  Disjoint events add:
    event_prob(A) + event_prob(B) == event_prob(A or B) to 1e-12 even under
    kernel weights.
    """
    indicator = np.asarray(indicator)
    if indicator.shape != cell.weights.shape:
        raise ValueError(f"indicator shape {indicator.shape} != weights {cell.weights.shape}")
    total = _wsum(cell.weights)
    if total <= 0:
        raise ValueError("cell has zero mass")
    return _wsum(cell.weights, indicator.astype(bool)) / total


@dataclass
class CcpTable:
    """Joint distribution of (outcome path, covariate path) within one cell.

    ``mass[(y_path, w_path)]`` sums to one over all realized pairs; paths are
    tuples over periods.  ``w_path`` collects the X path only (Z is fixed by
    the cell).  For datasets with d_x = 0 the w_path is the empty tuple.
    """

    mass: dict = field(default_factory=dict)
    periods: tuple = ()

    def p_w(self, w_path: tuple) -> float:
        return sum(m for (y, w), m in self.mass.items() if w == w_path)

    def w_support(self) -> list[tuple]:
        return sorted({w for (_, w) in self.mass})

    def y_support(self) -> list[tuple]:
        return sorted({y for (y, _) in self.mass})

    def p_y_given_w(self, y_path: tuple, w_path: tuple) -> float:
        pw = self.p_w(w_path)
        if pw <= 0:
            return 0.0
        return self.mass.get((y_path, w_path), 0.0) / pw

    def p_event_given_w(self, t: int, event, w_path: tuple) -> float:
        """P(event(Y_t) | W = w_path); ``event`` maps an outcome value to bool."""
        pw = self.p_w(w_path)
        if pw <= 0:
            return 0.0
        num = sum(m for (y, w), m in self.mass.items() if w == w_path and event(y[t]))
        return num / pw

    def marginal_event(self, t: int, event) -> float:
        """P(event(Y_t)) within the cell (aggregated over covariate paths)."""
        return sum(m for (y, _), m in self.mass.items() if event(y[t]))

    def total(self) -> float:
        return math.fsum(self.mass.values())


def joint_path_probs(cell: ConditioningCell, data: PanelDataset,
                     max_support: int = 4096) -> CcpTable:
    """Tabulate P(Y path, X path | cell) as weighted relative frequencies.

    Requires discrete (recurring) outcome and X values within the cell: if
    the number of distinct (y, x) paths exceeds ``max_support`` — the
    continuous-covariate case, where per-path tables are meaningless — this
    raises, and callers should fall back to event probabilities.
    """
    w = cell.weights
    live = np.nonzero(w > 0)[0]
    periods = cell.periods
    total = _wsum(w)
    groups: dict[tuple, list[int]] = {}
    for i in live:
        ypath = tuple(data.y[i, list(periods)].tolist())
        xpath = tuple(tuple(data.x[i, t].tolist()) for t in periods) if data.d_x else ()
        groups.setdefault((ypath, xpath), []).append(i)
        if len(groups) > max_support:
            raise ValueError(
                f"more than {max_support} distinct paths in cell; covariates look "
                "continuous — use event_prob instead"
            )
    mass = {k: _wsum(w[np.asarray(idx)]) / total for k, idx in groups.items()}
    return CcpTable(mass=mass, periods=tuple(periods))


def dataset_from_table(table: CcpTable, z_value) -> tuple:
    """Expand a cell table into a weighted one-unit-per-path dataset.

    Every (outcome path, covariate path) entry becomes one synthetic unit
    whose weight is its probability, so population tables can be run through
    the unit-level checkers without sampling error.  Returns the dataset and
    a matching cell whose weights carry the path masses.
    """
    from .core import ConditioningCell, PanelDataset

    keys = sorted(table.mass)
    periods = table.periods if table.periods else tuple(range(len(keys[0][0])))
    n_per = len(periods)
    z_value = np.asarray(z_value, dtype=float).reshape(n_per, -1)
    y = np.array([k[0] for k in keys], dtype=float)
    weights = np.array([table.mass[k] for k in keys], dtype=float)
    z = np.broadcast_to(z_value, (len(keys), n_per, z_value.shape[1])).copy()
    if keys[0][1]:
        x = np.array([[list(step) for step in k[1]] for k in keys], dtype=float)
    else:
        x = np.zeros((len(keys), n_per, 0))
    data = PanelDataset(y=y, z=z, x=x)
    cell = ConditioningCell(
        z_value=z_value, periods=tuple(range(n_per)), weights=weights
    )
    return data, cell


def table_from_population(path_probs: dict, periods: tuple | None = None) -> CcpTable:
    """Build a CcpTable directly from known population path probabilities.

    ``path_probs`` maps (y_path, w_path) tuples to probabilities; they are
    normalized to sum to one.  Used for analytic designs and property tests.
    """
    total = math.fsum(path_probs.values())
    if total <= 0:
        raise ValueError("path probabilities must have positive total mass")
    if any(v < 0 for v in path_probs.values()):
        raise ValueError("negative path probability")
    mass = {k: v / total for k, v in path_probs.items() if v > 0}
    if periods is None:
        some_y = next(iter(mass))[0]
        periods = tuple(range(len(some_y)))
    return CcpTable(mass=mass, periods=periods)
