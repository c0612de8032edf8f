"""Bound pairs and identifying inequalities, per outcome family.

Each family supplies a per-period pair of step functions of the scalar
cutoff c — a lower envelope and an upper envelope for the common latent
quantity — and the identifying restriction compares the worst lower bound
against the worst upper bound across periods, at every cutoff and in every
conditioning cell.  For discrete covariates the full continuum of cutoffs
collapses to the finite critical grid of realized index values, which
:func:`critical_cutoffs` enumerates.

Orientation conventions follow each family's defining display: binary and
ordered bound pairs are nondecreasing in c, monotone (general) and censored
pairs are nonincreasing in c.  The cross-family identities are exact and
are asserted in the test suite (ordered at J=2 maps onto binary via
c -> -c with the envelope roles swapped; the general family at y=0 matches
binary at the same c after complementing).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .ccp import event_prob
from .core import ConditioningCell, ModelSpec, MultinomialPanel, PanelDataset, ParamPoint


@dataclass
class CutoffGrid:
    """Sorted cutoff values with provenance ('critical-discrete', 'user-grid', 'quantile-grid')."""

    values: np.ndarray
    provenance: str

    def __post_init__(self):
        self.values = np.atleast_1d(np.asarray(self.values, dtype=float))
        if self.values.size == 0:
            raise ValueError("empty cutoff grid")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("cutoff grid must be finite")
        self.values = np.unique(self.values)


@dataclass
class BoundProfile:
    """Evaluated bounds for one cell: L, U arrays of shape (T_cell, m) over m restrictions.

    ``labels`` names each restriction column (a cutoff c, a (c, y) pair for
    the monotone family, or a (K, c-matrix) combination for multinomial).
    ``lbar``/``ubar`` are the binding envelopes whose difference is the slack.
    """

    cell: ConditioningCell
    labels: list
    L: np.ndarray
    U: np.ndarray
    aggregation: str = "max-min"  # censored uses "max-max"

    @property
    def lbar(self) -> np.ndarray:
        return self.L.max(axis=0)

    @property
    def ubar(self) -> np.ndarray:
        if self.aggregation == "max-max":
            return self.U.max(axis=0)
        return self.U.min(axis=0)

    @property
    def slack(self) -> np.ndarray:
        return self.ubar - self.lbar


@dataclass
class CheckResult:
    profiles: list
    worst_slack: float
    passed: bool
    violations: list = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.passed


def _require_family(spec: ModelSpec, *families: str):
    if spec.family not in families:
        raise ValueError(f"operation requires family in {families}, got {spec.family!r}")


def _cell_index(theta: ParamPoint, data: PanelDataset, cell: ConditioningCell) -> np.ndarray:
    """(n, T_cell) linear index restricted to the cell's periods."""
    idx = data.index(theta.beta_arr, theta.gamma_arr)
    return idx[:, list(cell.periods)]


def _wcdf(values: np.ndarray, weights: np.ndarray, c: np.ndarray, total: float) -> np.ndarray:
    """P(value <= c) within the cell, vectorized over c (ties included)."""
    order = np.argsort(values, kind="stable")
    cw = np.concatenate([[0.0], np.cumsum(weights[order])])
    pos = np.searchsorted(values[order], c, side="right")
    return cw[pos] / total


def _wccdf(values: np.ndarray, weights: np.ndarray, c: np.ndarray, total: float) -> np.ndarray:
    """P(value >= c) within the cell, vectorized over c (ties included)."""
    order = np.argsort(values, kind="stable")
    cw = np.concatenate([[0.0], np.cumsum(weights[order])])
    wsum = cw[-1]
    pos = np.searchsorted(values[order], c, side="left")
    return (wsum - cw[pos]) / total


def _b3_adjusted_index(theta: ParamPoint, spec: ModelSpec, data: PanelDataset,
                       cell: ConditioningCell, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-period index arrays for the lower and upper events.

    In the unobserved-initial-outcome mode the first panel period's lagged
    outcome is not in the data, so its contribution to the index is replaced
    by its most conservative value: max{0, gamma} inside lower-bound events
    and min{0, gamma} inside upper-bound events.  All other periods (and all
    other modes) use the observed index on both sides.
    """
    idx_lo, idx_up = idx, idx
    if spec.initial_condition == "unobserved" and data.lagged_outcome is not None and 0 in cell.periods:
        j = data.lagged_outcome
        g = theta.gamma_arr[j]
        pos = cell.periods.index(0)
        w = data.z[:, 0, :] @ theta.beta_arr
        others = [k for k in range(data.d_x) if k != j]
        if others:
            w = w + data.x[:, 0, others] @ theta.gamma_arr[others]
        idx_lo = idx.copy()
        idx_up = idx.copy()
        idx_lo[:, pos] = w + max(0.0, g)
        idx_up[:, pos] = w + min(0.0, g)
    return idx_lo, idx_up


def binary_bounds(theta: ParamPoint, spec: ModelSpec, cell: ConditioningCell,
                  data: PanelDataset, c) -> tuple[np.ndarray, np.ndarray]:
    """Per-period envelopes L_t(c) = P(Y_t=1, index <= c | cell) and
    U_t(c) = 1 - P(Y_t=0, index >= c | cell).

    Returns arrays of shape (T_cell, len(c)); both are nondecreasing step
    functions of c with L_t <= P(Y_t=1|cell) <= U_t pointwise.
    """
    _require_family(spec, "binary")
    c = np.atleast_1d(np.asarray(c, dtype=float))
    idx = _cell_index(theta, data, cell)
    idx_lo, idx_up = _b3_adjusted_index(theta, spec, data, cell, idx)
    w = cell.weights
    total = float(np.sum(w))
    L = np.empty((len(cell.periods), c.size))
    U = np.empty_like(L)
    for k, t in enumerate(cell.periods):
        y1 = data.y[:, t] == 1
        L[k] = _wcdf(idx_lo[y1, k], w[y1], c, total)
        y0 = data.y[:, t] == 0
        U[k] = 1.0 - _wccdf(idx_up[y0, k], w[y0], c, total)
    return L, U


def ordered_bounds(theta: ParamPoint, spec: ModelSpec, cell: ConditioningCell,
                   data: PanelDataset, c) -> tuple[np.ndarray, np.ndarray]:
    """Per-period envelopes for the ordered family.

    lower_t(c) = sum_j P(Y_t = y_j, b_{j+1} - index <= c | cell) and
    upper_t(c) = 1 - sum_j P(Y_t = y_j, b_j - index >= c | cell), where the
    category-1 term vanishes on the upper side (its lower threshold is
    -inf) and the top-category term vanishes on the lower side.  At J=2,
    b_2=0 this is the binary pair read through c -> -c: lower_t(c) equals
    1 - U_t(-c) and upper_t(c) equals 1 - L_t(-c), exactly.
    """
    _require_family(spec, "ordered")
    if not spec.categories:
        raise ValueError("ordered family requires categories on the ModelSpec")
    c = np.atleast_1d(np.asarray(c, dtype=float))
    idx = _cell_index(theta, data, cell)
    w = cell.weights
    total = float(np.sum(w))
    cats = spec.categories
    ths = spec.thresholds  # b_2..b_J
    T_cell = len(cell.periods)
    lower = np.zeros((T_cell, c.size))
    upper_mass = np.zeros((T_cell, c.size))
    for k, t in enumerate(cell.periods):
        for j, yj in enumerate(cats):
            sel = data.y[:, t] == yj
            if j + 1 < len(cats):  # b_{j+1} finite
                vals = ths[j] - idx[sel, k]
                lower[k] += _wcdf(vals, w[sel], c, total)
            if j > 0:  # b_j finite
                vals = ths[j - 1] - idx[sel, k]
                upper_mass[k] += _wccdf(vals, w[sel], c, total)
    return lower, 1.0 - upper_mass


def ordered_bounds_naive(theta: ParamPoint, spec: ModelSpec, cell: ConditioningCell,
                         data: PanelDataset, c, j: int) -> tuple[np.ndarray, np.ndarray]:
    """Single-category relaxation of the ordered envelopes (cumulative events).

    For the cut at category index ``j`` (0-based, below the top):
    lower_t(c) = P(Y_t <= y_j, b_{j+1} - index <= c | cell) and
    upper_t(c) = 1 - P(Y_t > y_j, b_j ... >= c | cell) with the convention
    that the j=0 upper event is empty.  Pointwise weakly looser than
    :func:`ordered_bounds`; used for tightness comparisons.
    """
    _require_family(spec, "ordered")
    cats = spec.categories
    if not 0 <= j < len(cats) - 1:
        raise ValueError(f"cut index {j} must be below the top category")
    c = np.atleast_1d(np.asarray(c, dtype=float))
    idx = _cell_index(theta, data, cell)
    w = cell.weights
    total = float(np.sum(w))
    ths = spec.thresholds
    T_cell = len(cell.periods)
    lower = np.zeros((T_cell, c.size))
    upper = np.ones((T_cell, c.size))
    for k, t in enumerate(cell.periods):
        low_sel = data.y[:, t] <= cats[j]
        lower[k] = _wcdf(ths[j] - idx[low_sel, k], w[low_sel], c, total)
        up_sel = data.y[:, t] > cats[j]
        if j > 0:
            upper[k] = 1.0 - _wccdf(ths[j - 1] - idx[up_sel, k], w[up_sel], c, total)
    return lower, upper


def general_bounds(theta: ParamPoint, spec: ModelSpec, cell: ConditioningCell,
                   data: PanelDataset, c, y: float) -> tuple[np.ndarray, np.ndarray]:
    """Monotone-outcome envelopes at outcome level y.

    L_t(c) = P(Y_t <= y, index >= c | cell) and
    U_t(c) = 1 - P(Y_t > y, index <= c | cell); both nonincreasing in c.
    Valid for any family whose outcome is a monotone transform of the index
    plus a stationary shock (binary, ordered, monotone).
    """
    _require_family(spec, "binary", "ordered", "monotone")
    c = np.atleast_1d(np.asarray(c, dtype=float))
    idx = _cell_index(theta, data, cell)
    w = cell.weights
    total = float(np.sum(w))
    L = np.empty((len(cell.periods), c.size))
    U = np.empty_like(L)
    for k, t in enumerate(cell.periods):
        lo = data.y[:, t] <= y
        L[k] = _wccdf(idx[lo, k], w[lo], c, total)
        hi = data.y[:, t] > y
        U[k] = 1.0 - _wcdf(idx[hi, k], w[hi], c, total)
    return L, U


def multinomial_bounds(theta: ParamPoint, cell: ConditioningCell, data: MultinomialPanel,
                       K_subset, c_matrix) -> tuple[np.ndarray, np.ndarray]:
    """Envelopes for the multinomial family at one (K, c-matrix) restriction.

    L_t = P(Y_t in K, (W_j - W_k)'theta <= c_jk for all j in K, k not in K)
    and U_t = 1 - P(Y_t not in K, all differences >= c_jk), within the cell.
    ``c_matrix[a, b]`` pairs K_subset[a] with the b-th excluded alternative
    (in increasing order).  Infinite entries make the corresponding
    condition vacuous on the lower side.
    """
    if not isinstance(data, MultinomialPanel):
        raise ValueError("multinomial_bounds requires a MultinomialPanel")
    J1 = data.n_alternatives
    K = sorted(set(int(j) for j in K_subset))
    if not K or len(K) >= J1:
        raise ValueError("K must be a nonempty proper subset of the alternatives")
    out = [k for k in range(J1) if k not in K]
    c_matrix = np.broadcast_to(np.asarray(c_matrix, dtype=float), (len(K), len(out)))
    w = cell.weights
    total = float(np.sum(w))
    util = data.w @ np.asarray(theta.theta)  # (n, T, J+1)
    T_cell = len(cell.periods)
    L = np.empty(T_cell)
    U = np.empty(T_cell)
    for kk, t in enumerate(cell.periods):
        diffs = util[:, t, K][:, :, None] - util[:, t, out][:, None, :]  # (n, |K|, |out|)
        all_le = np.all(diffs <= c_matrix[None], axis=(1, 2))
        all_ge = np.all(diffs >= c_matrix[None], axis=(1, 2))
        in_K = np.isin(data.y[:, t], K)
        L[kk] = float(np.sum(w[in_K & all_le])) / total
        U[kk] = 1.0 - float(np.sum(w[~in_K & all_ge])) / total
    return L, U


def censored_bounds(theta: ParamPoint, spec: ModelSpec, cell: ConditioningCell,
                    data: PanelDataset, c, latent_lag: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Envelopes for the censored-at-zero family.

    lower_t(c) = P(Y_t <= index_t - c | cell) and
    upper_t(c) = P(0 < Y_t <= index_t - c | cell) + P(Y_t = 0 | cell); both
    nonincreasing in c, and the identifying inequality compares
    max_t lower_t(c) <= max_s upper_s(c).

    With ``latent_lag=True`` the lag enters through the latent (uncensored)
    outcome, so events are restricted to units whose previous outcome is
    positive (where latent and observed lags agree), and the upper envelope
    gains the escape masses P(Y_t > 0, Y_{t-1} = 0) and P(Y_t = 0).
    Requires a lagged-outcome column in X.
    """
    _require_family(spec, "censored")
    if np.any(data.y < 0):
        raise ValueError("censored family requires Y >= 0")
    c = np.atleast_1d(np.asarray(c, dtype=float))
    idx = _cell_index(theta, data, cell)
    w = cell.weights
    total = float(np.sum(w))
    T_cell = len(cell.periods)
    lower = np.empty((T_cell, c.size))
    upper = np.empty((T_cell, c.size))
    if latent_lag and data.lagged_outcome is None:
        raise ValueError("latent_lag variant requires data.lagged_outcome")
    for k, t in enumerate(cell.periods):
        yt = data.y[:, t]
        gap = yt - idx[:, k]  # event Y <= idx - c  <=>  gap <= -c
        if not latent_lag:
            lower[k] = _wcdf(gap, w, -c, total)
            pos = yt > 0
            p0 = float(np.sum(w[~pos])) / total
            upper[k] = _wcdf(gap[pos], w[pos], -c, total) + p0
        else:
            lag_pos = data.x[:, t, data.lagged_outcome] > 0
            lower[k] = _wcdf(gap[lag_pos], w[lag_pos], -c, total)
            pos = yt > 0
            p0 = float(np.sum(w[~pos])) / total
            escape = float(np.sum(w[pos & ~lag_pos])) / total
            sel = pos & lag_pos
            upper[k] = _wcdf(gap[sel], w[sel], -c, total) + p0 + escape
    return lower, upper


def critical_cutoffs(theta: ParamPoint, spec: ModelSpec, cell: ConditioningCell,
                     data: PanelDataset, max_discrete: int = 64,
                     resolution: int = 512) -> CutoffGrid:
    """Cutoffs at which some bound envelope can move, within one cell.

    For discrete X the binary/monotone grid is the realized index values
    {z_t'b + x_k'g} (at most K*T points per cell) and the ordered grid is
    {b_j - index} over interior thresholds; evaluating the inequalities on
    this grid is equivalent to evaluating them on all reals.  When the
    realized values are too rich (continuous X, or censored outcomes) the
    grid falls back to ``resolution`` quantiles of the relevant values plus
    both endpoints, flagged as provenance='quantile-grid'.
    """
    live = cell.weights > 0
    idx = _cell_index(theta, data, cell)[live]
    if spec.family in ("binary", "monotone"):
        raw = idx.reshape(-1)
        if spec.family == "binary" and spec.initial_condition == "unobserved" \
                and data.lagged_outcome is not None and 0 in cell.periods:
            lo, up = _b3_adjusted_index(theta, spec, data, cell, _cell_index(theta, data, cell))
            raw = np.concatenate([lo[live].reshape(-1), up[live].reshape(-1)])
    elif spec.family == "ordered":
        raw = (np.asarray(spec.thresholds)[None, None, :] - idx[:, :, None]).reshape(-1)
    elif spec.family == "censored":
        raw = (idx - data.y[live][:, list(cell.periods)]).reshape(-1)
    else:
        raise ValueError(f"no cutoff rule for family {spec.family!r}")
    vals = np.unique(raw)
    if vals.size <= max_discrete:
        return CutoffGrid(vals, "critical-discrete")
    qs = np.quantile(vals, np.linspace(0, 1, resolution))
    return CutoffGrid(np.concatenate([qs, [vals[0], vals[-1]]]), "quantile-grid")


def default_tolerance(n_total: int, cell: ConditioningCell) -> float:
    """Sampling slack 2*sqrt(log(n)/n_cell) with n_cell the cell's effective size."""
    ess = max(cell.ess, 1.0)
    return 2.0 * np.sqrt(np.log(max(n_total, 3)) / ess)


def _bounds_for_cell(theta, spec, cell, data, grid, y_values):
    """(labels, L, U, aggregation) for one cell under the family's restriction layout."""
    if spec.family == "binary":
        L, U = binary_bounds(theta, spec, cell, data, grid.values)
        return list(grid.values), L, U, "max-min"
    if spec.family == "ordered":
        L, U = ordered_bounds(theta, spec, cell, data, grid.values)
        return list(grid.values), L, U, "max-min"
    if spec.family == "monotone":
        if y_values is None:
            y_values = sorted(np.unique(data.y[cell.weights > 0]))[:-1]
        labels, Ls, Us = [], [], []
        for y in y_values:
            L, U = general_bounds(theta, spec, cell, data, grid.values, y)
            labels.extend((c, y) for c in grid.values)
            Ls.append(L)
            Us.append(U)
        return labels, np.concatenate(Ls, axis=1), np.concatenate(Us, axis=1), "max-min"
    if spec.family == "censored":
        L, U = censored_bounds(theta, spec, cell, data, grid.values)
        return list(grid.values), L, U, "max-max"
    raise ValueError(f"check_inequalities does not handle family {spec.family!r} here")


def check_inequalities(theta: ParamPoint, spec: ModelSpec, cells, data,
                       grid=None, tol: float | None = None,
                       y_values=None) -> CheckResult:
    """Evaluate every identifying inequality for theta across cells.

    ``grid`` may be a CutoffGrid, an array of cutoffs, or None (per-cell
    critical grid).  ``tol`` is the per-cell violation allowance; None uses
    :func:`default_tolerance`.  The worst slack reported is raw (before
    tolerance).  Multinomial data routes to the subset/c-matrix layout.
    """
    if isinstance(data, MultinomialPanel):
        return check_inequalities_multinomial(theta, cells, data, tol=tol)
    profiles = []
    violations = []
    worst = np.inf
    passed = True
    n_total = data.n_units
    for cell in cells:
        if grid is None:
            g = critical_cutoffs(theta, spec, cell, data)
        elif isinstance(grid, CutoffGrid):
            g = grid
        else:
            g = CutoffGrid(np.asarray(grid, dtype=float), "user-grid")
        labels, L, U, agg = _bounds_for_cell(theta, spec, cell, data, g, y_values)
        prof = BoundProfile(cell=cell, labels=labels, L=L, U=U, aggregation=agg)
        profiles.append(prof)
        slack = prof.slack
        j = int(np.argmin(slack))
        if slack[j] < worst:
            worst = float(slack[j])
        eps = default_tolerance(n_total, cell) if tol is None else tol
        bad = np.nonzero(slack < -eps)[0]
        if bad.size:
            passed = False
            for b in bad:
                violations.append({
                    "cell": cell.describe(),
                    "label": labels[b],
                    "slack": float(slack[b]),
                    "t_binding_lower": cell.periods[int(np.argmax(prof.L[:, b]))],
                    "s_binding_upper": cell.periods[int(
                        np.argmax(prof.U[:, b]) if agg == "max-max" else np.argmin(prof.U[:, b]))],
                })
    return CheckResult(profiles=profiles, worst_slack=worst, passed=passed,
                       violations=violations)


def multinomial_cutoff_grids(theta: ParamPoint, cell: ConditioningCell,
                             data: MultinomialPanel, K, max_discrete: int = 64,
                             resolution: int = 16) -> list[np.ndarray]:
    """Per-(j, k) cutoff grids of realized utility differences for K vs its complement."""
    util = data.w @ np.asarray(theta.theta)
    live = cell.weights > 0
    out = [k for k in range(data.n_alternatives) if k not in K]
    grids = []
    for j in K:
        for k in out:
            d = np.unique((util[live][:, list(cell.periods), j]
                           - util[live][:, list(cell.periods), k]).reshape(-1))
            if d.size > max_discrete:
                d = np.quantile(d, np.linspace(0, 1, resolution))
            grids.append(d)
    return grids


def check_inequalities_multinomial(theta: ParamPoint, cells, data: MultinomialPanel,
                                   tol: float | None = None, all_subsets: bool = False,
                                   max_combos: int = 4096) -> CheckResult:
    """Multinomial restriction scan over choice subsets and c-matrix combinations.

    Default subsets are singletons and their complements; ``all_subsets``
    enumerates every nonempty proper subset.  c-matrices run over the
    cartesian product of per-pair realized-difference grids, capped at
    ``max_combos`` combinations per (cell, K) with an error if exceeded.
    """
    J1 = data.n_alternatives
    if all_subsets:
        from itertools import combinations
        subsets = [list(s) for r in range(1, J1) for s in combinations(range(J1), r)]
    else:
        subsets = [[j] for j in range(J1)]
        subsets += [[k for k in range(J1) if k != j] for j in range(J1)]
    profiles = []
    violations = []
    worst = np.inf
    passed = True
    for cell in cells:
        labels, Ls, Us = [], [], []
        for K in subsets:
            grids = multinomial_cutoff_grids(theta, cell, data, K)
            sizes = [len(g) for g in grids]
            n_combo = int(np.prod(sizes))
            if n_combo > max_combos:
                raise ValueError(
                    f"{n_combo} c-matrix combinations for K={K} exceed cap {max_combos}"
                )
            out_count = J1 - len(K)
            for combo in product(*grids):
                cmat = np.asarray(combo, dtype=float).reshape(len(K), out_count)
                L, U = multinomial_bounds(theta, cell, data, K, cmat)
                labels.append((tuple(K), combo))
                Ls.append(L[:, None])
                Us.append(U[:, None])
        prof = BoundProfile(cell=cell, labels=labels, L=np.concatenate(Ls, axis=1),
                            U=np.concatenate(Us, axis=1))
        profiles.append(prof)
        slack = prof.slack
        worst = min(worst, float(slack.min()))
        eps = default_tolerance(data.n_units, cell) if tol is None else tol
        for b in np.nonzero(slack < -eps)[0]:
            passed = False
            violations.append({"cell": cell.describe(), "label": labels[b],
                               "slack": float(slack[b])})
    return CheckResult(profiles=profiles, worst_slack=worst, passed=passed,
                       violations=violations)
