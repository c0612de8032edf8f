"""Cross-checks against two earlier restriction systems for binary panels.

For the binary model whose endogenous covariate is the one-period lagged
outcome, an older line of work screens parameters through nine sign
implications per ordered period pair, each pairing an outcome-probability
comparison with a linear consequent in the index difference and the lag
coefficient.  A second, static benchmark aligns index rankings with outcome
probability rankings when there are no endogenous covariates at all.  This
module evaluates both systems on exact cell tables and scans a coefficient
grid to confirm they accept exactly the same parameters as the inequality
checks in :mod:`panelbounds.bounds`, while needing far fewer restrictions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .bounds import check_inequalities
from .ccp import CcpTable, dataset_from_table, table_from_population
from .core import ConditioningCell, ModelSpec, ParamPoint

__all__ = [
    "RuleOutcome",
    "KptReport",
    "ManskiReport",
    "ScanReport",
    "RULE_LABELS",
    "kpt_check",
    "manski_check",
    "kpt_equivalence_scan",
    "restriction_counts",
    "exhaustive_ar1_design",
    "random_ar1_table",
]

RULE_LABELS = ("i", "ii", "iii", "iv", "v", "vi", "vii", "viii", "ix")

# Each rule pairs a t-side outcome event with the s-side terms kept when the
# other upper terms are dropped.  Event codes: 'marg' keeps both lag values,
# 'lag1'/'lag0' keep one.  The consequent compares the t-side entry threshold
# with the s-side exit threshold.
_T_EVENTS = ("marg", "lag1", "lag0")
_S_EVENTS = ("marg", "lag1", "lag0")


@dataclass(frozen=True)
class RuleOutcome:
    """One rule at one ordered period pair."""

    label: str
    pair: tuple
    antecedent: bool
    antecedent_margin: float   # lhs - rhs of the probability comparison
    consequent: bool
    consequent_value: float    # the linear expression that must be > 0
    triggered: bool            # antecedent holds but consequent fails

    def describe(self) -> str:
        state = "TRIGGERED" if self.triggered else ("active" if self.antecedent else "idle")
        return (
            f"rule {self.label} (t={self.pair[0]}, s={self.pair[1]}): {state}, "
            f"antecedent margin {self.antecedent_margin:+.4f}, "
            f"consequent value {self.consequent_value:+.4f}"
        )


@dataclass(frozen=True)
class KptReport:
    passed: bool
    outcomes: list
    n_rules: int

    @property
    def violated(self) -> list:
        return [o for o in self.outcomes if o.triggered]

    @property
    def closest_margin(self) -> float:
        """Smallest |probability margin| across rules; boundary sensitivity."""
        return min(abs(o.antecedent_margin) for o in self.outcomes)


def _lag_probs(ccp: CcpTable, t: int) -> dict:
    """Outcome-by-lag event probabilities for period ``t`` within the cell."""
    out = {"p1": 0.0, "p0": 0.0, "p1_lag1": 0.0, "p1_lag0": 0.0,
           "p0_lag1": 0.0, "p0_lag0": 0.0}
    for (y_path, w_path), m in ccp.mass.items():
        y = int(y_path[t])
        lag = int(round(float(w_path[t][0])))
        out["p1" if y == 1 else "p0"] += m
        out[f"p{y}_lag{lag}"] += m
    return out


def _require_ar1(theta: ParamPoint, ccp: CcpTable) -> float:
    if theta.gamma_arr.size != 1:
        raise ValueError("nine-rule screen needs exactly one lag coefficient")
    probe = next(iter(ccp.mass))[1]
    if not probe or len(probe[0]) != 1:
        raise ValueError(
            "nine-rule screen needs the lagged outcome as the only endogenous "
            "covariate"
        )
    lags = {float(step[0]) for (_, w) in ccp.mass for step in w}
    if not lags <= {0.0, 1.0}:
        raise ValueError(f"lag column takes values {sorted(lags)}, expected 0/1")
    return float(theta.gamma_arr[0])


def kpt_check(
    theta: ParamPoint,
    cell: ConditioningCell,
    ccp: CcpTable,
    strict: bool = True,
    margin: float = 0.0,
) -> KptReport:
    """Evaluate the nine sign implications at every ordered period pair.

    The parameter passes when no rule has its probability comparison
    satisfied while its linear consequent fails.  ``strict`` applies the
    comparisons as strict inequalities; the weak form (``strict=False``)
    also activates exact ties, for boundary studies.  ``margin`` shifts the
    probability comparison, useful with sampled tables.
    """
    gamma = _require_ar1(theta, ccp)
    periods = ccp.periods if ccp.periods else cell.periods
    n_per = len(periods)
    z = np.asarray(cell.z_value, dtype=float).reshape(n_per, -1)
    beta = theta.beta_arr
    zb = z @ beta
    probs = [_lag_probs(ccp, t) for t in range(n_per)]

    hi = max(0.0, gamma)
    lo = min(0.0, gamma)
    enter = {"marg": hi, "lag1": gamma, "lag0": 0.0}   # t-side entry offset
    exit_ = {"marg": lo, "lag1": gamma, "lag0": 0.0}   # s-side exit offset

    outcomes = []
    for t in range(n_per):
        for s in range(n_per):
            if s == t:
                continue
            delta = float(zb[t] - zb[s])
            for r, (te, se) in enumerate(
                (a, b) for a in _T_EVENTS for b in _S_EVENTS
            ):
                lhs = probs[t]["p1"] if te == "marg" else probs[t][f"p1_{te}"]
                if se == "marg":
                    rhs = probs[s]["p1"]
                else:
                    rhs = 1.0 - probs[s][f"p0_{se}"]
                gap = lhs - rhs
                antecedent = gap > margin if strict else gap >= margin
                value = delta + enter[te] - exit_[se]
                consequent = value > 0
                outcomes.append(
                    RuleOutcome(
                        label=RULE_LABELS[r],
                        pair=(t, s),
                        antecedent=antecedent,
                        antecedent_margin=float(gap),
                        consequent=consequent,
                        consequent_value=float(value),
                        triggered=antecedent and not consequent,
                    )
                )
    return KptReport(
        passed=not any(o.triggered for o in outcomes),
        outcomes=outcomes,
        n_rules=len(outcomes),
    )


@dataclass(frozen=True)
class ManskiReport:
    passed: bool
    comparisons: list   # (t, s, index_ge, prob_ge, consistent)

    @property
    def violations(self) -> list:
        return [c for c in self.comparisons if not c[4]]


def manski_check(theta: ParamPoint, cell: ConditioningCell, ccp: CcpTable) -> ManskiReport:
    """Static ranking screen: index order must match outcome-rate order.

    Only defined without endogenous covariates; a lag column in the table is
    an error.  Ties in the index force ties in the rates.
    """
    probe = next(iter(ccp.mass))[1]
    if probe and len(probe[0]) > 0:
        raise ValueError("ranking screen applies only without endogenous covariates")
    periods = ccp.periods if ccp.periods else cell.periods
    n_per = len(periods)
    z = np.asarray(cell.z_value, dtype=float).reshape(n_per, -1)
    zb = z @ theta.beta_arr
    rate = [ccp.marginal_event(t, lambda v: v == 1) for t in range(n_per)]
    comparisons = []
    for s in range(n_per):
        for t in range(n_per):
            if s == t:
                continue
            index_ge = bool(zb[s] >= zb[t])
            prob_ge = bool(rate[s] >= rate[t])
            comparisons.append((s, t, index_ge, prob_ge, index_ge == prob_ge))
    return ManskiReport(
        passed=all(c[4] for c in comparisons), comparisons=comparisons
    )


@dataclass(frozen=True)
class ScanReport:
    """Verdict-by-verdict comparison of the two restriction systems."""

    gammas: np.ndarray
    ours: np.ndarray           # bool, inequality-check acceptance
    kpt: np.ndarray            # bool, nine-rule acceptance
    boundary: np.ndarray       # bool, within tolerance of either boundary
    disagreements: list        # gamma values with clean verdict splits
    our_restrictions: int      # per cell
    kpt_restrictions: int      # per cell

    @property
    def agreed(self) -> bool:
        return not self.disagreements


def kpt_equivalence_scan(
    gamma_grid,
    beta,
    designs: list,
    boundary_margin: float = 1e-9,
) -> ScanReport:
    """Scan a lag-coefficient grid and compare acceptance verdicts.

    ``designs`` is a list of ``(cell, table)`` pairs with exact CCPs; a
    parameter is accepted by a system when it passes in every cell.  Points
    where either system sits within ``boundary_margin`` of its own decision
    boundary are flagged as tolerance-sensitive instead of counting as
    disagreements.
    """
    gamma_grid = np.asarray(gamma_grid, dtype=float)
    spec = ModelSpec(family="binary")
    expanded = [
        (cell, table, *dataset_from_table(table, cell.z_value))
        for cell, table in designs
    ]
    ours = np.zeros(gamma_grid.size, dtype=bool)
    kpt = np.zeros(gamma_grid.size, dtype=bool)
    boundary = np.zeros(gamma_grid.size, dtype=bool)
    disagreements = []
    n_per = len(expanded[0][0].periods)
    for g_idx, gamma in enumerate(gamma_grid):
        theta = ParamPoint(beta=tuple(np.atleast_1d(beta)), gamma=(float(gamma),))
        ours_ok = True
        kpt_ok = True
        near = False
        for cell, table, data, syn_cell in expanded:
            res = check_inequalities(theta, spec, [syn_cell], data, tol=0.0)
            ours_ok &= res.passed
            near |= abs(res.worst_slack) <= boundary_margin
            rep = kpt_check(theta, cell, table)
            kpt_ok &= rep.passed
            near |= rep.closest_margin <= boundary_margin
        ours[g_idx] = ours_ok
        kpt[g_idx] = kpt_ok
        boundary[g_idx] = near
        if ours_ok != kpt_ok and not near:
            disagreements.append(float(gamma))
    return ScanReport(
        gammas=gamma_grid,
        ours=ours,
        kpt=kpt,
        boundary=boundary,
        disagreements=disagreements,
        our_restrictions=2 * n_per,
        kpt_restrictions=9 * n_per * (n_per - 1),
    )


def restriction_counts(n_periods: int) -> tuple:
    """(ours, nine-rule) restriction counts per cell at a period count."""
    return 2 * n_periods, 9 * n_periods * (n_periods - 1)


def exhaustive_ar1_design(
    beta: float = 1.0,
    gamma: float = 1.5,
    z_cells=((2.5, -2.5), (0.0, 0.3)),
    alphas=((-0.5, 0.35), (0.0, 0.30), (0.5, 0.35)),
    q0=(0.5, 0.98),
) -> list:
    """Exact logistic-mixture populations for lag-covariate binary cells.

    Every cell enumerates all initial-condition and outcome paths, so the
    returned tables are exact populations: two periods, the lagged outcome
    as the only endogenous covariate, a discrete fixed-effect mixture, and
    logistic shocks.  ``q0`` is the initial-condition rate, one value per
    cell or a shared scalar.  Returns ``(cell, table)`` pairs usable by the
    scans.  The default cells bound the lag coefficient from both sides: the
    contrasting-index cell rejects large values, the nearly-flat cell with a
    loaded initial condition rejects the lower half-line.
    """
    q0_per_cell = (
        [float(q0)] * len(z_cells)
        if np.isscalar(q0)
        else [float(q) for q in q0]
    )
    if len(q0_per_cell) != len(z_cells):
        raise ValueError("q0 must be a scalar or one value per cell")
    designs = []
    for z_pair, q0_cell in zip(z_cells, q0_per_cell):
        zpath = np.asarray(z_pair, dtype=float).reshape(-1, 1)
        n_per = zpath.shape[0]
        mass: dict = {}
        for y0 in (0, 1):
            base = q0_cell if y0 else 1.0 - q0_cell
            for a_val, a_wt in alphas:
                for path in np.ndindex(*(2,) * n_per):
                    prob = base * a_wt
                    lag = y0
                    lags = []
                    for t, y_t in enumerate(path):
                        p = expit(zpath[t, 0] * beta + gamma * lag + a_val)
                        prob *= p if y_t else 1.0 - p
                        lags.append((lag,))
                        lag = y_t
                    key = (tuple(int(v) for v in path), tuple(lags))
                    mass[key] = mass.get(key, 0.0) + prob
        table = table_from_population(mass, periods=tuple(range(n_per)))
        cell = ConditioningCell(
            z_value=zpath, periods=tuple(range(n_per)), weights=np.ones(1)
        )
        designs.append((cell, table))
    return designs


def random_ar1_table(rng: np.random.Generator, n_periods: int = 2,
                     concentration: float = 1.0) -> CcpTable:
    """Random coherent cell table over lag-covariate outcome paths.

    Draws a Dirichlet weight for every (initial condition, outcome path)
    combination.  The result is a valid probability table (not necessarily
    generated by any model), which is exactly what the rule-implication
    property needs.
    """
    combos = [
        (y0,) + path
        for y0 in (0, 1)
        for path in np.ndindex(*(2,) * n_periods)
    ]
    probs = rng.dirichlet(np.full(len(combos), concentration))
    mass: dict = {}
    for full_path, p in zip(combos, probs):
        y_path = tuple(int(v) for v in full_path[1:])
        lags = tuple((int(full_path[t]),) for t in range(n_periods))
        key = (y_path, lags)
        mass[key] = mass.get(key, 0.0) + float(p)
    return table_from_population(mass, periods=tuple(range(n_periods)))
