"""Counterfactual choice-probability bounds and sign diagnostics.

Two consumers of an estimated parameter set for the binary family:

* :func:`cf_bounds` brackets the probability that the outcome would be
  one if a unit's covariate path were switched from ``w`` to ``w_tilde``
  while its latent heterogeneity kept the distribution it has given
  ``W = w``.  Because the defining events compare two deterministic
  index values per candidate parameter, each side collapses to either
  the observed choice frequency at ``w`` or the trivial bound: the lower
  bound is informative exactly when every accepted parameter moves the
  period-``t`` index weakly up, the upper bound exactly when every
  accepted parameter moves it weakly down.

* :func:`sign_diagnostics` scans two-period cells with discrete
  predetermined covariates for frequency comparisons that pin down the
  sign of the exogenous-index change and, by intersection, the sign of
  each predetermined-covariate coefficient.  Conclusions are emitted
  only when the comparison clears a standard-error margin, so noise
  cannot manufacture a sign.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .bounds import check_inequalities
from .core import ConditioningCell, ModelSpec, PanelDataError, PanelDataset, ParamPoint

__all__ = [
    "CfBound",
    "CellSigns",
    "SignDiagnostics",
    "SignWitness",
    "accepted_theta_grid",
    "cf_bounds",
    "sign_diagnostics",
]

# reported with every diagnostic: the step from per-cell index-sign
# conclusions to a point-identified coefficient direction additionally
# needs the covariate-difference support to be rich (unbounded along one
# coordinate), which no finite sample can confirm or refute
SUPPORT_PREMISE = (
    "unbounded-support premise assumed, not testable from data: sign "
    "conclusions hold for the realized covariate differences; extending "
    "them to the full coefficient vector needs rich support of those "
    "differences"
)


# ---------------------------------------------------------------------------
# accepted parameter grid


def accepted_theta_grid(thetas, spec: ModelSpec, cells, data: PanelDataset,
                        tol: float | None = None) -> list:
    """Parameter points whose identifying inequalities all pass.

    Convenience wrapper: runs the inequality check at each candidate and
    keeps the accepted ones.  The returned list is what
    :func:`cf_bounds` expects as ``theta_set``.
    """
    return [theta for theta in thetas
            if check_inequalities(theta, spec, cells, data, tol=tol).passed]


# ---------------------------------------------------------------------------
# counterfactual bounds


@dataclass
class CfBound:
    """Probability bracket for an outcome under a covariate switch.

    ``lower``/``upper`` bound the probability that the period-``t``
    outcome would be one under path ``w_tilde`` for units whose factual
    path is ``w``.  ``n_theta`` records the size of the parameter-set
    discretization; a coarse set can make the infimum defining each side
    looser than the true one, so the resolution travels with the bound.
    """

    w: tuple
    w_tilde: tuple
    t: int
    lower: float
    upper: float
    theta_set: list
    p_hat: float
    n_matched: int
    n_theta: int

    def __post_init__(self):
        if not (-1e-12 <= self.lower <= self.upper <= 1.0 + 1e-12):
            raise ValueError(f"bounds out of order: [{self.lower}, {self.upper}]")

    def contains(self, p: float) -> bool:
        return self.lower - 1e-12 <= p <= self.upper + 1e-12

    def summary(self) -> str:
        return (f"P(outcome=1 at t={self.t} under switched path) in "
                f"[{self.lower:.4f}, {self.upper:.4f}]  "
                f"(freq at factual path {self.p_hat:.4f} over {self.n_matched} units, "
                f"{self.n_theta} accepted parameters)")


def _as_path(w, data: PanelDataset) -> tuple:
    """Normalize a covariate path to (z_path (T, d_z), x_path (T, d_x))."""
    T, d_z, d_x = data.n_periods, data.d_z, data.d_x
    if isinstance(w, tuple) and len(w) == 2:
        z_path, x_path = w
    else:
        z_path, x_path = w, np.zeros((T, 0))
    z_path = np.asarray(z_path, dtype=float).reshape(T, d_z)
    x_path = np.asarray(x_path, dtype=float).reshape(T, d_x)
    return z_path, x_path


def _path_index(z_path: np.ndarray, x_path: np.ndarray, theta: ParamPoint,
                t: int) -> float:
    val = float(z_path[t] @ theta.beta_arr)
    if x_path.shape[1]:
        val += float(x_path[t] @ theta.gamma_arr)
    return val


def cf_bounds(w, w_tilde, t: int, theta_set, data: PanelDataset,
              spec: ModelSpec) -> CfBound:
    """Bounds on the switched-path outcome probability at period ``t``.

    ``w`` and ``w_tilde`` are covariate paths, either ``(z_path, x_path)``
    tuples or a bare z path when the panel has no predetermined
    covariates.  Units matching ``w`` exactly supply the outcome
    frequency; a path no unit realizes is an error.  ``theta_set`` is the
    accepted parameter discretization (see :func:`accepted_theta_grid`).
    """
    if spec.family != "binary":
        raise ValueError(f"binary family required, got {spec.family!r}")
    theta_set = list(theta_set)
    if not theta_set:
        raise ValueError("theta_set is empty; bounds need at least one accepted parameter")
    if not 0 <= t < data.n_periods:
        raise ValueError(f"period {t} outside 0..{data.n_periods - 1}")
    z_path, x_path = _as_path(w, data)
    zt_path, xt_path = _as_path(w_tilde, data)

    match = np.all(data.z == z_path[None], axis=(1, 2))
    if data.d_x:
        match &= np.all(data.x == x_path[None], axis=(1, 2))
    n_matched = int(match.sum())
    if n_matched == 0:
        raise PanelDataError("factual path w is never realized in the data")
    p_hat = float((data.y[match, t] == 1).mean())

    # per candidate parameter, the joint event {outcome, index comparison}
    # has probability p_hat or 1 - p_hat when the (deterministic)
    # comparison holds and zero otherwise; the bounds are infima over the set
    lo_terms = []
    up_terms = []
    for theta in theta_set:
        fact = _path_index(z_path, x_path, theta, t)
        cf = _path_index(zt_path, xt_path, theta, t)
        lo_terms.append(p_hat if fact <= cf else 0.0)
        up_terms.append((1.0 - p_hat) if fact >= cf else 0.0)
    lower = min(lo_terms)
    upper = 1.0 - min(up_terms)
    return CfBound(
        w=(z_path, x_path), w_tilde=(zt_path, xt_path), t=t,
        lower=lower, upper=upper, theta_set=theta_set,
        p_hat=p_hat, n_matched=n_matched, n_theta=len(theta_set),
    )


# ---------------------------------------------------------------------------
# sign diagnostics


@dataclass(frozen=True)
class SignWitness:
    """One frequency comparison that cleared the margin.

    ``kind`` records which of the four comparisons fired; ``x_first`` and
    ``x_second`` are the predetermined-covariate values entering the
    period-one and period-two events; ``gap`` is the estimated amount by
    which the comparison holds and ``se`` its standard error.
    """

    kind: str
    x_first: tuple
    x_second: tuple
    coord: int | None
    gap: float
    se: float


@dataclass
class CellSigns:
    """Memberships and witnesses for one two-period covariate cell.

    ``index_up`` means the cell's frequencies force the exogenous-index
    change (second period minus first) to be positive; ``index_down``
    negative.  ``feedback_below[j]`` collects witness pairs forcing
    (x_first^j - x_second^j) * coef_j below the index change, and
    ``feedback_above[j]`` above it.
    """

    cell: ConditioningCell
    dz: np.ndarray
    index_up: bool
    index_down: bool
    feedback_below: dict = field(default_factory=dict)
    feedback_above: dict = field(default_factory=dict)
    witnesses: list = field(default_factory=list)


@dataclass
class SignDiagnostics:
    """Sign conclusions assembled across cells.

    ``index_signs`` holds one entry per cell with a strict conclusion on
    the sign of the exogenous-index change (dz, '+'/'-'/'conflicting').
    ``gamma_signs`` maps predetermined-covariate coordinates to '+', '-'
    or 'conflicting'; coordinates with no evidence are absent.  The
    untestable support premise is carried verbatim in
    ``support_premise``.
    """

    cells: list
    index_signs: list
    gamma_signs: dict
    margin: float
    support_premise: str = SUPPORT_PREMISE

    def summary(self) -> str:
        lines = [f"{len(self.cells)} cells scanned, margin {self.margin} SE"]
        for entry in self.index_signs:
            dz = np.array2string(entry['dz'], precision=3, separator=",")
            lines.append(f"  index change at dz={dz}: sign {entry['sign']}")
        for j, sign in sorted(self.gamma_signs.items()):
            lines.append(f"  predetermined coefficient {j}: sign {sign}")
        if not self.index_signs and not self.gamma_signs:
            lines.append("  no strict comparisons; no conclusions")
        lines.append(f"  note: {self.support_premise}")
        return "\n".join(lines)


def _same_direction(a: np.ndarray, b: np.ndarray, tol: float = 1e-9) -> bool:
    """True when a and b are positive multiples of each other."""
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return False
    return float(a @ b) / (na * nb) >= 1.0 - tol


def _weighted_gap(cell: ConditioningCell, ind_first: np.ndarray,
                  ind_second: np.ndarray) -> tuple:
    """Estimate P(first event) + P(second event) - 1 with its standard error.

    The two events live on the same units, so the per-unit sum keeps
    their dependence in the variance; the error uses the cell's
    effective sample size (exact count for 0/1 weights).
    """
    s = ind_first.astype(float) + ind_second.astype(float)
    w = cell.weights
    total = float(w.sum())
    mean = float(w @ s) / total
    var = float(w @ (s - mean) ** 2) / total
    ess = cell.ess
    se = float(np.sqrt(var / ess)) if ess > 0 else np.inf
    return mean - 1.0, se


def _x_support(data: PanelDataset, cell: ConditioningCell,
               max_levels: int = 64) -> np.ndarray:
    """Distinct predetermined-covariate values realized in the cell."""
    live = cell.weights > 0
    rows = data.x[live][:, list(cell.periods), :].reshape(-1, data.d_x)
    support = np.unique(rows, axis=0)
    if len(support) > max_levels:
        raise PanelDataError(
            f"{len(support)} distinct predetermined-covariate values; "
            f"sign diagnostics need discrete support (<= {max_levels})"
        )
    return support


def sign_diagnostics(data: PanelDataset, cells, margin: float = 2.0,
                     max_levels: int = 64) -> SignDiagnostics:
    """Scan two-period cells for sign-identifying frequency comparisons.

    Within each cell (a covariate-path value with weights), let
    p(y, x; s) be the weighted frequency of {outcome_s = y,
    predetermined_s = x}.  Four comparisons are evaluated, each required
    to hold by more than ``margin`` standard errors:

    * p(0, x; first) + p(1, x; second) > 1  =>  index change positive
    * p(1, x; first) + p(0, x; second) > 1  =>  index change negative
    * p(0, x1; first) + p(1, x2; second) > 1 with x1, x2 differing only
      in coordinate j  =>  (x1^j - x2^j) coef_j < index change
    * p(1, x1; first) + p(0, x2; second) > 1, same pattern
      =>  (x1^j - x2^j) coef_j > index change

    A feedback witness signs coef_j once the sign of its cell's index
    change is known.  One cell cannot certify both (its four events pair
    into two disjoint unions, capping the frequency sum), but the index
    change depends on the covariate paths only through their difference,
    so a sign established in any cell transfers to every cell whose
    difference is a positive multiple of it.  Outcomes must be coded 0/1.
    """
    if not set(np.unique(data.y)) <= {0, 1}:
        raise PanelDataError("sign diagnostics need binary outcomes coded 0/1")
    if data.d_x == 0:
        raise PanelDataError("sign diagnostics need at least one predetermined covariate")
    out_cells = []
    index_signs = []
    gamma_evidence: dict[int, set] = {}
    for cell in cells:
        if len(cell.periods) != 2:
            raise PanelDataError(
                f"sign diagnostics are a two-period scan; cell has periods {cell.periods}"
            )
        s1, s2 = cell.periods
        z_path = np.asarray(cell.z_value, dtype=float).reshape(2, -1)
        dz = z_path[1] - z_path[0]
        support = _x_support(data, cell, max_levels=max_levels)
        y = data.y
        x = data.x

        def x_match(s, xval):
            return np.all(x[:, s, :] == xval[None, :], axis=1)

        witnesses = []
        index_up = index_down = False
        feedback_below: dict[int, list] = {}
        feedback_above: dict[int, list] = {}

        for xval in support:
            gap, se = _weighted_gap(cell, (y[:, s1] == 0) & x_match(s1, xval),
                                    (y[:, s2] == 1) & x_match(s2, xval))
            if gap > margin * se:
                index_up = True
                witnesses.append(SignWitness("index-up", tuple(xval), tuple(xval),
                                             None, gap, se))
            gap, se = _weighted_gap(cell, (y[:, s1] == 1) & x_match(s1, xval),
                                    (y[:, s2] == 0) & x_match(s2, xval))
            if gap > margin * se:
                index_down = True
                witnesses.append(SignWitness("index-down", tuple(xval), tuple(xval),
                                             None, gap, se))

        for xa, xb in combinations(support, 2):
            diff = np.nonzero(xa != xb)[0]
            if diff.size != 1:
                continue
            j = int(diff[0])
            for x1, x2 in ((xa, xb), (xb, xa)):
                gap, se = _weighted_gap(cell, (y[:, s1] == 0) & x_match(s1, x1),
                                        (y[:, s2] == 1) & x_match(s2, x2))
                if gap > margin * se:
                    wit = SignWitness("feedback-below", tuple(x1), tuple(x2), j, gap, se)
                    feedback_below.setdefault(j, []).append(wit)
                    witnesses.append(wit)
                gap, se = _weighted_gap(cell, (y[:, s1] == 1) & x_match(s1, x1),
                                        (y[:, s2] == 0) & x_match(s2, x2))
                if gap > margin * se:
                    wit = SignWitness("feedback-above", tuple(x1), tuple(x2), j, gap, se)
                    feedback_above.setdefault(j, []).append(wit)
                    witnesses.append(wit)

        cs = CellSigns(cell=cell, dz=dz, index_up=index_up, index_down=index_down,
                       feedback_below=feedback_below, feedback_above=feedback_above,
                       witnesses=witnesses)
        out_cells.append(cs)

        if index_up or index_down:
            sign = "conflicting" if (index_up and index_down) else ("+" if index_up else "-")
            index_signs.append({"cell": cell.describe(), "dz": dz, "sign": sign})

    # index-change signs are functions of the path difference alone, so a
    # one-sided conclusion covers every positively proportional difference
    evidence = [(np.asarray(e["dz"], dtype=float), e["sign"])
                for e in index_signs if e["sign"] != "conflicting"]

    def direction_sign(dz):
        signs = {s for ev_dz, s in evidence if _same_direction(ev_dz, dz)}
        return signs.pop() if len(signs) == 1 else None

    for cs in out_cells:
        known = direction_sign(cs.dz)
        # a below-witness caps (x1^j - x2^j) coef_j by a negative index
        # change; an above-witness floors it by a positive one
        if known == "-":
            for j, wits in cs.feedback_below.items():
                for wit in wits:
                    dxj = wit.x_first[j] - wit.x_second[j]
                    gamma_evidence.setdefault(j, set()).add("-" if dxj > 0 else "+")
        elif known == "+":
            for j, wits in cs.feedback_above.items():
                for wit in wits:
                    dxj = wit.x_first[j] - wit.x_second[j]
                    gamma_evidence.setdefault(j, set()).add("+" if dxj > 0 else "-")

    gamma_signs = {j: (signs.pop() if len(signs) == 1 else "conflicting")
                   for j, signs in gamma_evidence.items()}
    return SignDiagnostics(cells=out_cells, index_signs=index_signs,
                           gamma_signs=gamma_signs, margin=margin)
