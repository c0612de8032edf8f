"""Constructive certificates of set membership for the binary model.

A parameter that survives the inequality checks on a cell is backed by an
explicit latent-threshold distribution: step one builds, for every period,
a conditional distribution of the threshold given each covariate path whose
cell-level aggregate is the same across periods and whose value at the
period index reproduces the observed outcome probability; step two assembles
a joint distribution over threshold tuples with those margins whose implied
outcome-path probabilities match the observed joint table.  A verifier
replays every identity numerically.  Parameters that violate the inequality
system on the construction grid are refused instead of certified.

The continuous-index variant rebuilds the same objects through monotone
inversion of the empirical bound curves, returning diagnostics rather than a
finite certificate.  A final diagnostic probes ordered-outcome models by
binarizing at each outcome level and measuring whether the per-path
constructions are ordered across levels (the aggregate ones always are).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .bounds import binary_bounds, critical_cutoffs, default_tolerance
from .ccp import CcpTable
from .core import ConditioningCell, ModelSpec, PanelDataset, ParamPoint

__all__ = [
    "ConstructionRefused",
    "DiscreteMarginals",
    "JointCertificate",
    "SharpnessReport",
    "ContinuousConstruction",
    "MonotoneOutcomeDiagnostic",
    "construct_marginals_discrete",
    "assemble_joint",
    "verify_certificate",
    "certify",
    "construct_marginals_continuous",
    "monotone_outcome_diagnostic",
]

PASS_RESIDUAL = 1e-10
PASS_NEGATIVITY = -1e-12
_TIE = 1e-12


class ConstructionRefused(RuntimeError):
    """The parameter fails the inequality system on the construction grid.

    ``violations`` lists ``(cutoff, period_low, period_up, gap)`` tuples: at
    that cutoff the period_low lower bound exceeds the period_up upper bound
    by ``gap``.
    """

    def __init__(self, violations: list):
        self.violations = violations
        worst = max(v[3] for v in violations)
        super().__init__(
            f"{len(violations)} inequality violation(s) on the construction "
            f"grid; worst gap {worst:.3e}; no certificate exists"
        )


@dataclass(frozen=True)
class DiscreteMarginals:
    """Per-period conditional threshold CDFs on a finite support.

    ``cdf[t, m, k]`` is the constructed probability that the period-``t``
    threshold is at most ``support[k]`` given covariate path ``m``.  The
    weighted aggregate over paths equals ``target`` for every period, which
    is what makes the construction time-invariant at the cell level.
    """

    theta: ParamPoint
    periods: tuple
    support: np.ndarray      # (K,) cutoffs plus one point past the top
    gap: float               # spacing pad; half the smallest positive spacing
    w_support: list          # M covariate paths (x-path tuples)
    w_weights: np.ndarray    # (M,) path probabilities within the cell
    index: np.ndarray        # (M, T) regression index per path and period
    p_marginal: np.ndarray   # (M, T) P(outcome=1 | path), per period
    cell_rate: np.ndarray    # (T,) P(outcome=1 | cell)
    cdf: np.ndarray          # (T, M, K)
    target: np.ndarray       # (K,) common aggregate CDF


@dataclass(frozen=True)
class JointCertificate:
    """Joint threshold distribution assembled from certified margins.

    ``joint[m]`` is a pmf over threshold tuples, one axis per period, each
    axis indexing ``marginals.support``.  ``cut_index[m, t]`` is the largest
    support position the period-``t`` threshold may occupy while still
    producing outcome one on path ``m``.
    """

    marginals: DiscreteMarginals
    cut_value: np.ndarray    # (M, T) threshold cutover values
    cut_index: np.ndarray    # (M, T) int positions in support
    joint: np.ndarray        # (M, K, ..., K) with T trailing axes


@dataclass(frozen=True)
class SharpnessReport:
    """Numerical replay of every identity a certificate promises."""

    stationarity_residual: float
    ccp_residual: float
    margin_residual: float
    joint_ccp_residual: float
    mass_residual: float
    min_mass: float
    cdf_step_floor: float      # most negative CDF increment observed
    cdf_top_residual: float    # worst |top value - 1|
    passed: bool

    def summary(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return (
            f"{flag} stationarity={self.stationarity_residual:.2e} "
            f"ccp={self.ccp_residual:.2e} margin={self.margin_residual:.2e} "
            f"joint={self.joint_ccp_residual:.2e} mass={self.mass_residual:.2e} "
            f"min_mass={self.min_mass:.2e}"
        )


def _fdot(weights: np.ndarray, values: np.ndarray) -> float:
    """Exactly rounded weighted sum; keeps residual thresholds meaningful."""
    return math.fsum(w * v for w, v in zip(weights.tolist(), values.tolist()))


def _table_arrays(theta: ParamPoint, cell: ConditioningCell, ccp: CcpTable):
    """Extract (paths, weights, index, p_marginal) arrays from a cell table."""
    periods = ccp.periods if ccp.periods else cell.periods
    n_per = len(periods)
    z = np.asarray(cell.z_value, dtype=float).reshape(n_per, -1)
    beta = theta.beta_arr
    gamma = theta.gamma_arr
    paths = ccp.w_support()
    weights = np.array([ccp.p_w(w) for w in paths], dtype=float)
    if weights.sum() <= 0:
        raise ValueError("cell table has no covariate-path mass")
    weights = weights / math.fsum(weights.tolist())
    m_paths = len(paths)
    index = np.empty((m_paths, n_per))
    p_marg = np.empty((m_paths, n_per))
    for m, w_path in enumerate(paths):
        for j, t in enumerate(range(n_per)):
            base = float(z[j] @ beta)
            if w_path:
                base += float(np.asarray(w_path[j], dtype=float) @ gamma)
            index[m, j] = base
            p_marg[m, j] = ccp.p_event_given_w(t, lambda v: v == 1, w_path)
    return list(paths), weights, index, p_marg


def _support_grid(index: np.ndarray):
    """Sorted cutoff grid, its spacing pad, and one extra point past the top."""
    cutoffs = np.unique(index.ravel())
    gaps = np.diff(cutoffs)
    gap = 0.5 * float(gaps.min()) if gaps.size else 1.0
    support = np.append(cutoffs, cutoffs[-1] + gap)
    return support, gap


def construct_marginals_discrete(
    theta: ParamPoint,
    cell: ConditioningCell,
    ccp: CcpTable,
    tol: float = 0.0,
) -> DiscreteMarginals:
    """Build time-invariant per-period threshold CDFs matching all CCPs.

    Works on the finite cutoff grid of realized regression indices.  For each
    grid point the target aggregate level is the largest per-period lower
    bound; each period then hits that level with a two-point convex
    combination of its own step-function envelopes, so the aggregate is the
    same for every period while each conditional CDF still passes through
    the observed outcome probability at its own index.

    Raises :class:`ConstructionRefused` when the parameter violates the
    inequality system on the grid by more than ``tol``.
    """
    paths, weights, index, p_marg = _table_arrays(theta, cell, ccp)
    m_paths, n_per = index.shape
    support, gap = _support_grid(index)
    k_pts = support.size

    # Two-jump step families per (period, path): the low family jumps to its
    # plateau at the path's own index and to one past the period's top index;
    # the high family jumps to its plateau at the period's bottom index and
    # to one just past the path's own index.
    cdf_low = np.empty((n_per, m_paths, k_pts))
    cdf_up = np.empty((n_per, m_paths, k_pts))
    top = index.max(axis=0)      # (T,) highest index per period
    bot = index.min(axis=0)      # (T,) lowest index per period
    s_row = support[None, :]
    for t in range(n_per):
        own = index[:, t][:, None]
        plateau = p_marg[:, t][:, None]
        cdf_low[t] = np.where(
            s_row < own, 0.0, np.where(s_row < top[t] + gap, plateau, 1.0)
        )
        cdf_up[t] = np.where(
            s_row < bot[t], 0.0, np.where(s_row < own + gap, plateau, 1.0)
        )

    # Aggregate step levels and the capped bound levels they realize.
    agg_low = np.empty((n_per, k_pts))
    agg_up = np.empty((n_per, k_pts))
    for t in range(n_per):
        for k in range(k_pts):
            agg_low[t, k] = _fdot(weights, cdf_low[t, :, k])
            agg_up[t, k] = _fdot(weights, cdf_up[t, :, k])
    cell_rate = np.array([_fdot(weights, p_marg[:, t]) for t in range(n_per)])
    level_low = np.minimum(agg_low, cell_rate[:, None])   # lower bound values
    level_up = np.maximum(agg_up, cell_rate[:, None])     # upper bound values

    # Refusal: on the cutoff grid every period's lower bound must sit under
    # every period's upper bound.
    violations = []
    for k in range(k_pts - 1):
        t_lo = int(np.argmax(level_low[:, k]))
        s_up = int(np.argmin(level_up[:, k]))
        shortfall = level_low[t_lo, k] - level_up[s_up, k]
        if shortfall > tol:
            violations.append((float(support[k]), t_lo, s_up, float(shortfall)))
    if violations:
        raise ConstructionRefused(violations)

    target = level_low.max(axis=0)
    target[-1] = 1.0

    cdf = np.empty((n_per, m_paths, k_pts))
    for t in range(n_per):
        cap = int(np.searchsorted(support, top[t]))   # position of the top index
        low_levels = level_low[t, : cap + 1]
        for k in range(k_pts):
            goal = target[k]
            if goal > cell_rate[t]:
                # Ride the high family: bracket the goal between adjacent
                # aggregate levels and mix the two step functions.
                hi = int(np.searchsorted(level_up[t], goal, side="left"))
                lo = hi - 1
                span = level_up[t, hi] - level_up[t, lo]
                alpha = 1.0 if span <= 0 else (level_up[t, hi] - goal) / span
                cdf[t, :, k] = (
                    alpha * cdf_up[t, :, lo] + (1.0 - alpha) * cdf_up[t, :, hi]
                )
            else:
                # Ride the low family, restricted to grid points at or below
                # the period's top index where its aggregate equals the bound.
                pos = int(np.searchsorted(low_levels, goal, side="right"))
                if pos > cap:
                    cdf[t, :, k] = cdf_low[t, :, cap]
                else:
                    span = low_levels[pos] - low_levels[pos - 1]
                    alpha = 1.0 if span <= 0 else (low_levels[pos] - goal) / span
                    cdf[t, :, k] = (
                        alpha * cdf_low[t, :, pos - 1]
                        + (1.0 - alpha) * cdf_low[t, :, pos]
                    )

    return DiscreteMarginals(
        theta=theta,
        periods=tuple(ccp.periods),
        support=support,
        gap=gap,
        w_support=paths,
        w_weights=weights,
        index=index,
        p_marginal=p_marg,
        cell_rate=cell_rate,
        cdf=cdf,
        target=target,
    )


def assemble_joint(
    marginals: DiscreteMarginals,
    ccp: CcpTable,
    max_cells: int = 1_000_000,
) -> JointCertificate:
    """Couple the per-period margins into a joint threshold distribution.

    Each outcome path receives the product of its periods' threshold masses,
    rescaled so the block total equals the observed path probability; the
    rescaling cancels in every per-period margin.  Threshold positions at or
    below the cutover index produce outcome one in that period.
    """
    support = marginals.support
    k_pts = support.size
    m_paths, n_per = marginals.index.shape
    if k_pts**n_per > max_cells:
        raise ValueError(
            f"joint support would hold {k_pts**n_per} cells (> {max_cells})"
        )

    cut_index = np.empty((m_paths, n_per), dtype=int)
    cut_value = np.empty((m_paths, n_per))
    pmf = np.diff(marginals.cdf, axis=2, prepend=0.0)   # (T, M, K)
    for m in range(m_paths):
        for t in range(n_per):
            at_own = int(np.searchsorted(support, marginals.index[m, t]))
            level = marginals.cdf[t, m, at_own]
            same = np.nonzero(np.abs(marginals.cdf[t, m] - level) <= _TIE)[0]
            kstar = int(same[same >= at_own].max()) if same.size else at_own
            cut_index[m, t] = kstar
            cut_value[m, t] = support[kstar]

    joint = np.zeros((m_paths,) + (k_pts,) * n_per)
    for m in range(m_paths):
        w_path = marginals.w_support[m]
        outer = pmf[0, m]
        for t in range(1, n_per):
            outer = np.multiply.outer(outer, pmf[t, m])
        for y_path in np.ndindex(*(2,) * n_per):
            prob = ccp.p_y_given_w(tuple(int(v) for v in y_path), w_path)
            denom = 1.0
            for t, y_t in enumerate(y_path):
                p_t = marginals.p_marginal[m, t]
                denom *= p_t if y_t else 1.0 - p_t
            scale = 0.0 if denom <= 0 else prob / denom
            block = tuple(
                slice(0, cut_index[m, t] + 1) if y_t else slice(cut_index[m, t] + 1, k_pts)
                for t, y_t in enumerate(y_path)
            )
            joint[m][block] = outer[block] * scale

    return JointCertificate(
        marginals=marginals, cut_value=cut_value, cut_index=cut_index, joint=joint
    )


def verify_certificate(
    cert: JointCertificate,
    ccp: CcpTable,
    residual_tol: float = PASS_RESIDUAL,
    negativity_tol: float = PASS_NEGATIVITY,
) -> SharpnessReport:
    """Replay every identity the certificate asserts and report residuals.

    Checks, per covariate path: the CDF axioms of each margin, equality of
    the aggregate margins across periods, the outcome probability at each
    path's own index, the per-period margins of the joint mass, the implied
    outcome-path probabilities against the observed table, nonnegativity,
    and total mass one.
    """
    marg = cert.marginals
    support = marg.support
    k_pts = support.size
    m_paths, n_per = marg.index.shape
    weights = marg.w_weights

    steps = np.diff(marg.cdf, axis=2)
    cdf_step_floor = float(steps.min()) if steps.size else 0.0
    cdf_top_residual = float(np.abs(marg.cdf[:, :, -1] - 1.0).max())

    agg = np.empty((n_per, k_pts))
    for t in range(n_per):
        for k in range(k_pts):
            agg[t, k] = _fdot(weights, marg.cdf[t, :, k])
    stationarity = float(np.max(agg.max(axis=0) - agg.min(axis=0)))

    ccp_residual = 0.0
    for m in range(m_paths):
        for t in range(n_per):
            at_own = int(np.searchsorted(support, marg.index[m, t]))
            err = abs(marg.cdf[t, m, at_own] - marg.p_marginal[m, t])
            ccp_residual = max(ccp_residual, float(err))

    pmf = np.diff(marg.cdf, axis=2, prepend=0.0)
    margin_residual = 0.0
    mass_residual = 0.0
    joint_ccp_residual = 0.0
    min_mass = float(cert.joint.min()) if cert.joint.size else 0.0
    for m in range(m_paths):
        block = cert.joint[m]
        mass_residual = max(mass_residual, abs(math.fsum(block.ravel().tolist()) - 1.0))
        for t in range(n_per):
            axes = tuple(a for a in range(n_per) if a != t)
            got = block.sum(axis=axes)
            margin_residual = max(
                margin_residual, float(np.abs(got - pmf[t, m]).max())
            )
        w_path = marg.w_support[m]
        for y_path in np.ndindex(*(2,) * n_per):
            sl = tuple(
                slice(0, cert.cut_index[m, t] + 1)
                if y_t
                else slice(cert.cut_index[m, t] + 1, k_pts)
                for t, y_t in enumerate(y_path)
            )
            got = math.fsum(block[sl].ravel().tolist())
            want = ccp.p_y_given_w(tuple(int(v) for v in y_path), w_path)
            joint_ccp_residual = max(joint_ccp_residual, abs(got - want))

    passed = (
        stationarity <= residual_tol
        and ccp_residual <= residual_tol
        and margin_residual <= residual_tol
        and joint_ccp_residual <= residual_tol
        and mass_residual <= residual_tol
        and min_mass >= negativity_tol
        and cdf_step_floor >= negativity_tol
        and cdf_top_residual <= residual_tol
    )
    return SharpnessReport(
        stationarity_residual=stationarity,
        ccp_residual=ccp_residual,
        margin_residual=margin_residual,
        joint_ccp_residual=joint_ccp_residual,
        mass_residual=mass_residual,
        min_mass=min_mass,
        cdf_step_floor=cdf_step_floor,
        cdf_top_residual=cdf_top_residual,
        passed=passed,
    )


def certify(
    theta: ParamPoint,
    cell: ConditioningCell,
    ccp: CcpTable,
    tol: float = 0.0,
) -> tuple[JointCertificate, SharpnessReport]:
    """Construct, assemble, and verify in one call."""
    marginals = construct_marginals_discrete(theta, cell, ccp, tol=tol)
    cert = assemble_joint(marginals, ccp)
    return cert, verify_certificate(cert, ccp)


# ---------------------------------------------------------------------------
# Continuous-index variant
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContinuousConstruction:
    """Inversion-based analogue of the finite construction.

    Stores the knot grid, the per-period inversion points ``psi`` mapping
    each knot to the location where that period's bound curve meets the
    common target level, and diagnostics: the worst aggregate mismatch at
    the knots, the measure of near-contact between the target and each upper
    curve, whether any empirical curve needed monotonizing, and how many
    cell units an oracle flagged as having degenerate outcome probability.
    """

    theta: ParamPoint
    knots: np.ndarray          # (K,)
    target: np.ndarray         # (K,) common aggregate level
    cell_rate: np.ndarray      # (T,)
    psi: np.ndarray            # (T, K) inversion points
    rides_upper: np.ndarray    # (T, K) bool, True where the high curve is used
    gap: float
    aggregate_residual: float
    contact_measure: np.ndarray   # (T,) Lebesgue measure of near-contact set
    contact_fraction: np.ndarray  # (T,)
    monotonized: np.ndarray       # (T, 2) bool flags for (lower, upper) curves
    degenerate_paths: int | None
    index_range: np.ndarray       # (T, 2) realized index min/max per period

    def conditional_cdf(self, t: int, c, p_w: float, index_w: float) -> np.ndarray:
        """Evaluate the constructed CDF for one covariate path.

        ``p_w`` is the path's outcome probability in period ``t`` and
        ``index_w`` its regression index.  Inversion points are interpolated
        between knots.
        """
        c = np.atleast_1d(np.asarray(c, dtype=float))
        psi = np.interp(c, self.knots, self.psi[t])
        upper = np.interp(c, self.knots, self.rides_upper[t].astype(float)) > 0.5
        lo, hi = self.index_range[t]
        out = np.empty_like(psi)
        shifted = psi + self.gap
        out[upper] = np.where(
            shifted[upper] >= index_w, 1.0, np.where(shifted[upper] >= lo, p_w, 0.0)
        )
        out[~upper] = np.where(
            psi[~upper] >= hi + self.gap,
            1.0,
            np.where(psi[~upper] >= index_w, p_w, 0.0),
        )
        return out


def _strict_inverse(levels: np.ndarray, knots: np.ndarray):
    """Left-continuous inverse of a nondecreasing step record, as arrays."""
    keep = np.empty(levels.size, dtype=bool)
    keep[0] = True
    keep[1:] = np.diff(levels) > 0
    return levels[keep], knots[keep]


def construct_marginals_continuous(
    theta: ParamPoint,
    spec: ModelSpec,
    cell: ConditioningCell,
    data: PanelDataset,
    grid: np.ndarray | None = None,
    tol: float | None = None,
    contact_tol: float = 1e-6,
    ccp_oracle=None,
) -> ContinuousConstruction:
    """Monotone-inversion construction for continuously distributed indices.

    Empirical bound curves are evaluated on a knot grid; each period reaches
    the common target level by sliding along its own curve to the inversion
    point.  Near-flat or non-monotone empirical segments are monotonized
    with a warning, and the measure of the set where the target touches an
    upper curve is reported, since inversion is ill-posed there.

    ``ccp_oracle(t, w_row) -> probability`` is optional; when supplied, the
    number of cell units with degenerate (zero or one) outcome probability
    is reported and such paths should be excluded by the caller.
    """
    if spec.family != "binary":
        raise ValueError("continuous construction covers the binary family")
    if grid is None:
        grid = critical_cutoffs(theta, spec, cell, data).values
    knots = np.unique(np.asarray(grid, dtype=float))
    if tol is None:
        tol = default_tolerance(data.y.shape[0], cell)

    low, up = binary_bounds(theta, spec, cell, data, knots)   # (T, K) each
    n_per = low.shape[0]
    live = cell.weights > 0
    total = float(cell.weights[live].sum())
    periods = list(cell.periods)
    y_cell = data.y[:, periods]
    cell_rate = np.array(
        [float(cell.weights[live] @ (y_cell[live, t] == 1)) / total for t in range(n_per)]
    )

    monotonized = np.zeros((n_per, 2), dtype=bool)
    for t in range(n_per):
        if np.any(np.diff(low[t]) < 0):
            monotonized[t, 0] = True
            low[t] = np.maximum.accumulate(low[t])
        if np.any(np.diff(up[t]) < 0):
            monotonized[t, 1] = True
            up[t] = np.maximum.accumulate(up[t])
    if monotonized.any():
        warnings.warn(
            "non-monotone empirical bound curve(s) projected to nondecreasing",
            RuntimeWarning,
            stacklevel=2,
        )

    target = low.max(axis=0)
    violations = []
    for k in range(knots.size):
        s_up = int(np.argmin(up[:, k]))
        t_lo = int(np.argmax(low[:, k]))
        shortfall = target[k] - up[s_up, k]
        if shortfall > tol:
            violations.append((float(knots[k]), t_lo, s_up, float(shortfall)))
    if violations:
        raise ConstructionRefused(violations)

    idx = data.index(theta.beta_arr, theta.gamma_arr)[:, periods]
    index_range = np.stack(
        [
            np.array([idx[live, t].min(), idx[live, t].max()])
            for t in range(n_per)
        ]
    )
    gaps = np.diff(knots)
    gap = 0.5 * float(gaps[gaps > 0].min()) if np.any(gaps > 0) else 1.0

    psi = np.empty((n_per, knots.size))
    rides_upper = np.empty((n_per, knots.size), dtype=bool)
    residual = 0.0
    for t in range(n_per):
        lo_lv, lo_kn = _strict_inverse(low[t], knots)
        up_lv, up_kn = _strict_inverse(up[t], knots)
        use_up = target >= cell_rate[t]
        rides_upper[t] = use_up
        psi[t] = np.where(
            use_up,
            np.interp(target, up_lv, up_kn),
            np.interp(target, lo_lv, lo_kn),
        )
        back = np.where(
            use_up,
            np.interp(psi[t], up_kn, up_lv),
            np.interp(psi[t], lo_kn, lo_lv),
        )
        # Levels outside the empirical range cannot be matched by inversion;
        # they sit past the curve ends and are clipped, so exclude the ends
        # from the mismatch measure but keep the worst interior deviation.
        interior = (target > low[t].min()) & (target < up[t].max())
        if interior.any():
            residual = max(residual, float(np.abs(back - target)[interior].max()))

    span = knots[-1] - knots[0] if knots.size > 1 else 1.0
    widths = np.empty(knots.size)
    if knots.size > 1:
        widths[0] = gaps[0] / 2
        widths[-1] = gaps[-1] / 2
        widths[1:-1] = (gaps[:-1] + gaps[1:]) / 2
    else:
        widths[0] = 1.0
    contact = np.array(
        [
            float(widths[np.abs(target - up[t]) < contact_tol].sum())
            for t in range(n_per)
        ]
    )

    degenerate = None
    if ccp_oracle is not None:
        count = 0
        rows = np.nonzero(live)[0]
        for t in range(n_per):
            for i in rows:
                p = float(ccp_oracle(t, data, int(i)))
                if p <= 0.0 or p >= 1.0:
                    count += 1
        degenerate = count

    return ContinuousConstruction(
        theta=theta,
        knots=knots,
        target=target,
        cell_rate=cell_rate,
        psi=psi,
        rides_upper=rides_upper,
        gap=gap,
        aggregate_residual=residual,
        contact_measure=contact,
        contact_fraction=contact / span,
        monotonized=monotonized,
        degenerate_paths=degenerate,
        index_range=index_range,
    )


# ---------------------------------------------------------------------------
# Ordered-outcome monotonicity diagnostic
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MonotoneOutcomeDiagnostic:
    """Cross-level ordering of per-level constructions, with no claim.

    Binarizing an ordered outcome at each level produces one construction
    per level over the same cutoff grid.  Aggregate CDFs are ordered across
    levels automatically; whether the per-path CDFs are is an open question,
    so this only measures it.  ``max_violation`` is the largest amount by
    which a higher level's CDF exceeds a lower level's anywhere.
    """

    levels: tuple
    refused_levels: tuple
    per_path_monotone: bool
    max_violation: float
    aggregate_monotone: bool
    aggregate_violation: float


def _binarize(ccp: CcpTable, level: float) -> CcpTable:
    mass: dict = {}
    for (y_path, w_path), m in ccp.mass.items():
        key = (tuple(int(v >= level) for v in y_path), w_path)
        mass[key] = mass.get(key, 0.0) + m
    return CcpTable(mass=mass, periods=ccp.periods)


def monotone_outcome_diagnostic(
    theta: ParamPoint,
    cell: ConditioningCell,
    ccp: CcpTable,
    levels: list | None = None,
    ordering_tol: float = 1e-10,
    tol: float = 0.0,
) -> MonotoneOutcomeDiagnostic:
    """Construct per-level certificates and measure cross-level ordering."""
    values = sorted({v for y_path in ccp.y_support() for v in y_path})
    if levels is None:
        levels = values[1:]    # the lowest level is reached trivially
    built: dict = {}
    refused = []
    for level in levels:
        try:
            built[level] = construct_marginals_discrete(
                theta, cell, _binarize(ccp, level), tol=tol
            )
        except ConstructionRefused:
            refused.append(level)

    ok_levels = [lv for lv in levels if lv in built]
    max_violation = 0.0
    agg_violation = 0.0
    for lo_lv, hi_lv in zip(ok_levels, ok_levels[1:]):
        lo, hi = built[lo_lv], built[hi_lv]
        # Reaching a higher level is harder, so its CDF must sit weakly lower.
        max_violation = max(max_violation, float((hi.cdf - lo.cdf).max()))
        agg_violation = max(agg_violation, float((hi.target - lo.target).max()))

    return MonotoneOutcomeDiagnostic(
        levels=tuple(levels),
        refused_levels=tuple(refused),
        per_path_monotone=max_violation <= ordering_tol,
        max_violation=max_violation,
        aggregate_monotone=agg_violation <= ordering_tol,
        aggregate_violation=agg_violation,
    )
