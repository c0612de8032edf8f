"""Panel containers, model descriptions, and conditioning cells.

Everything downstream consumes three objects defined here: a balanced
:class:`PanelDataset`, a :class:`ModelSpec` naming the outcome family, and a
list of :class:`ConditioningCell` carrying per-unit weights (exact 0/1 match
on the covariate path, or Gaussian kernel weights around an evaluation
point).  Bound evaluation never touches raw frames; it sees (dataset, cell)
pairs only.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from itertools import combinations, product

import numpy as np
import pandas as pd

FAMILIES = ("binary", "ordered", "monotone", "multinomial", "censored")
INITIAL_CONDITION_MODES = ("observed-endogenous", "observed-exogenous", "unobserved")


class PanelDataError(ValueError):
    """Raised when input data violate a panel invariant (shape, balance, lag consistency)."""


@dataclass
class PanelDataset:
    """Balanced panel: outcomes, strictly exogenous Z, predetermined X.

    Parameters
    ----------
    y : (n, T) array
        Outcomes.  Integer codes for discrete families, reals for censored.
    z : (n, T, d_z) array
        Strictly exogenous covariates.
    x : (n, T, d_x) array
        Predetermined covariates; ``d_x = 0`` is allowed (shape ``(n, T, 0)``).
    y0 : (n,) array, optional
        Initial outcome, when observed.
    lagged_outcome : int, optional
        Column of ``x`` holding the lagged outcome.  When set, ``x[:, t, j]``
        must equal ``y[:, t-1]`` exactly for t >= 1, and ``x[:, 0, j]`` must
        equal ``y0`` when ``y0`` is given.  When ``y0`` is None the first
        period's lag column is not validated (it may be NaN for
        unobserved-initial-condition designs).
    unit_ids : (n,) array, optional
        Unit labels, defaulting to 0..n-1.
    """

    y: np.ndarray
    z: np.ndarray
    x: np.ndarray | None = None
    y0: np.ndarray | None = None
    lagged_outcome: int | None = None
    unit_ids: np.ndarray | None = None

    def __post_init__(self):
        self.y = np.asarray(self.y)
        if self.y.ndim != 2:
            raise PanelDataError(f"y must be (n, T), got shape {self.y.shape}")
        n, T = self.y.shape
        if T < 2:
            raise PanelDataError(f"at least two periods required, got T={T}")
        self.z = np.asarray(self.z, dtype=float)
        if self.z.ndim == 2:
            self.z = self.z[:, :, None]
        if self.z.shape[:2] != (n, T):
            raise PanelDataError(f"z shape {self.z.shape} does not match y shape {(n, T)}")
        if self.x is None:
            self.x = np.zeros((n, T, 0))
        self.x = np.asarray(self.x, dtype=float)
        if self.x.ndim == 2:
            self.x = self.x[:, :, None]
        if self.x.shape[:2] != (n, T):
            raise PanelDataError(f"x shape {self.x.shape} does not match y shape {(n, T)}")
        if self.y0 is not None:
            self.y0 = np.asarray(self.y0)
            if self.y0.shape != (n,):
                raise PanelDataError(f"y0 must be (n,), got {self.y0.shape}")
        if self.unit_ids is None:
            self.unit_ids = np.arange(n)
        self._check_lag()

    def _check_lag(self):
        j = self.lagged_outcome
        if j is None:
            return
        if not 0 <= j < self.x.shape[2]:
            raise PanelDataError(f"lagged_outcome column {j} out of range for d_x={self.x.shape[2]}")
        for t in range(1, self.n_periods):
            bad = np.nonzero(self.x[:, t, j] != self.y[:, t - 1])[0]
            if bad.size:
                raise PanelDataError(
                    f"x[:, {t}, {j}] must equal y[:, {t - 1}]; first offending unit "
                    f"{self.unit_ids[bad[0]]}"
                )
        if self.y0 is not None:
            bad = np.nonzero(self.x[:, 0, j] != self.y0)[0]
            if bad.size:
                raise PanelDataError(
                    f"x[:, 0, {j}] must equal y0; first offending unit {self.unit_ids[bad[0]]}"
                )

    @property
    def n_units(self) -> int:
        return self.y.shape[0]

    @property
    def n_periods(self) -> int:
        return self.y.shape[1]

    @property
    def d_z(self) -> int:
        return self.z.shape[2]

    @property
    def d_x(self) -> int:
        return self.x.shape[2]

    def index(self, beta: np.ndarray, gamma: np.ndarray) -> np.ndarray:
        """Linear index z'beta + x'gamma, shape (n, T)."""
        beta = np.asarray(beta, dtype=float)
        gamma = np.asarray(gamma, dtype=float)
        out = self.z @ beta
        if self.d_x:
            out = out + self.x @ gamma
        return out


@dataclass
class MultinomialPanel:
    """Panel for the multinomial family: choice-specific covariates.

    ``y`` holds chosen alternatives coded 0..J; ``w`` has shape
    (n, T, J+1, d) stacking each alternative's covariate vector, so index
    differences are ``(w[:, t, j] - w[:, t, k]) @ theta``.
    """

    y: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        self.y = np.asarray(self.y)
        self.w = np.asarray(self.w, dtype=float)
        if self.y.ndim != 2 or self.w.ndim != 4 or self.w.shape[:2] != self.y.shape:
            raise PanelDataError(
                f"need y (n, T) and w (n, T, J+1, d); got {self.y.shape}, {self.w.shape}"
            )
        if self.y.min() < 0 or self.y.max() >= self.n_alternatives:
            raise PanelDataError("choices must be coded 0..J")

    @property
    def n_units(self) -> int:
        return self.y.shape[0]

    @property
    def n_periods(self) -> int:
        return self.y.shape[1]

    @property
    def n_alternatives(self) -> int:
        return self.w.shape[2]


@dataclass(frozen=True)
class ModelSpec:
    """Outcome family plus the structure bound evaluation needs.

    ``thresholds`` are the finite interior cutpoints (b_2..b_J for an
    ordered model with J categories); the two infinite end thresholds are
    implicit.  ``categories`` lists outcome codes in increasing order.
    """

    family: str
    thresholds: tuple = ()
    categories: tuple = ()
    initial_condition: str = "observed-endogenous"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.initial_condition not in INITIAL_CONDITION_MODES:
            raise ValueError(f"unknown initial_condition {self.initial_condition!r}")
        ths = tuple(float(b) for b in self.thresholds)
        if any(b2 < b1 for b1, b2 in zip(ths, ths[1:])):
            raise ValueError(f"thresholds must be nondecreasing, got {ths}")
        object.__setattr__(self, "thresholds", ths)
        cats = tuple(self.categories)
        if self.family == "binary" and not cats:
            cats = (0, 1)
        if self.family in ("ordered", "monotone") and cats and list(cats) != sorted(cats):
            raise ValueError("categories must be increasing")
        if self.family == "ordered" and cats and len(cats) != len(ths) + 1:
            raise ValueError(
                f"{len(cats)} categories need {len(cats) - 1} interior thresholds, got {len(ths)}"
            )
        object.__setattr__(self, "categories", cats)

    @property
    def n_categories(self) -> int:
        return len(self.categories)


@dataclass(frozen=True)
class ParamPoint:
    """Parameter point (beta, gamma); ``pinned`` records the scale normalization.

    ``pinned`` is the beta coordinate whose absolute value is fixed at one;
    None skips the check (useful for raw grid scans).
    """

    beta: tuple
    gamma: tuple = ()
    pinned: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "beta", tuple(float(b) for b in np.atleast_1d(self.beta)))
        object.__setattr__(self, "gamma", tuple(float(g) for g in np.atleast_1d(self.gamma)))
        if self.pinned is not None:
            if not 0 <= self.pinned < len(self.beta):
                raise ValueError(f"pinned index {self.pinned} out of range")
            if abs(abs(self.beta[self.pinned]) - 1.0) > 1e-12:
                raise ValueError(
                    f"normalization requires |beta[{self.pinned}]| = 1, got {self.beta[self.pinned]}"
                )

    @property
    def beta_arr(self) -> np.ndarray:
        return np.asarray(self.beta)

    @property
    def gamma_arr(self) -> np.ndarray:
        return np.asarray(self.gamma)

    @property
    def theta(self) -> np.ndarray:
        return np.concatenate([self.beta_arr, self.gamma_arr])


@dataclass
class ConditioningCell:
    """A conditioning event: covariate path value plus per-unit weights.

    ``periods`` names the periods the stationarity restriction is applied
    to (all periods for path cells, two for pairwise cells).  ``weights``
    are 0/1 for exact matching and nonnegative kernel weights otherwise.
    ``y0`` is set when the cell additionally conditions on the initial
    outcome (exogenous initial-condition mode).
    """

    z_value: np.ndarray
    periods: tuple
    weights: np.ndarray
    kind: str = "exact"  # 'exact' or 'kernel'
    bandwidth: np.ndarray | None = None
    y0: object | None = None

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights))

    @property
    def ess(self) -> float:
        """Kish effective sample size (equals member count for 0/1 weights)."""
        s = float(np.sum(self.weights))
        s2 = float(np.sum(self.weights**2))
        return s * s / s2 if s2 > 0 else 0.0

    def describe(self) -> str:
        ztxt = np.array2string(np.asarray(self.z_value), precision=4, separator=",")
        y0txt = "" if self.y0 is None else f", y0={self.y0}"
        return f"cell(periods={self.periods}, z={ztxt}{y0txt}, {self.kind}, ess={self.ess:.1f})"


def rule_of_thumb_bandwidth(z_flat: np.ndarray) -> np.ndarray:
    """Per-dimension 1.06 * sd * n^(-1/(4+D)) for D-dimensional product kernels.

    The exponent uses the joint dimension D (the one-dimensional 1/5 rule
    when D=1); a fixed per-dimension exponent would starve the product
    kernel of effective mass as D grows.
    """
    n, D = z_flat.shape
    sd = np.std(z_flat, axis=0, ddof=1)
    sd = np.where(sd > 0, sd, 1.0)
    return 1.06 * sd * float(n) ** (-1.0 / (4.0 + D))


def gaussian_weights(z_flat: np.ndarray, point: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Product Gaussian kernel weights exp(-0.5 * ((z - point)/h)^2), unnormalized."""
    u = (z_flat - point[None, :]) / h[None, :]
    return np.exp(-0.5 * np.sum(u * u, axis=1))


def quantile_lattice(z_flat: np.ndarray, levels=(0.1, 0.3, 0.5, 0.7, 0.9),
                     cap: int = 200, seed: int = 0) -> np.ndarray:
    """Marginal-quantile lattice of evaluation points, deterministically subsampled to ``cap``."""
    qs = np.quantile(z_flat, levels, axis=0)  # (L, D)
    axes = [qs[:, d] for d in range(z_flat.shape[1])]
    pts = np.array(list(product(*axes)))
    if len(pts) > cap:
        rng = np.random.default_rng(seed)
        keep = np.sort(rng.choice(len(pts), size=cap, replace=False))
        pts = pts[keep]
    return pts


def build_cells(
    data: PanelDataset,
    scheme: str = "all-period",
    match: str = "exact",
    bandwidth: np.ndarray | float | None = None,
    eval_points: np.ndarray | None = None,
    condition_on_y0: bool = False,
    min_mass: float = 1e-12,
) -> list[ConditioningCell]:
    """Enumerate conditioning cells.

    scheme='all-period' conditions on the full covariate path; 'pairwise'
    builds one cell per unordered period pair and per observed (z_t, z_s)
    value.  match='exact' uses 0/1 weights on identical paths (cells then
    partition the units); 'kernel' places Gaussian weights around each
    evaluation point (default: the observed unique paths, or a quantile
    lattice when ``eval_points`` is given explicitly elsewhere).  Cells with
    total mass below ``min_mass`` are dropped with a warning.
    """
    if scheme not in ("all-period", "pairwise"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if match not in ("exact", "kernel"):
        raise ValueError(f"unknown match {match!r}")
    n, T, dz = data.z.shape

    y0_groups: list[tuple[object, np.ndarray]]
    if condition_on_y0:
        if data.y0 is None:
            raise PanelDataError("condition_on_y0 requires observed y0")
        vals = np.unique(data.y0)
        y0_groups = [(v, (data.y0 == v).astype(float)) for v in vals]
    else:
        y0_groups = [(None, np.ones(n))]

    if scheme == "all-period":
        period_sets = [tuple(range(T))]
    else:
        period_sets = [ts for ts in combinations(range(T), 2)]

    cells: list[ConditioningCell] = []
    for periods in period_sets:
        zp = data.z[:, periods, :].reshape(n, -1)  # (n, |periods|*dz)
        if match == "exact":
            points = np.unique(zp, axis=0)
        elif eval_points is not None:
            points = np.asarray(eval_points, dtype=float).reshape(len(eval_points), -1)
        else:
            points = np.unique(zp, axis=0)

        if match == "kernel":
            if bandwidth is None:
                h = rule_of_thumb_bandwidth(zp)
            else:
                h = np.broadcast_to(np.asarray(bandwidth, dtype=float), (zp.shape[1],)).copy()
        for pt in points:
            if match == "exact":
                base = np.all(zp == pt[None, :], axis=1).astype(float)
            else:
                base = gaussian_weights(zp, pt, h)
            for y0v, y0w in y0_groups:
                w = base * y0w
                mass = float(np.sum(w))
                if mass <= min_mass:
                    warnings.warn(
                        f"dropping empty cell at z={np.array2string(pt, precision=4)}"
                        + ("" if y0v is None else f", y0={y0v}"),
                        stacklevel=2,
                    )
                    continue
                cells.append(
                    ConditioningCell(
                        z_value=pt.reshape(len(periods), dz),
                        periods=periods,
                        weights=w,
                        kind=match,
                        bandwidth=None if match == "exact" else h,
                        y0=y0v,
                    )
                )
    return cells


def load_panel(path) -> PanelDataset:
    """Read a long-format CSV ``id,t,y,z1..zk[,x1..xm][,y0]`` into a PanelDataset.

    Units must be observed in every period (balanced); otherwise this raises
    with the offending unit named.  Rows may appear in any order.
    """
    df = pd.read_csv(path)
    required = {"id", "t", "y"}
    missing = required - set(df.columns)
    if missing:
        raise PanelDataError(f"missing required columns: {sorted(missing)}")
    zcols = sorted((c for c in df.columns if c.startswith("z") and c[1:].isdigit()),
                   key=lambda c: int(c[1:]))
    xcols = sorted((c for c in df.columns if c.startswith("x") and c[1:].isdigit()),
                   key=lambda c: int(c[1:]))
    if not zcols:
        raise PanelDataError("no covariate columns z1.. found")

    periods = np.sort(df["t"].unique())
    units = df["id"].unique()  # first-appearance order
    counts = df.groupby("id")["t"].agg(["count", "nunique"])
    T = len(periods)
    for uid, row in counts.iterrows():
        if row["count"] != T or row["nunique"] != T:
            raise PanelDataError(
                f"unbalanced panel: unit {uid!r} has {row['count']} rows over "
                f"{row['nunique']} distinct periods, expected {T}"
            )

    df = df.set_index(["id", "t"]).sort_index()
    order = pd.MultiIndex.from_product([units, periods], names=["id", "t"])
    df = df.loc[order]
    n = len(units)
    y = df["y"].to_numpy().reshape(n, T)
    z = df[zcols].to_numpy().reshape(n, T, len(zcols))
    x = df[xcols].to_numpy().reshape(n, T, len(xcols)) if xcols else None
    y0 = None
    if "y0" in df.columns:
        y0v = df["y0"].to_numpy().reshape(n, T)
        if not (y0v == y0v[:, :1]).all():
            raise PanelDataError("y0 column must be constant within unit")
        y0 = y0v[:, 0]
    # recover the lagged-outcome marker: an x column equal to y shifted by
    # one period (and to y0 in the first period when y0 is recorded)
    lag = None
    if x is not None:
        for j in range(x.shape[2]):
            if not np.array_equal(x[:, 1:, j], y[:, :-1].astype(x.dtype)):
                continue
            if y0 is not None and not np.array_equal(x[:, 0, j], np.asarray(y0, dtype=x.dtype)):
                continue
            lag = j
            break
    return PanelDataset(y=y, z=z, x=x, y0=y0, lagged_outcome=lag,
                        unit_ids=np.asarray(units))


def save_panel(data: PanelDataset, path) -> None:
    """Inverse of load_panel (deterministic row order: unit-major, period-minor)."""
    n, T = data.y.shape
    rows = {
        "id": np.repeat(data.unit_ids, T),
        "t": np.tile(np.arange(1, T + 1), n),
        "y": data.y.reshape(-1),
    }
    for d in range(data.d_z):
        rows[f"z{d + 1}"] = data.z[:, :, d].reshape(-1)
    for d in range(data.d_x):
        rows[f"x{d + 1}"] = data.x[:, :, d].reshape(-1)
    if data.y0 is not None:
        rows["y0"] = np.repeat(data.y0, T)
    pd.DataFrame(rows).to_csv(path, index=False)
