"""Seeded simulators for the benchmark designs.

Every design draws each primitive variable from its own counter-based
stream (Philox keyed off a spawned SeedSequence child), filling arrays
unit-major.  Two consequences the tests rely on: the same seed reproduces
the same dataset bit for bit, and enlarging n extends the draws (the first
n0 units of an n1 > n0 run coincide with the n0 run).

Latent variables (fixed effects, shocks, latent outcomes) are dropped from
production output and returned separately when ``debug=True``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ModelSpec, PanelDataError, PanelDataset, ParamPoint

DESIGNS = (
    "static-ordered-2p",
    "dynamic-ordered-3p",
    "dynamic-binary-B6-discrete",
    "dynamic-binary-B6-continuous",
    "custom-binary-ARp",
    "static-binary-logit",
)


@dataclass
class DgpConfig:
    """Design name plus every knob a simulator reads.

    ``sigma_z`` is the covariate standard deviation, ``rho`` the shock
    correlation across periods, ``rho_alpha`` the fixed-effect loading on
    mean covariates (used by the binary designs).  ``error_dist`` selects
    'normal' (unit variance, mixed to correlation rho) or 'logistic-2'
    (iid, location 0 scale 2) shocks where a design leaves the choice open.
    """

    design: str
    n: int
    theta_true: ParamPoint
    seed: int
    sigma_z: float = 1.0
    rho: float = 0.0
    rho_alpha: float = 0.1
    thresholds: tuple = (-1.0, 1.0)
    y0_probs: tuple = (0.6, 0.2, 0.2)
    n_periods: int = 2
    z_support: tuple | None = None
    d_z: int = 1
    error_dist: str = "normal"
    b_draws: int = 2000

    def __post_init__(self):
        if self.design not in DESIGNS:
            raise ValueError(f"unknown design {self.design!r}; expected one of {DESIGNS}")
        if self.n < 1:
            raise ValueError("n >= 1 required")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [-1, 1], got {self.rho}")
        if not -1.0 <= self.rho_alpha <= 1.0:
            raise ValueError(f"rho_alpha must lie in [-1, 1], got {self.rho_alpha}")
        if self.sigma_z <= 0:
            raise ValueError("sigma_z > 0 required")
        if self.error_dist not in ("normal", "logistic-2"):
            raise ValueError(f"unknown error_dist {self.error_dist!r}")


@dataclass
class SimulationResult:
    data: PanelDataset
    spec: ModelSpec
    config: DgpConfig
    latents: dict | None = None


# Fixed stream names; spawn order must never change or seeds stop reproducing.
_STREAMS = ("z", "alpha", "eps", "y0", "eta", "extra")


def _generators(seed: int) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(len(_STREAMS))
    return {name: np.random.Generator(np.random.Philox(c))
            for name, c in zip(_STREAMS, children)}


def _equicorrelated_cholesky(T: int, var: float, rho: float) -> np.ndarray:
    cov = var * ((1 - rho) * np.eye(T) + rho * np.ones((T, T)))
    return np.linalg.cholesky(cov)


def _discretize(ystar: np.ndarray, thresholds: tuple) -> np.ndarray:
    """Category codes 1..J via y = j iff b_j < ystar <= b_{j+1} (b_1=-inf)."""
    y = np.ones(ystar.shape, dtype=int)
    for b in thresholds:
        y += (ystar > b).astype(int)
    return y


def simulate_static_ordered(cfg: DgpConfig, debug: bool = False) -> SimulationResult:
    """Two periods, two exogenous covariates, three-category outcome.

    Z ~ N(0, sigma_z^2) iid over (unit, period, dim); the fixed effect is
    the deterministic average alpha = sum_t (Z1 + Z2) / (4 sigma_z T);
    shocks are standard normal with cross-period correlation rho; the
    latent outcome Z'beta + alpha + eps is cut at the thresholds.
    """
    if cfg.design != "static-ordered-2p":
        raise ValueError(f"wrong design {cfg.design!r} for simulate_static_ordered")
    gen = _generators(cfg.seed)
    n, T = cfg.n, 2
    z = gen["z"].normal(0.0, cfg.sigma_z, size=(n, T, 2))
    alpha = z.sum(axis=(1, 2)) / (4.0 * cfg.sigma_z * T)
    chol = _equicorrelated_cholesky(T, 1.0, cfg.rho)
    eps = gen["eps"].standard_normal((n, T)) @ chol.T
    ystar = z @ cfg.theta_true.beta_arr + alpha[:, None] + eps
    y = _discretize(ystar, cfg.thresholds)
    data = PanelDataset(y=y, z=z)
    spec = ModelSpec(family="ordered", thresholds=cfg.thresholds, categories=(1, 2, 3))
    latents = {"alpha": alpha, "eps": eps, "ystar": ystar} if debug else None
    return SimulationResult(data=data, spec=spec, config=cfg, latents=latents)


def simulate_dynamic_ordered(cfg: DgpConfig, debug: bool = False) -> SimulationResult:
    """Three periods, scalar exogenous covariate, lagged ordered outcome.

    Shocks have variance 0.5 and cross-period correlation rho; the fixed
    effect is sum_t Z_t / (4 sigma_z T); the initial outcome is drawn from
    ``y0_probs`` over {1,2,3} independently of everything else.
    """
    if cfg.design != "dynamic-ordered-3p":
        raise ValueError(f"wrong design {cfg.design!r} for simulate_dynamic_ordered")
    gen = _generators(cfg.seed)
    n, T = cfg.n, 3
    z = gen["z"].normal(0.0, cfg.sigma_z, size=(n, T, 1))
    alpha = z.sum(axis=(1, 2)) / (4.0 * cfg.sigma_z * T)
    chol = _equicorrelated_cholesky(T, 0.5, cfg.rho)
    eps = gen["eps"].standard_normal((n, T)) @ chol.T
    cum = np.cumsum(cfg.y0_probs)
    if abs(cum[-1] - 1.0) > 1e-12:
        raise ValueError(f"y0_probs must sum to 1, got {cum[-1]}")
    y0 = 1 + np.searchsorted(cum, gen["y0"].random(n), side="left").astype(int)
    y0 = np.minimum(y0, len(cum))
    beta = float(cfg.theta_true.beta_arr[0])
    gamma = float(cfg.theta_true.gamma_arr[0])
    y = np.empty((n, T), dtype=int)
    x = np.empty((n, T, 1))
    ystar = np.empty((n, T))
    prev = y0
    for t in range(T):
        x[:, t, 0] = prev
        ystar[:, t] = z[:, t, 0] * beta + gamma * prev + alpha + eps[:, t]
        y[:, t] = _discretize(ystar[:, t], cfg.thresholds)
        prev = y[:, t]
    data = PanelDataset(y=y, z=z, x=x, y0=y0, lagged_outcome=0)
    spec = ModelSpec(family="ordered", thresholds=cfg.thresholds, categories=(1, 2, 3))
    latents = {"alpha": alpha, "eps": eps, "ystar": ystar} if debug else None
    return SimulationResult(data=data, spec=spec, config=cfg, latents=latents)


def simulate_custom_binary_arp(cfg: DgpConfig, debug: bool = False) -> SimulationResult:
    """Binary outcome with p lags: Y_t = 1{z'beta + sum_j gamma_j Y_{t-j} + alpha + eps_t >= 0}.

    The lag order is len(theta_true.gamma); presample outcomes are iid
    Bernoulli(0.5).  Z is iid uniform over ``z_support`` when given, else
    N(0, sigma_z^2).  alpha = rho_alpha * mean(z) + sqrt(1-rho_alpha^2) * xi.
    """
    if cfg.design != "custom-binary-ARp":
        raise ValueError(f"wrong design {cfg.design!r} for simulate_custom_binary_arp")
    gen = _generators(cfg.seed)
    n, T = cfg.n, cfg.n_periods
    p = len(cfg.theta_true.gamma)
    if p < 1:
        raise ValueError("custom-binary-ARp needs at least one lag coefficient")
    if cfg.z_support is not None:
        z = gen["z"].choice(np.asarray(cfg.z_support, dtype=float), size=(n, T, cfg.d_z))
    else:
        z = gen["z"].normal(0.0, cfg.sigma_z, size=(n, T, cfg.d_z))
    xi = gen["alpha"].standard_normal(n)
    alpha = cfg.rho_alpha * z.mean(axis=(1, 2)) + np.sqrt(1.0 - cfg.rho_alpha**2) * xi
    if cfg.error_dist == "logistic-2":
        eps = gen["eps"].logistic(0.0, 2.0, size=(n, T))
    else:
        chol = _equicorrelated_cholesky(T, 1.0, cfg.rho)
        eps = gen["eps"].standard_normal((n, T)) @ chol.T
    pres = (gen["y0"].random((n, p)) < 0.5).astype(int)  # pres[:, -1] is the lag-1 value
    beta = cfg.theta_true.beta_arr
    gamma = cfg.theta_true.gamma_arr
    y = np.empty((n, T), dtype=int)
    x = np.empty((n, T, p))
    ystar = np.empty((n, T))
    hist = pres.copy()
    for t in range(T):
        for j in range(p):
            x[:, t, j] = hist[:, -1 - j]
        ystar[:, t] = z[:, t, :] @ beta + x[:, t, :] @ gamma + alpha + eps[:, t]
        y[:, t] = (ystar[:, t] >= 0).astype(int)
        hist = np.column_stack([hist[:, 1:], y[:, t]]) if p > 1 else y[:, t:t + 1].copy()
    data = PanelDataset(y=y, z=z, x=x, y0=pres[:, -1], lagged_outcome=0)
    spec = ModelSpec(family="binary")
    latents = {"alpha": alpha, "eps": eps, "ystar": ystar} if debug else None
    return SimulationResult(data=data, spec=spec, config=cfg, latents=latents)


def simulate_static_binary_logit(cfg: DgpConfig, debug: bool = False) -> SimulationResult:
    """Binary outcome with iid logistic shocks and no fixed effect.

    Y_t = 1{z_t'beta + eps_t >= 0} with eps iid logistic(0, 1), so the
    period-t choice probability given any covariate path is exactly the
    logistic CDF of z_t'beta: a closed-form benchmark for probability
    bounds.  Z is drawn uniformly from ``z_support`` (default {-1, 0, 1})
    so every path recurs with positive probability.
    """
    if cfg.design != "static-binary-logit":
        raise ValueError(f"wrong design {cfg.design!r} for simulate_static_binary_logit")
    gen = _generators(cfg.seed)
    n, T = cfg.n, cfg.n_periods
    support = np.asarray(cfg.z_support if cfg.z_support is not None else (-1.0, 0.0, 1.0),
                         dtype=float)
    z = gen["z"].choice(support, size=(n, T, cfg.d_z))
    eps = gen["eps"].logistic(0.0, 1.0, size=(n, T))
    ystar = z @ cfg.theta_true.beta_arr + eps
    y = (ystar >= 0).astype(int)
    data = PanelDataset(y=y, z=z)
    spec = ModelSpec(family="binary")
    latents = {"eps": eps, "ystar": ystar} if debug else None
    return SimulationResult(data=data, spec=spec, config=cfg, latents=latents)


@dataclass
class B6Primitives:
    """Raw draws reused across (c, z) evaluations (common random numbers)."""

    xi: np.ndarray      # (B,) standard normal, fixed-effect noise
    eps: np.ndarray     # (B, T) logistic location 0 scale 2
    u0: np.ndarray      # (B,) uniform, initial outcome
    eta: np.ndarray     # (B, T) uniform(-1, 1), continuous-design covariate noise
    design: str
    rho_alpha: float


@dataclass
class B6Draws:
    y: np.ndarray       # (..., B, T)
    x: np.ndarray       # (..., B, T)
    z: np.ndarray       # (..., T)
    alpha: np.ndarray   # (..., B)


def b6_primitives(cfg: DgpConfig, n_periods: int = 2) -> B6Primitives:
    if cfg.design not in ("dynamic-binary-B6-discrete", "dynamic-binary-B6-continuous"):
        raise ValueError(f"wrong design {cfg.design!r} for the per-z binary simulator")
    gen = _generators(cfg.seed)
    B, T = cfg.b_draws, n_periods
    if B < 1:
        raise ValueError("b_draws >= 1 required")
    return B6Primitives(
        xi=gen["alpha"].standard_normal(B),
        eps=gen["eps"].logistic(0.0, 2.0, size=(B, T)),
        u0=gen["y0"].random(B),
        eta=gen["eta"].uniform(-1.0, 1.0, size=(B, T)),
        design=cfg.design,
        rho_alpha=cfg.rho_alpha,
    )


def b6_outcomes(prim: B6Primitives, z: np.ndarray, gamma: float) -> B6Draws:
    """Outcome paths at exogenous path(s) z, holding the primitives fixed.

    z may be (T,) or (R, T) for R candidate paths; entries must lie in
    [-10, 10].  Y_t = 1{z_t + gamma * X_t + alpha + eps_t >= 0} with
    X_t = Y_{t-1} (discrete design) or 5(2(Y_{t-1} - 0.5) + eta_t)
    (continuous design); alpha = rho_alpha * mean(z) + sqrt(1 - rho_alpha^2) * xi.
    """
    z = np.asarray(z, dtype=float)
    squeeze = z.ndim == 1
    if squeeze:
        z = z[None, :]
    if np.any(np.abs(z) > 10.0):
        raise PanelDataError("z outside [-10, 10]^T")
    R, T = z.shape
    B = prim.xi.shape[0]
    if prim.eps.shape[1] < T:
        raise ValueError(f"primitives drawn for {prim.eps.shape[1]} periods, need {T}")
    alpha = prim.rho_alpha * z.mean(axis=1)[:, None] \
        + np.sqrt(1.0 - prim.rho_alpha**2) * prim.xi[None, :]   # (R, B)
    y = np.empty((R, B, T), dtype=np.int8)
    x = np.empty((R, B, T))
    prev = np.broadcast_to((prim.u0 < 0.5).astype(np.int8), (R, B))
    for t in range(T):
        if prim.design == "dynamic-binary-B6-discrete":
            x[:, :, t] = prev
        else:
            x[:, :, t] = 5.0 * (2.0 * (prev - 0.5) + prim.eta[None, :, t])
        ystar = z[:, None, t] + gamma * x[:, :, t] + alpha + prim.eps[None, :, t]
        y[:, :, t] = ystar >= 0
        prev = y[:, :, t]
    if squeeze:
        return B6Draws(y=y[0], x=x[0], z=z[0], alpha=alpha[0])
    return B6Draws(y=y, x=x, z=z, alpha=alpha)


def simulate_b6_binary(cfg: DgpConfig, z: np.ndarray, n_periods: int | None = None) -> B6Draws:
    """B draws of (Y, X) conditional on the exogenous path z."""
    z = np.asarray(z, dtype=float)
    T = z.shape[-1] if n_periods is None else n_periods
    prim = b6_primitives(cfg, n_periods=T)
    gamma = float(cfg.theta_true.gamma_arr[0])
    return b6_outcomes(prim, z, gamma)


def simulate(cfg: DgpConfig, debug: bool = False) -> SimulationResult:
    """Dispatch to the design's simulator (panel designs only; B6 is per-z)."""
    if cfg.design == "static-ordered-2p":
        return simulate_static_ordered(cfg, debug=debug)
    if cfg.design == "dynamic-ordered-3p":
        return simulate_dynamic_ordered(cfg, debug=debug)
    if cfg.design == "custom-binary-ARp":
        return simulate_custom_binary_arp(cfg, debug=debug)
    if cfg.design == "static-binary-logit":
        return simulate_static_binary_logit(cfg, debug=debug)
    raise ValueError(f"design {cfg.design!r} simulates per-z draws; use simulate_b6_binary")
