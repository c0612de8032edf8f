"""Shared builders: exact-count population panels and tiny hand panels."""

from itertools import product

import numpy as np
import pytest

from panelbounds.core import ModelSpec, PanelDataset, ParamPoint


def logistic_cdf(v):
    return 1.0 / (1.0 + np.exp(-np.asarray(v, dtype=float)))


def exact_logit_panel(beta, z_support=(-1.0, 1.0), n_per_cell=4000, T=2) -> PanelDataset:
    """Population panel with unit counts proportional to exact path probabilities.

    Outcomes follow Y_t = 1{z_t'beta + eps_t >= 0} with iid logistic(0, 1)
    shocks and no fixed effect, so P(y path | z path) factors into per-period
    logistic probabilities.  Each covariate path gets ``n_per_cell`` units
    split across outcome paths by rounded exact counts; empirical choice
    frequencies then match the analytic ones to O(1 / n_per_cell).
    """
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    d = beta.size
    y_rows, z_rows = [], []
    for flat in product(z_support, repeat=T * d):
        zp = np.asarray(flat, dtype=float).reshape(T, d)
        lam = logistic_cdf(zp @ beta)
        for ypath in product((0, 1), repeat=T):
            p = np.prod([lam[t] if ypath[t] else 1.0 - lam[t] for t in range(T)])
            count = int(round(n_per_cell * p))
            if count == 0:
                continue
            y_rows.append(np.tile(ypath, (count, 1)))
            z_rows.append(np.tile(zp, (count, 1, 1)))
    return PanelDataset(y=np.concatenate(y_rows), z=np.concatenate(z_rows))


def hand_panel() -> tuple[PanelDataset, ModelSpec]:
    """Six units, two periods, scalar z with two distinct paths; binary y."""
    z = np.array([
        [[1.0], [0.0]],
        [[1.0], [0.0]],
        [[1.0], [0.0]],
        [[-1.0], [2.0]],
        [[-1.0], [2.0]],
        [[-1.0], [2.0]],
    ])
    y = np.array([
        [1, 0],
        [1, 1],
        [0, 0],
        [0, 1],
        [1, 1],
        [0, 0],
    ])
    return PanelDataset(y=y, z=z), ModelSpec(family="binary")


def two_cell_lag_panel(beta=1.0, gamma=-6.0, scale=0.25, m=4000, seed=3) -> PanelDataset:
    """Two covariate cells with deterministic lag paths and strong outcomes.

    Cell A (z = (2, 1), lag path (1, 0)) makes the first-period outcome
    nearly always 0 and the second nearly always 1 when gamma is very
    negative; cell B (z = (0.5, -0.5), lag path (0, 0)) yields a clean
    index-direction signal for the z decrease.  Used by the sign-direction
    tests, where both cells' conclusions must combine into gamma < 0.
    """
    rng = np.random.default_rng(seed)

    def cellrows(z1, z2, x1, x2):
        v = rng.logistic(0.0, scale, size=(m, 2))
        y1 = (beta * z1 + gamma * x1 + v[:, 0] >= 0).astype(int)
        y2 = (beta * z2 + gamma * x2 + v[:, 1] >= 0).astype(int)
        z = np.tile([[z1], [z2]], (m, 1, 1)).reshape(m, 2, 1)
        x = np.tile([[x1], [x2]], (m, 1, 1)).reshape(m, 2, 1)
        return np.column_stack([y1, y2]), z, x

    ya, za, xa = cellrows(2.0, 1.0, 1.0, 0.0)
    yb, zb, xb = cellrows(0.5, -0.5, 0.0, 0.0)
    return PanelDataset(y=np.vstack([ya, yb]), z=np.vstack([za, zb]),
                        x=np.vstack([xa, xb]))


@pytest.fixture(scope="session")
def logit_population() -> tuple[PanelDataset, ModelSpec, ParamPoint]:
    beta = (1.0, 0.7)
    data = exact_logit_panel(beta, z_support=(-1.0, 1.0), n_per_cell=10_000, T=2)
    return data, ModelSpec(family="binary"), ParamPoint(beta=beta, pinned=0)
