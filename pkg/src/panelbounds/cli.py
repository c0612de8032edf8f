"""Configuration-driven command line for reproducible runs.

Nine subcommands tie the library together: ``simulate``, ``bounds``,
``idset``, ``sharpcheck``, ``reconcile``, ``infer``, ``cf``, ``signs``
and ``mc-table``.  Every run writes its artifacts plus a ``manifest.json``
echoing the fully resolved configuration and seed; re-running a command
with the same configuration reproduces the artifacts byte for byte.  A
failed run leaves a ``FAILED.json`` marker next to any partial output.

Options resolve in three layers: built-in defaults, then a ``--config``
JSON file (keys are option names with underscores), then explicit flags.
Stochastic commands (simulate, idset, infer, mc-table) require ``--seed``.

BLAS parallelism honors the ``PANELBOUNDS_THREADS`` environment variable
(default: all cores); it must be set before heavy imports, which is why
this module imports the numeric stack lazily.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

THREAD_ENV = "PANELBOUNDS_THREADS"

DESIGN_ALIASES = {
    "static-ordered": "static-ordered-2p",
    "dynamic-ordered": "dynamic-ordered-3p",
    "b6-discrete": "dynamic-binary-B6-discrete",
    "b6-continuous": "dynamic-binary-B6-continuous",
    "binary-arp": "custom-binary-ARp",
    "binary-logit": "static-binary-logit",
}

# per-design fallback parameters used when --beta/--gamma are not given
DESIGN_THETA = {
    "static-ordered-2p": ((1.0, 1.0), ()),
    "dynamic-ordered-3p": ((1.0,), (1.0,)),
    "dynamic-binary-B6-discrete": ((), (10.0,)),
    "dynamic-binary-B6-continuous": ((), (1.0,)),
    "custom-binary-ARp": ((1.0,), (0.5,)),
    "static-binary-logit": ((1.0,), ()),
}


class ConfigError(ValueError):
    """A configuration field failed validation; message names the field."""


# ---------------------------------------------------------------------------
# option plumbing


def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in str(text).split(",") if v != "")
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats, got {text!r}") from e


def _grid(text: str) -> list:
    """Inclusive numeric grid 'min:max:step' or comma-separated values."""
    s = str(text)
    if ":" in s:
        parts = s.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(f"expected 'min:max:step', got {text!r}")
        lo, hi, step = (float(p) for p in parts)
        if step <= 0 or hi < lo:
            raise argparse.ArgumentTypeError(f"need max >= min and step > 0 in {text!r}")
        out, k = [], 0
        while True:
            v = round(lo + k * step, 10)
            if v > hi + 1e-9:
                return out
            out.append(v)
            k += 1
    return [float(v) for v in s.split(",") if v != ""]


def _json_value(text: str):
    s = str(text)
    p = Path(s)
    if p.suffix == ".json" and p.exists():
        return json.loads(p.read_text())
    try:
        return json.loads(s)
    except json.JSONDecodeError as e:
        raise argparse.ArgumentTypeError(f"expected JSON or a .json file path, got {text!r}") from e


# every option: name -> (converter, default, help); converters are also
# applied to values arriving through --config
_COMMON_DATA = {
    "data": (str, None, "long CSV panel (id,t,y,z1..[,x1..][,y0])"),
    "design": (str, None, "simulation design name (aliases allowed)"),
    "n": (int, 2000, "units to simulate"),
    "sigma_z": (float, 1.0, "covariate standard deviation"),
    "rho": (float, 0.0, "cross-period shock correlation"),
    "rho_alpha": (float, 0.1, "fixed-effect loading on mean covariates"),
    "n_periods": (int, 2, "simulated periods (designs with a free T)"),
    "d_z": (int, 1, "exogenous covariate dimension (designs with a free d_z)"),
    "z_support": (_floats, None, "discrete covariate support for designs that take one"),
    "error_dist": (str, "normal", "shock distribution where the design leaves it open"),
    "beta": (_floats, None, "exogenous-index coefficients"),
    "gamma": (_floats, None, "predetermined-covariate coefficients"),
    "pinned": (int, 0, "beta coordinate normalized to +-1 (-1: none)"),
    "family": (str, None, "outcome family for --data input"),
    "thresholds": (_floats, (-1.0, 1.0), "interior cutpoints for ordered/censored"),
    "categories": (_floats, None, "outcome codes, increasing"),
}

_SPEC = {
    "simulate": {
        **_COMMON_DATA,
        "seed": (int, None, "RNG seed (required)"),
    },
    "bounds": {
        **_COMMON_DATA,
        "seed": (int, 0, "seed when simulating input data"),
        "scheme": (str, "all-period", "cell scheme: all-period or pairwise"),
        "match": (str, "exact", "cell matching: exact or kernel"),
        "tol": (float, None, "violation allowance (default: size-adaptive)"),
        "cutoffs": (_floats, None, "explicit cutoff grid (default: critical cutoffs)"),
    },
    "idset": {
        "design": (str, "b6-discrete", "b6-discrete or b6-continuous"),
        "seed": (int, None, "RNG seed (required)"),
        "gamma_true": (float, None, "data-generating lag coefficient"),
        "gamma_grid": (_grid, _grid("-20:20:1"), "membership grid"),
        "b_draws": (int, 2000, "simulation draws behind the criterion"),
        "restarts": (int, 10, "annealing restart chains"),
        "steps": (int, 50000, "annealing objective evaluations per chain"),
        "n_periods": (int, 3, "panel length for the criterion"),
    },
    "sharpcheck": {
        **_COMMON_DATA,
        "seed": (int, 0, "seed when simulating input data"),
        "tol": (float, 0.0, "slack forgiven during construction"),
    },
    "reconcile": {
        "gamma_grid": (_grid, _grid("-2:2:0.1"), "lag-coefficient scan grid"),
        "beta": (_floats, (1.0,), "normalized exogenous coefficient"),
    },
    "infer": {
        **_COMMON_DATA,
        "seed": (int, None, "RNG seed (required)"),
        "free": (str, None, "free coordinate: beta2 or gamma (default per design)"),
        "grid": (_grid, None, "inversion grid for the free coordinate"),
        "test": (float, None, "single value to test instead of a grid"),
        "n_boot": (int, 299, "multiplier bootstrap draws"),
        "level": (float, 0.95, "confidence level"),
        "conditioning": (str, "pairwise", "moment conditioning: pairwise or path"),
        "points_per_dim": (int, None, "evaluation lattice density (default per design)"),
        "undersmooth": (float, None, "bandwidth shrink factor (default per design)"),
        "min_ess": (float, None, "drop evaluation points below this effective n"),
    },
    "cf": {
        **_COMMON_DATA,
        "seed": (int, 0, "seed when simulating input data"),
        "w": (_json_value, None, "factual covariate path (JSON or .json file)"),
        "w_tilde": (_json_value, None, "counterfactual covariate path"),
        "t": (int, 0, "period of the counterfactual outcome"),
        "theta_set": (_json_value, None, "accepted parameters: list of {beta, gamma, pinned}"),
        "candidates": (_json_value, None, "candidate parameters to filter by the inequality check"),
    },
    "signs": {
        **_COMMON_DATA,
        "seed": (int, 0, "seed when simulating input data"),
        "margin": (float, 2.0, "standard-error multiple a comparison must clear"),
    },
    "mc-table": {
        "design": (str, None, "static-ordered or dynamic-ordered"),
        "seed": (int, None, "RNG seed (required)"),
        "n": (int, 2000, "units per replication"),
        "sigma_z": (float, 1.0, "covariate standard deviation"),
        "rho": (float, 0.25, "cross-period shock correlation"),
        "reps": (int, 50, "Monte Carlo replications"),
        "n_boot": (int, 299, "multiplier bootstrap draws"),
        "level": (float, 0.95, "confidence level"),
        "grid": (_grid, None, "inversion grid (default per design)"),
        "null": (float, 0.0, "null value whose rejection rate is the power column"),
        "points_per_dim": (int, None, "evaluation lattice density (default per design)"),
        "undersmooth": (float, None, "bandwidth shrink factor (default per design)"),
        "min_ess": (float, None, "drop evaluation points below this effective n"),
        "progress": (bool, False, "print one line per replication"),
    },
}

_STOCHASTIC = ("simulate", "idset", "infer", "mc-table")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="panelbounds",
        description="bounds, identified sets, and bootstrap inference for nonlinear panels",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd, options in _SPEC.items():
        p = sub.add_parser(cmd, help=f"run {cmd}")
        p.add_argument("--config", type=str, default=None,
                       help="JSON file of option values (flags override)")
        p.add_argument("--out", type=str, default=None,
                       help=f"output directory (default pb-{cmd})")
        for name, (conv, _default, help_text) in options.items():
            flag = "--" + name.replace("_", "-")
            if conv is bool:
                p.add_argument(flag, dest=name, action="store_const", const=True,
                               default=None, help=help_text)
            else:
                p.add_argument(flag, dest=name, type=conv, default=None, help=help_text)
    return parser


def _resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, config file, and flags; validate every field."""
    cmd = args.command
    options = _SPEC[cmd]
    resolved = {name: default for name, (_c, default, _h) in options.items()}
    if args.config is not None:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except FileNotFoundError as e:
            raise ConfigError(f"config file {args.config!r} not found") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {args.config!r}: invalid JSON ({e})") from e
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {args.config!r}: expected a JSON object")
        for key, value in loaded.items():
            name = str(key).replace("-", "_")
            if name == "out":
                resolved["out"] = str(value)
                continue
            if name not in options:
                raise ConfigError(f"config field {key!r}: unknown for command {cmd!r}")
            conv = options[name][0]
            try:
                resolved[name] = value if value is None else (
                    bool(value) if conv is bool else conv(value))
            except (argparse.ArgumentTypeError, ValueError) as e:
                raise ConfigError(f"config field {key!r}: {e}") from e
    for name in options:
        flag_value = getattr(args, name)
        if flag_value is not None:
            resolved[name] = flag_value
    if args.out is not None:
        resolved["out"] = args.out
    resolved.setdefault("out", f"pb-{cmd}")
    if cmd in _STOCHASTIC and resolved.get("seed") is None:
        raise ConfigError(f"config field 'seed': required for the stochastic command {cmd!r}")
    resolved["command"] = cmd
    return resolved


# ---------------------------------------------------------------------------
# serialization helpers


def _jsonable(obj):
    import numpy as np

    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (tuple, set)):
        return list(obj)
    if hasattr(obj, "__dict__"):
        return {k: v for k, v in vars(obj).items() if not k.startswith("_")}
    raise TypeError(f"not JSON-serializable: {type(obj)!r}")


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _write_manifest(outdir: Path, config: dict, artifacts: list) -> None:
    from . import __version__

    _dump_json(outdir / "manifest.json", {
        "command": config["command"],
        "config": {k: v for k, v in config.items() if k != "command"},
        "artifacts": sorted(artifacts),
        "package_version": __version__,
    })


# ---------------------------------------------------------------------------
# shared input assembly


def _canonical_design(name: str | None) -> str | None:
    if name is None:
        return None
    return DESIGN_ALIASES.get(name, name)


def _theta(cfg: dict, design: str | None):
    from .core import ParamPoint

    beta, gamma = cfg.get("beta"), cfg.get("gamma")
    if beta is None and gamma is None and design in DESIGN_THETA:
        beta, gamma = DESIGN_THETA[design]
    if beta is None:
        raise ConfigError("config field 'beta': required (no design default applies)")
    pinned = cfg.get("pinned", 0)
    pinned = None if pinned is not None and pinned < 0 else pinned
    return ParamPoint(beta=tuple(beta), gamma=tuple(gamma or ()), pinned=pinned)


def _spec_from_cfg(cfg: dict):
    from .core import ModelSpec

    family = cfg.get("family")
    if family is None:
        raise ConfigError("config field 'family': required with --data input")
    cats = cfg.get("categories")
    return ModelSpec(
        family=family,
        thresholds=tuple(cfg.get("thresholds") or ()) if family in ("ordered", "censored") else (),
        categories=tuple(int(c) for c in cats) if cats else (),
    )


def _input_panel(cfg: dict):
    """(data, spec, theta, design) from --data or --design options."""
    from .core import load_panel
    from .dgp import DgpConfig, simulate

    design = _canonical_design(cfg.get("design"))
    if cfg.get("data"):
        data = load_panel(cfg["data"])
        spec = _spec_from_cfg(cfg)
        return data, spec, _theta(cfg, None), None
    if design is None:
        raise ConfigError("config field 'data'/'design': one of the two is required")
    theta = _theta(cfg, design)
    # these designs draw z with one column per beta coordinate
    d_z = (len(theta.beta) if design in ("static-binary-logit", "custom-binary-ARp")
           else cfg["d_z"])
    sim = simulate(DgpConfig(
        design=design, n=cfg["n"], theta_true=theta, seed=cfg["seed"],
        sigma_z=cfg["sigma_z"], rho=cfg["rho"], rho_alpha=cfg["rho_alpha"],
        thresholds=tuple(cfg.get("thresholds") or (-1.0, 1.0)),
        n_periods=cfg["n_periods"], d_z=d_z,
        z_support=tuple(cfg["z_support"]) if cfg.get("z_support") else None,
        error_dist=cfg["error_dist"],
    ))
    return sim.data, sim.spec, theta, design


def _parse_path(value, T: int):
    """JSON path spec -> (z_path, x_path) or bare z path."""
    if isinstance(value, dict):
        z = value.get("z")
        if z is None:
            raise ConfigError("config field 'w': object form needs a 'z' entry")
        return (z, value.get("x")) if value.get("x") is not None else z
    return value


def _parampoint_list(value):
    from .core import ParamPoint

    if not isinstance(value, list) or not value:
        raise ConfigError("config field 'theta_set': expected a nonempty JSON list")
    out = []
    for k, item in enumerate(value):
        if not isinstance(item, dict) or "beta" not in item:
            raise ConfigError(f"config field 'theta_set': entry {k} needs a 'beta' list")
        out.append(ParamPoint(beta=tuple(item["beta"]),
                              gamma=tuple(item.get("gamma", ())),
                              pinned=item.get("pinned")))
    return out


# ---------------------------------------------------------------------------
# subcommand runners (each returns the artifact names it wrote)


def _run_simulate(cfg: dict, outdir: Path) -> list:
    from .core import save_panel

    data, spec, theta, design = _input_panel(cfg)
    if design is None:
        raise ConfigError("config field 'design': simulate requires a design, not --data")
    save_panel(data, outdir / "panel.csv")
    _dump_json(outdir / "spec.json", {
        "family": spec.family, "thresholds": spec.thresholds,
        "categories": spec.categories, "theta_true": {
            "beta": theta.beta, "gamma": theta.gamma, "pinned": theta.pinned},
        "n_units": data.n_units, "n_periods": data.n_periods,
        "d_z": data.d_z, "d_x": data.d_x,
    })
    return ["panel.csv", "spec.json"]


def _run_bounds(cfg: dict, outdir: Path) -> list:
    import pandas as pd

    from .bounds import check_inequalities
    from .core import build_cells

    data, spec, theta, _ = _input_panel(cfg)
    cells = build_cells(data, scheme=cfg["scheme"], match=cfg["match"])
    result = check_inequalities(theta, spec, cells, data,
                                grid=cfg.get("cutoffs"), tol=cfg.get("tol"))
    rows = []
    for prof in result.profiles:
        slack = prof.slack
        for j, label in enumerate(prof.labels):
            rows.append({"cell": prof.cell.describe(), "cutoff": str(label),
                         "slack": float(slack[j])})
    pd.DataFrame(rows).to_csv(outdir / "bounds.csv", index=False)
    _dump_json(outdir / "check.json", {
        "passed": result.passed, "worst_slack": result.worst_slack,
        "n_cells": len(result.profiles), "violations": result.violations,
    })
    return ["bounds.csv", "check.json"]


def _run_idset(cfg: dict, outdir: Path) -> list:
    import pandas as pd

    from .core import ParamPoint
    from .dgp import DgpConfig
    from .idset import AnnealConfig, map_identified_set, membership_interval

    design = _canonical_design(cfg["design"])
    if design not in ("dynamic-binary-B6-discrete", "dynamic-binary-B6-continuous"):
        raise ConfigError(f"config field 'design': idset expects b6-discrete or "
                          f"b6-continuous, got {cfg['design']!r}")
    gamma_true = cfg.get("gamma_true")
    if gamma_true is None:
        gamma_true = 10.0 if design.endswith("discrete") else 1.0
    dgp = DgpConfig(design=design, n=1, seed=cfg["seed"], b_draws=cfg["b_draws"],
                    theta_true=ParamPoint(beta=(), gamma=(float(gamma_true),)))
    anneal = AnnealConfig(restarts=cfg["restarts"], steps=cfg["steps"], seed=cfg["seed"])
    result = map_identified_set(cfg["gamma_grid"], dgp, anneal=anneal,
                                n_periods=cfg["n_periods"])
    df = pd.DataFrame({
        "gamma": result.gammas, "q_star": result.q_values,
        "tolerance": result.metadata["tolerance"],
        "in_set": result.membership, "argmax_c": result.argmax_c,
    })
    for t in range(result.argmax_z.shape[1]):
        df[f"argmax_z{t + 1}"] = result.argmax_z[:, t]
    df.to_csv(outdir / "qstar.csv", index=False)
    lo, hi = membership_interval(result)
    _dump_json(outdir / "idset.json", {
        "design": design, "gamma_true": gamma_true,
        "accepted_interval": [lo, hi],
        "n_accepted": int(result.membership.sum()),
        "metadata": result.metadata,
    })
    return ["qstar.csv", "idset.json"]


def _run_sharpcheck(cfg: dict, outdir: Path) -> list:
    from .ccp import joint_path_probs
    from .core import build_cells
    from .sharpness import ConstructionRefused, certify

    data, spec, theta, _ = _input_panel(cfg)
    if spec.family != "binary":
        raise ConfigError("config field 'family': sharpcheck certifies the binary family")
    cells = build_cells(data, scheme="all-period", match="exact")
    reports = []
    all_pass = True
    for cell in cells:
        table = joint_path_probs(cell, data)
        try:
            _cert, report = certify(theta, cell, table, tol=cfg["tol"])
            reports.append({"cell": cell.describe(), "passed": report.passed,
                            "report": report})
            all_pass &= report.passed
        except ConstructionRefused as e:
            reports.append({"cell": cell.describe(), "passed": False,
                            "refused": str(e)})
            all_pass = False
    _dump_json(outdir / "sharpness.json", {
        "theta": {"beta": theta.beta, "gamma": theta.gamma},
        "all_passed": all_pass, "cells": reports,
    })
    return ["sharpness.json"]


def _run_reconcile(cfg: dict, outdir: Path) -> list:
    import pandas as pd

    from .reconcile import exhaustive_ar1_design, kpt_equivalence_scan, restriction_counts

    designs = exhaustive_ar1_design(beta=float(cfg["beta"][0]))
    scan = kpt_equivalence_scan(cfg["gamma_grid"], cfg["beta"], designs)
    pd.DataFrame({
        "gamma": scan.gammas, "ours": scan.ours, "nine_rule": scan.kpt,
        "near_boundary": scan.boundary,
    }).to_csv(outdir / "scan.csv", index=False)
    ours2, kpt2 = restriction_counts(2)
    ours3, kpt3 = restriction_counts(3)
    _dump_json(outdir / "reconcile.json", {
        "disagreements": scan.disagreements,
        "n_grid": int(scan.gammas.size),
        "restrictions_per_cell": {"T2": {"ours": ours2, "nine_rule": kpt2},
                                  "T3": {"ours": ours3, "nine_rule": kpt3}},
    })
    return ["scan.csv", "reconcile.json"]


def _run_infer(cfg: dict, outdir: Path) -> list:
    import pandas as pd

    from .core import ParamPoint
    from .inference import _MC_DESIGNS, InferenceEngine, invert_ci, moment_system_for

    data, spec, theta, design = _input_panel(cfg)
    free = cfg.get("free")
    if free is None:
        free = "gamma" if data.lagged_outcome is not None else "beta2"
    if free not in ("beta2", "gamma"):
        raise ConfigError(f"config field 'free': expected beta2 or gamma, got {free!r}")
    if free == "beta2" and len(theta.beta) < 2:
        raise ConfigError("config field 'free': beta2 needs at least two beta coordinates")

    def make_theta(v: float) -> ParamPoint:
        if free == "beta2":
            return ParamPoint(beta=theta.beta[:1] + (v,) + theta.beta[2:],
                              gamma=theta.gamma, pinned=theta.pinned)
        return ParamPoint(beta=theta.beta, gamma=(v,) + theta.gamma[1:],
                          pinned=theta.pinned)

    system = moment_system_for(spec, data, conditioning=cfg["conditioning"])
    eng_defaults = (_MC_DESIGNS.get(design) or {}).get("engine", {})
    engine_kwargs = {}
    for key, fallback in (("points_per_dim", 5), ("undersmooth", 1.0), ("min_ess", 5.0)):
        value = cfg.get(key)
        engine_kwargs[key] = eng_defaults.get(key, fallback) if value is None else value
    engine = InferenceEngine(data, system, n_boot=cfg["n_boot"], seed=cfg["seed"],
                             level=cfg["level"], **engine_kwargs)
    artifacts = []
    if cfg.get("test") is not None:
        res = engine.test(make_theta(float(cfg["test"])))
        _dump_json(outdir / "test.json", {
            "free": free, "value": cfg["test"], "statistic": res.statistic,
            "critical_value": res.critical_value, "reject": res.reject,
            "level": res.level, "worst_moment": res.worst,
        })
        artifacts.append("test.json")
    else:
        grid = cfg.get("grid")
        if grid is None:
            dcfg = _MC_DESIGNS.get(design)
            if dcfg is None:
                raise ConfigError("config field 'grid': required with --data input")
            grid = list(dcfg["grid"])
        ci = invert_ci(data, system, grid, make_theta, param_name=free,
                       seed=cfg["seed"], engine=engine)
        pd.DataFrame({
            "value": ci.grid, "statistic": ci.statistics,
            "critical_value": ci.critical_values, "reject": ci.rejected,
        }).to_csv(outdir / "tests.csv", index=False)
        _dump_json(outdir / "ci.json", {
            "free": free, "level": ci.level, "lower": ci.lower, "upper": ci.upper,
            "empty": ci.empty, "n_accepted": int((~ci.rejected).sum()),
            "bootstrap_draws": ci.bootstrap_draws,
        })
        artifacts += ["tests.csv", "ci.json"]
    return artifacts


def _run_cf(cfg: dict, outdir: Path) -> list:
    from .analysis import accepted_theta_grid, cf_bounds
    from .core import build_cells

    data, spec, _theta_base, _ = _input_panel(cfg)
    if cfg.get("w") is None or cfg.get("w_tilde") is None:
        raise ConfigError("config field 'w'/'w_tilde': both paths are required")
    if cfg.get("theta_set") is not None:
        theta_set = _parampoint_list(cfg["theta_set"])
    elif cfg.get("candidates") is not None:
        cells = build_cells(data, scheme="all-period", match="exact")
        theta_set = accepted_theta_grid(_parampoint_list(cfg["candidates"]),
                                        spec, cells, data)
        if not theta_set:
            raise ConfigError("config field 'candidates': no candidate passed the "
                              "inequality check; provide theta_set explicitly")
    else:
        raise ConfigError("config field 'theta_set'/'candidates': one is required")
    T = data.n_periods
    bound = cf_bounds(_parse_path(cfg["w"], T), _parse_path(cfg["w_tilde"], T),
                      cfg["t"], theta_set, data, spec)
    _dump_json(outdir / "cf.json", {
        "t": bound.t, "lower": bound.lower, "upper": bound.upper,
        "factual_frequency": bound.p_hat, "n_matched": bound.n_matched,
        "n_theta": bound.n_theta,
        "w": {"z": bound.w[0], "x": bound.w[1]},
        "w_tilde": {"z": bound.w_tilde[0], "x": bound.w_tilde[1]},
    })
    return ["cf.json"]


def _run_signs(cfg: dict, outdir: Path) -> list:
    from .analysis import sign_diagnostics
    from .core import build_cells

    data, _spec, _theta, _ = _input_panel(cfg)
    cells = build_cells(data, scheme="all-period", match="exact")
    diag = sign_diagnostics(data, cells, margin=cfg["margin"])
    _dump_json(outdir / "signs.json", {
        "margin": diag.margin,
        "index_signs": [{"cell": e["cell"], "dz": e["dz"], "sign": e["sign"]}
                        for e in diag.index_signs],
        "gamma_signs": {str(j): s for j, s in diag.gamma_signs.items()},
        "cells": [{
            "cell": cs.cell.describe(), "dz": cs.dz,
            "index_up": cs.index_up, "index_down": cs.index_down,
            "witnesses": [{
                "kind": w.kind, "x_first": w.x_first, "x_second": w.x_second,
                "coord": w.coord, "gap": w.gap, "se": w.se,
            } for w in cs.witnesses],
        } for cs in diag.cells],
        "support_premise": diag.support_premise,
    })
    return ["signs.json"]


def _run_mc_table(cfg: dict, outdir: Path) -> list:
    from .inference import mc_table

    design = _canonical_design(cfg.get("design"))
    if design is None:
        raise ConfigError("config field 'design': required")
    result = mc_table(
        design, n=cfg["n"], sigma_z=cfg["sigma_z"], rho=cfg["rho"],
        reps=cfg["reps"], seed=cfg["seed"], level=cfg["level"],
        n_boot=cfg["n_boot"], grid=cfg.get("grid"), null_value=cfg["null"],
        points_per_dim=cfg.get("points_per_dim"), min_ess=cfg.get("min_ess"),
        undersmooth=cfg.get("undersmooth"), progress=bool(cfg.get("progress")),
    )
    table = result.summary.copy()
    table.insert(5, "CI", [f"[{lo:.3f}, {up:.3f}]" for lo, up in
                           zip(table["CI_lower"], table["CI_upper"])])
    table.to_csv(outdir / "table.csv", index=False)
    result.per_rep.to_csv(outdir / "per_rep.csv", index=False)
    return ["table.csv", "per_rep.csv"]


_RUNNERS = {
    "simulate": _run_simulate,
    "bounds": _run_bounds,
    "idset": _run_idset,
    "sharpcheck": _run_sharpcheck,
    "reconcile": _run_reconcile,
    "infer": _run_infer,
    "cf": _run_cf,
    "signs": _run_signs,
    "mc-table": _run_mc_table,
}


def _init_threads() -> None:
    """Cap BLAS pools at PANELBOUNDS_THREADS before numpy loads (default all cores)."""
    threads = os.environ.get(THREAD_ENV)
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    _init_threads()
    try:
        cfg = _resolve(args)
    except ConfigError as e:
        print(f"panelbounds {args.command}: {e}", file=sys.stderr)
        return 2
    outdir = Path(cfg["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    failed_marker = outdir / "FAILED.json"
    try:
        artifacts = _RUNNERS[cfg["command"]](cfg, outdir)
    except ConfigError as e:
        print(f"panelbounds {cfg['command']}: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # leave a marker beside any partial output
        _dump_json(failed_marker, {"command": cfg["command"],
                                   "error": f"{type(e).__name__}: {e}"})
        print(f"panelbounds {cfg['command']}: failed: {e}", file=sys.stderr)
        return 1
    if failed_marker.exists():
        failed_marker.unlink()
    _write_manifest(outdir, cfg, artifacts)
    for name in sorted(artifacts + ["manifest.json"]):
        print(outdir / name)
    return 0


if __name__ == "__main__":
    sys.exit(main())
