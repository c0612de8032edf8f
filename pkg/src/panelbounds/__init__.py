"""Set identification for nonlinear panel-data models.

Bounds, identified sets, sharpness certificates, and bootstrap inference
for binary/ordered/multinomial/censored panel outcomes whose latent shocks
are only required to be stationary conditional on the exogenous covariate
path and the fixed effect.
"""

from .analysis import CfBound, SignDiagnostics, accepted_theta_grid, cf_bounds, sign_diagnostics
from .bounds import (
    BoundProfile,
    CheckResult,
    binary_bounds,
    censored_bounds,
    check_inequalities,
    check_inequalities_multinomial,
    critical_cutoffs,
    general_bounds,
    multinomial_bounds,
    ordered_bounds,
    ordered_bounds_naive,
)
from .ccp import CcpTable, event_prob, joint_path_probs, table_from_population
from .core import (
    ConditioningCell,
    ModelSpec,
    MultinomialPanel,
    PanelDataError,
    PanelDataset,
    ParamPoint,
    build_cells,
    load_panel,
    save_panel,
)
from .dgp import DESIGNS, DgpConfig, SimulationResult, simulate
from .idset import AnnealConfig, IdSetResult, map_identified_set, membership_interval, q_star
from .inference import (
    CiResult,
    InferenceEngine,
    McResult,
    PointTest,
    build_eval_grid,
    build_moments_dynamic_ordered,
    build_moments_static_ordered,
    invert_ci,
    mc_table,
    moment_system_for,
    test_point,
)
from .reconcile import kpt_check, kpt_equivalence_scan, manski_check, restriction_counts
from .sharpness import SharpnessReport, certify, construct_marginals_continuous, verify_certificate

__version__ = "0.1.0"

__all__ = [
    "AnnealConfig",
    "BoundProfile",
    "CcpTable",
    "CfBound",
    "CheckResult",
    "CiResult",
    "ConditioningCell",
    "DESIGNS",
    "DgpConfig",
    "IdSetResult",
    "InferenceEngine",
    "McResult",
    "ModelSpec",
    "MultinomialPanel",
    "PanelDataError",
    "PanelDataset",
    "ParamPoint",
    "PointTest",
    "SharpnessReport",
    "SignDiagnostics",
    "SimulationResult",
    "accepted_theta_grid",
    "binary_bounds",
    "build_cells",
    "build_eval_grid",
    "build_moments_dynamic_ordered",
    "build_moments_static_ordered",
    "censored_bounds",
    "certify",
    "cf_bounds",
    "check_inequalities",
    "check_inequalities_multinomial",
    "construct_marginals_continuous",
    "critical_cutoffs",
    "event_prob",
    "general_bounds",
    "invert_ci",
    "joint_path_probs",
    "kpt_check",
    "kpt_equivalence_scan",
    "load_panel",
    "manski_check",
    "map_identified_set",
    "mc_table",
    "membership_interval",
    "moment_system_for",
    "multinomial_bounds",
    "ordered_bounds",
    "ordered_bounds_naive",
    "q_star",
    "restriction_counts",
    "save_panel",
    "sign_diagnostics",
    "simulate",
    "table_from_population",
    "test_point",
    "verify_certificate",
    "__version__",
]
