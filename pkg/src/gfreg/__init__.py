"""Grouped multiple functional linear regression.

Detects groups of functional covariates whose regression coefficient
functions share a common shape, then fits a parsimonious grouped model
with one template coefficient per group and one scale per covariate.
"""

__version__ = "0.1.0"

from .detect import (
    ADMMState,
    DetectConfig,
    GroupingStructure,
    PathEntry,
    PathResult,
    admm_solve,
    b_update,
    detect_path,
    misalignment_matrix,
    normalized_misalignment,
    shape_misalignment,
    threshold_grouping,
)
from .exceptions import (
    ConfigurationError,
    DegenerateRowError,
    DegenerateTemplateError,
    GfregError,
    InvalidInputError,
    SolverFailureError,
)
from .fit import (
    GroupedModel,
    OrdinaryModel,
    fit_grouped,
    fit_matrix_variate,
    fit_ordinary,
    normalize,
    predict,
)
from .funcdata import (
    BasisSystem,
    CurveSet,
    ScoreMatrix,
    build_eigenbasis,
    build_fourier_basis,
    project_scores,
    reconstruct_function,
)
from .penalty import PenaltySpec, evaluate, prox_update, validate_theta
from .select import (
    CVConfig,
    CVReport,
    CandidateResult,
    baseline_comparison,
    mccv_rmse,
    select_model,
)
from .simgen import (
    SimConfig,
    SimulatedData,
    correct_grouping_rate,
    gen_dataset,
    template_scores,
    true_coefficients,
)

__all__ = [
    "ADMMState",
    "BasisSystem",
    "CVConfig",
    "CVReport",
    "CandidateResult",
    "ConfigurationError",
    "CurveSet",
    "DegenerateRowError",
    "DegenerateTemplateError",
    "DetectConfig",
    "GfregError",
    "GroupedModel",
    "GroupingStructure",
    "InvalidInputError",
    "OrdinaryModel",
    "PathEntry",
    "PathResult",
    "PenaltySpec",
    "ScoreMatrix",
    "SimConfig",
    "SimulatedData",
    "SolverFailureError",
    "admm_solve",
    "b_update",
    "baseline_comparison",
    "build_eigenbasis",
    "build_fourier_basis",
    "correct_grouping_rate",
    "detect_path",
    "evaluate",
    "fit_grouped",
    "fit_matrix_variate",
    "fit_ordinary",
    "gen_dataset",
    "mccv_rmse",
    "misalignment_matrix",
    "normalize",
    "normalized_misalignment",
    "predict",
    "project_scores",
    "prox_update",
    "reconstruct_function",
    "select_model",
    "shape_misalignment",
    "template_scores",
    "threshold_grouping",
    "true_coefficients",
    "validate_theta",
]
