"""Multivariate regression with a combined entrywise l1 and row-wise l2
penalty, plus cross-validation / BIC tuning and a simulation harness."""

from remmap.core import (
    CoefficientMatrix,
    PenaltyParams,
    RegressionProblem,
    StandardizationRecord,
    destandardize,
    objective,
    standardize,
    validate_problem,
)
from remmap.solver import (
    ResidualState,
    SolveReport,
    fit,
    group_shrink_row,
    lasso_update,
    update_row,
)
from remmap.tuning import (
    CVScore,
    FoldAssignment,
    TuningResult,
    assign_folds,
    bic_score,
    bic_search,
    cv_score,
    cv_vote,
    default_grid,
    df_estimate,
    grid_search,
    joint_search,
    lasso_intermediate,
    ols_refit,
    sep_search,
)

__all__ = [
    "CVScore",
    "CoefficientMatrix",
    "FoldAssignment",
    "PenaltyParams",
    "RegressionProblem",
    "ResidualState",
    "SolveReport",
    "StandardizationRecord",
    "TuningResult",
    "assign_folds",
    "bic_score",
    "bic_search",
    "cv_score",
    "cv_vote",
    "default_grid",
    "destandardize",
    "df_estimate",
    "fit",
    "grid_search",
    "group_shrink_row",
    "joint_search",
    "lasso_intermediate",
    "lasso_update",
    "objective",
    "ols_refit",
    "sep_search",
    "standardize",
    "update_row",
    "validate_problem",
]

__version__ = "0.1.0"
