"""
ABOUTME: Validation battery: residual analyses, predictive checks, cross-validation,
ABOUTME: prior sensitivity, synthetic recovery studies and external comparison
"""

from .crossval import (
    assign_folds,
    cv_metrics,
    fold_seed,
    interval_percentiles,
    kfold_cv_deaths,
    kfold_cv_prevalence,
    leave_one_state_out,
)
from .external import compare_external
from .ppc import ppc_state_deaths, predictive_percentile
from .recovery import RecoveryReport, parameter_recovery, residual_ladder
from .residuals import (
    pearson_residual,
    pearson_residuals,
    prevalence_residuals,
    regression_counts,
    residual_regression,
    state_residual_summary,
)
from .sensitivity import SensitivityReport, compare_variants, prior_sensitivity, select_variants, stronger_prior_variants
from .synthetic import SyntheticData, simulate_synthetic

__all__ = [
    "RecoveryReport",
    "SensitivityReport",
    "SyntheticData",
    "assign_folds",
    "compare_external",
    "compare_variants",
    "cv_metrics",
    "fold_seed",
    "interval_percentiles",
    "kfold_cv_deaths",
    "kfold_cv_prevalence",
    "leave_one_state_out",
    "parameter_recovery",
    "pearson_residual",
    "pearson_residuals",
    "predictive_percentile",
    "prevalence_residuals",
    "prior_sensitivity",
    "regression_counts",
    "residual_regression",
    "residual_ladder",
    "select_variants",
    "simulate_synthetic",
    "state_residual_summary",
    "stronger_prior_variants",
]
