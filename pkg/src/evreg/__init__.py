"""Extreme value (Gumbel) regression with small-sample one-sided test adjustments."""

from .errors import (AdjustmentError, ConditioningError, ConvergenceError, DataError,
                     EvaluationError, EvregError, FormulaError, InconsistentFitsError,
                     UnsupportedModelError)
from .evd import EULER, GumbelParams, Tail
from .fit import Direction, FitResult, HypothesisSpec, default_init, fit_full, fit_restricted
from .hots import (STATISTICS, CrossFitDiagonals, TestReport, adjust, barndorff_u,
                   fraser_u, p_value, run_tests, severini_u, signed_lr, skovgaard_u)
from .inference import (DiagonalBundle, LikelihoodState, expected_info, likelihood_state,
                        loglik, observed_info, prepare, score)
from .model import (Dataset, ModelSpec, PredictorSpec, eval_predictor, parse_formula,
                    to_max_form)
from .ortho import OrthogonalizedModel, orthogonalize, r0_statistic, reparam_likelihood
from .sim import (SimDesign, SimResult, exact_critical_values, load_design, parse_design,
                  pvalue_discrepancy, run_power, run_size)

__version__ = "0.1.0"

__all__ = [
    "AdjustmentError", "ConditioningError", "ConvergenceError", "CrossFitDiagonals",
    "DataError", "Dataset", "DiagonalBundle", "Direction", "EULER", "EvaluationError",
    "EvregError", "FitResult", "FormulaError", "GumbelParams", "HypothesisSpec",
    "InconsistentFitsError", "LikelihoodState", "ModelSpec", "OrthogonalizedModel",
    "PredictorSpec", "STATISTICS", "SimDesign", "SimResult", "Tail", "TestReport",
    "UnsupportedModelError", "adjust", "barndorff_u", "default_init", "eval_predictor",
    "exact_critical_values", "expected_info", "fit_full", "fit_restricted", "fraser_u",
    "likelihood_state", "load_design", "loglik", "observed_info", "orthogonalize",
    "p_value", "parse_design", "parse_formula", "prepare", "pvalue_discrepancy",
    "r0_statistic", "reparam_likelihood", "run_power", "run_size", "run_tests", "score",
    "severini_u", "signed_lr", "skovgaard_u", "to_max_form",
]
