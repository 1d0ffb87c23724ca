"""Best-subset maximum score prediction for binary choice."""

__version__ = "0.1.0"

from .data import Dataset, Schema, load_csv, quadratic_expand, split_folds, standardize
from .errors import PrescienceError
from .mio import Formulation, MioConfig, SolveResult, SolveStatus, branch_and_bound, solve_prescience
from .oracle import exact_max_score
from .score import Coefficients, ParamBox, empirical_score, predict
from .selection import FitSpec, cross_validate_q, epsilon_rule, fit
from .warmstart import fit_logit, warm_start

__all__ = [
    "Coefficients", "Dataset", "FitSpec", "Formulation", "MioConfig", "ParamBox",
    "PrescienceError", "Schema", "SolveResult", "SolveStatus", "branch_and_bound",
    "cross_validate_q", "empirical_score", "epsilon_rule", "exact_max_score", "fit",
    "fit_logit", "load_csv", "predict", "quadratic_expand", "solve_prescience",
    "split_folds", "standardize", "warm_start",
]
