"""L0-constrained feature selection with an exact branch-and-bound MIQP solver.

Main entry points: ``solve`` (one sparsity bound), ``CvEvaluator`` and ``tune``
(choose the bound), ``mipboost_select`` (whole pipeline) and ``run_experiment``
(simulation harness).
"""

from .bench import run_experiment
from .bisection import BfOptions, tune
from .data import Dataset, load_csv, make_folds, standardize
from .forward import fs_path
from .icv import CvEvaluator
from .lasso import cv_lasso
from .pipeline import MipBoostConfig, mipboost_select
from .scenarios import Correlation, ScenarioConfig, generate_scenario
from .solver import MiqpOptions, MiqpProblem, Solution, big_m_bounds, solve
from .whitening import whiten

__all__ = [
    "BfOptions", "Correlation", "CvEvaluator", "Dataset", "MipBoostConfig", "MiqpOptions",
    "MiqpProblem", "ScenarioConfig", "Solution", "big_m_bounds", "cv_lasso", "fs_path",
    "generate_scenario", "load_csv", "make_folds", "mipboost_select", "run_experiment", "solve",
    "standardize", "tune", "whiten",
]
