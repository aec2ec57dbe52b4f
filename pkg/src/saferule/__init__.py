"""Sparse linear prediction over all hyperrectangle rules, made tractable by safe screening."""

from .discretize import (
    DataError,
    DiscretizationSpec,
    DiscretizedDataset,
    discretize,
    discretize_apply,
    discretize_apply_many,
    segment_to_original,
)
from .encoding import ModelState, ProblemEncoding, Task, predictions
from .model import Model, load_csv
from .path import PathConfig, PathResult, fit, lambda_max, run_path, select_model
from .rules import RuleSegment, count_all_rules, format_segment, jaccard, parse_segment, similarity
from .screening import SafeSphere, screen_rules
from .solver import SolverConfig, solve_restricted

__version__ = "0.1.0"

__all__ = [
    "DataError", "DiscretizationSpec", "DiscretizedDataset", "discretize", "discretize_apply",
    "discretize_apply_many", "segment_to_original", "ModelState", "ProblemEncoding", "Task",
    "predictions", "Model", "load_csv", "PathConfig", "PathResult", "fit", "lambda_max",
    "run_path", "select_model", "RuleSegment", "count_all_rules", "format_segment", "jaccard",
    "parse_segment", "similarity", "SafeSphere", "screen_rules", "SolverConfig", "solve_restricted",
]
