"""Derivative-free trust-region solver for nonlinear least squares with sketched models."""

from .interp_model import EvaluationError, GeometryError
from .problems import Problem, dataset_problem, gen_rosenbrock, random_nlls
from .sketch import SketchConfig, make_sketch
from .solver import SolveResult, SolverConfig, run

__version__ = "0.1.0"

__all__ = [
    "EvaluationError",
    "GeometryError",
    "Problem",
    "SketchConfig",
    "SolveResult",
    "SolverConfig",
    "dataset_problem",
    "gen_rosenbrock",
    "make_sketch",
    "random_nlls",
    "run",
]
