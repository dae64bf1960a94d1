"""Joint inference of multiple sparse Gaussian graphical models."""

__version__ = "0.1.0"

from ._core import METHODS, DataError, PenaltySpec, SolverError, TaskDataset  # noqa: E402
from .engine import InferredGraphSet, SolutionPath, infer, infer_path  # noqa: E402
from .estimator import JointGraphicalLasso  # noqa: E402
from .evaluation import PRCurve, PRPoint, aggregate_curves, auc_pr, score  # noqa: E402
from .simulate import GroundTruth, simulate  # noqa: E402

__all__ = [
    "METHODS", "DataError", "PenaltySpec", "SolverError", "TaskDataset",
    "InferredGraphSet", "SolutionPath", "infer", "infer_path",
    "JointGraphicalLasso",
    "PRCurve", "PRPoint", "aggregate_curves", "auc_pr", "score",
    "GroundTruth", "simulate",
]
