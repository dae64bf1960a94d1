"""scikit-learn style wrapper around the inference engine."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from ._core import METHODS, DataError, PenaltySpec, TaskDataset, center_columns, validate_dataset
from .covariance import empirical_covariance
from .engine import SYMMETRIZATIONS, global_lambda_max, infer_from_covariance, path_pseudo_loglik


def as_task_dataset(X) -> TaskDataset:
    """Accept a TaskDataset, a list of (n_t, p) arrays, or one (n, p) array (T = 1)."""
    if isinstance(X, TaskDataset):
        return validate_dataset(X)
    if isinstance(X, np.ndarray) and X.ndim == 2:
        X = [X]
    try:
        tasks = [np.asarray(x, dtype=float) for x in X]
    except (TypeError, ValueError) as exc:
        raise DataError(f"cannot read tasks as numeric arrays: {exc}") from exc
    if not tasks:
        raise DataError("no tasks given")
    return validate_dataset(TaskDataset(tasks))


class JointGraphicalLasso(BaseEstimator):
    """Infer T related sparse graphs by penalized neighborhood selection.

    Parameters
    ----------
    method : {"independent", "pooled", "intertwined", "group", "coop"}
    lam : float
        Penalty level.
    alpha : float, default 0.5
        Blend weight of the task's own covariance (intertwined only).
    symmetrization : {"AND", "OR"}
    task_weights : sequence of float, optional
    center : bool, default True
        Remove each task's column means before estimating covariances.
    n_jobs : int, default 1

    Attributes
    ----------
    coef_ : ndarray of shape (T, p, p)
        ``coef_[t, i, j]`` is the coefficient of variable j in node i's
        regression for task t.
    graphs_ : InferredGraphSet
    edges_ : list of lists of (i, j, sign, weight)
    lambda_max_ : float
        Smallest penalty giving empty graphs on the training data.
    """

    def __init__(self, method="intertwined", lam=0.1, alpha=0.5, symmetrization="AND",
                 task_weights=None, center=True, n_jobs=1):
        self.method = method
        self.lam = lam
        self.alpha = alpha
        self.symmetrization = symmetrization
        self.task_weights = task_weights
        self.center = center
        self.n_jobs = n_jobs

    def _spec(self) -> PenaltySpec:
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if str(self.symmetrization).upper() not in SYMMETRIZATIONS:
            raise ValueError(f"symmetrization must be AND or OR, got {self.symmetrization!r}")
        return PenaltySpec(self.method, float(self.lam), float(self.alpha), self.task_weights)

    def _covariance(self, data: TaskDataset, spec: PenaltySpec):
        if self.center:
            data = center_columns(data)
        return empirical_covariance(data, spec.alpha)

    def fit(self, X, y=None):
        spec = self._spec()
        data = as_task_dataset(X)
        cov = self._covariance(data, spec)
        self.graphs_ = infer_from_covariance(cov, spec, self.symmetrization, self.n_jobs, data)
        self.coef_ = self.graphs_.coef
        self.edges_ = self.graphs_.edges
        self.lambda_max_ = global_lambda_max(cov, spec)
        self.n_tasks_ = data.n_tasks
        self.n_features_in_ = data.n_features
        self.converged_ = self.graphs_.converged
        return self

    def _check_fitted(self):
        if not hasattr(self, "coef_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet; call fit first")

    def adjacency(self, task: int = 0, signed: bool = False) -> np.ndarray:
        """p x p adjacency matrix of one inferred graph."""
        self._check_fitted()
        return self.graphs_.adjacency(task, signed)

    def score(self, X, y=None) -> float:
        """Pseudo-log-likelihood of ``X`` under the fitted regressions, summed over tasks."""
        self._check_fitted()
        data = as_task_dataset(X)
        if data.n_tasks != self.n_tasks_ or data.n_features != self.n_features_in_:
            raise DataError(
                f"expected {self.n_tasks_} tasks of {self.n_features_in_} variables, got "
                f"{data.n_tasks} of {data.n_features}")
        return path_pseudo_loglik(self.coef_, self._covariance(data, self._spec()))
