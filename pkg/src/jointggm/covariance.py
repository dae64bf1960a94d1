"""Empirical covariances, stacked neighborhood problems and the pseudo-likelihood."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._core import PenaltySpec, TaskDataset

PSD_TOL = 1e-8


@dataclass(frozen=True)
class CovarianceSet:
    """Per-task covariances S_t, pooled covariance and intertwined blends.

    Attributes
    ----------
    per_task : ndarray of shape (T, p, p)
    pooled : ndarray of shape (p, p)
        ``sum_t n_t S_t / n``.
    blended : ndarray of shape (T, p, p)
        ``alpha * S_t + (1 - alpha) * pooled``.
    task_sizes : ndarray of shape (T,)
    alpha : float
    """

    per_task: np.ndarray
    pooled: np.ndarray
    blended: np.ndarray
    task_sizes: np.ndarray
    alpha: float

    @property
    def n_tasks(self) -> int:
        return self.per_task.shape[0]

    @property
    def n_features(self) -> int:
        return self.per_task.shape[1]

    def with_alpha(self, alpha: float) -> "CovarianceSet":
        return from_covariances(self.per_task, self.task_sizes, alpha)

    def matrices_for(self, method: str) -> np.ndarray:
        """The (T', p, p) stack a method's data-fit term is built from."""
        if method == "pooled":
            return self.pooled[None]
        if method == "intertwined":
            return self.blended
        return self.per_task


def from_covariances(per_task, task_sizes, alpha: float = 0.5) -> CovarianceSet:
    """Assemble a :class:`CovarianceSet` from precomputed S_t."""
    per_task = np.asarray(per_task, dtype=float)
    sizes = np.asarray(task_sizes)
    if per_task.ndim != 3 or per_task.shape[1] != per_task.shape[2]:
        raise ValueError(f"expected a (T, p, p) stack, got shape {per_task.shape}")
    if sizes.shape != (per_task.shape[0],):
        raise ValueError(f"{sizes.size} task sizes given for {per_task.shape[0]} covariances")
    n = sizes.sum()
    pooled = np.tensordot(sizes / n, per_task, axes=1)
    blended = alpha * per_task + (1.0 - alpha) * pooled[None]
    for arr in (per_task, pooled, blended):
        arr.setflags(write=False)
    return CovarianceSet(per_task, pooled, blended, sizes, float(alpha))


def empirical_covariance(data: TaskDataset, alpha: float = 0.5) -> CovarianceSet:
    """Compute ``S_t = X_t^T X_t / n_t`` for each task (data assumed centered)."""
    covs = []
    for x in data.tasks:
        s = x.T @ x / x.shape[0]
        s = 0.5 * (s + s.T)
        assert np.linalg.eigvalsh(s)[0] >= -PSD_TOL * max(1.0, np.abs(s).max()), \
            "empirical covariance is not positive semidefinite"
        covs.append(s)
    return from_covariances(np.stack(covs), data.task_sizes, alpha)


@dataclass(frozen=True)
class BlockCovariance:
    """Stacked sub-problem for one node.

    The quadratic matrix is block diagonal and stored as its T blocks
    ``quad_blocks[t]`` of shape (p-1, p-1). Coordinates are task-major:
    entry ``t * (p - 1) + j`` is feature j of task t.
    """

    node: int
    quad_blocks: np.ndarray
    linear: np.ndarray

    @property
    def n_tasks(self) -> int:
        return self.quad_blocks.shape[0]

    @property
    def n_features(self) -> int:
        return self.quad_blocks.shape[1]

    @property
    def size(self) -> int:
        return self.n_tasks * self.n_features

    def dense_quad(self) -> np.ndarray:
        """Materialize the full block-diagonal matrix (tests and small problems)."""
        T, m = self.n_tasks, self.n_features
        out = np.zeros((T * m, T * m))
        for t in range(T):
            out[t * m:(t + 1) * m, t * m:(t + 1) * m] = self.quad_blocks[t]
        return out

    def quad_dot(self, beta: np.ndarray) -> np.ndarray:
        """Return ``C_{\\i\\i} @ beta`` block by block."""
        b = np.asarray(beta).reshape(self.n_tasks, self.n_features)
        return np.einsum("tjk,tk->tj", self.quad_blocks, b).ravel()

    def objective(self, beta: np.ndarray) -> float:
        return quad_objective(self, beta)

    def gradient(self, beta: np.ndarray) -> np.ndarray:
        return quad_gradient(self, beta)

    def scaled(self, c: float) -> "BlockCovariance":
        return BlockCovariance(self.node, c * self.quad_blocks, c * self.linear)


def make_block_problem(matrices: np.ndarray, node: int) -> BlockCovariance:
    """Build the stacked problem for ``node`` from a (T, p, p) stack of covariances."""
    matrices = np.asarray(matrices, dtype=float)
    p = matrices.shape[1]
    if not 0 <= node < p:
        raise IndexError(f"node {node} out of range for p={p}")
    keep = np.r_[0:node, node + 1:p]
    quad = matrices[:, keep][:, :, keep]
    linear = matrices[:, keep, node].ravel()
    return BlockCovariance(int(node), quad, linear)


def block_problem(cov: CovarianceSet, node: int, spec: PenaltySpec | str) -> BlockCovariance:
    """Stacked sub-problem for ``node`` under the method of ``spec``.

    Intertwined uses the blends (at ``spec.alpha``), pooled a single copy
    of the pooled covariance, every other method the raw S_t.
    """
    method = spec if isinstance(spec, str) else spec.method
    if method == "intertwined" and not isinstance(spec, str) and spec.alpha != cov.alpha:
        cov = cov.with_alpha(spec.alpha)
    return make_block_problem(cov.matrices_for(method), node)


def _check_length(problem: BlockCovariance, beta) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (problem.size,):
        raise ValueError(f"beta has shape {beta.shape}, expected ({problem.size},)")
    return beta


def quad_objective(problem: BlockCovariance, beta) -> float:
    """``f(beta) = beta^T C beta / 2 + beta^T c``."""
    beta = _check_length(problem, beta)
    return float(0.5 * beta @ problem.quad_dot(beta) + beta @ problem.linear)


def quad_gradient(problem: BlockCovariance, beta) -> np.ndarray:
    """``grad f(beta) = C beta + c``."""
    beta = _check_length(problem, beta)
    return problem.quad_dot(beta) + problem.linear


def pseudo_loglik(K, S, n) -> float:
    """Gaussian pseudo-log-likelihood of concentration ``K`` given covariance ``S``.

    Sum over variables of the conditional log-densities, written in closed
    form with ``D = diag(K)``.
    """
    K = np.asarray(K, dtype=float)
    S = np.asarray(S, dtype=float)
    d = np.diag(K)
    if np.any(d <= 0):
        raise ValueError("diagonal of K must be strictly positive")
    p = K.shape[0]
    M = K / np.sqrt(d)  # K D^{-1/2}
    trace = np.einsum("ij,ik,kj->", M, S, M)
    return float(0.5 * n * np.log(d).sum() - 0.5 * n * trace
                 - 0.5 * n * p * np.log(2 * np.pi))
