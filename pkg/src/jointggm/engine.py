"""Column-wise inference of T graphs: dispatch, lambda paths, symmetrization."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from threadpoolctl import threadpool_limits

from ._core import PenaltySpec, SolverError, TaskDataset, ZERO_TOL, center_columns, validate_dataset
from .covariance import BlockCovariance, CovarianceSet, block_problem, empirical_covariance, pseudo_loglik
from .penalties import certificate
from .solvers import (certificate_tolerance, coop_lambda_max, group_lambda_max, lambda_max,
                      solve_coop, solve_group, solve_lasso)

logger = logging.getLogger(__name__)

SYMMETRIZATIONS = ("AND", "OR")


@dataclass
class NodeDiagnostics:
    node: int
    residual: float
    tol: float
    converged: bool
    n_iter: int
    flags: list = field(default_factory=list)
    error: str | None = None


@dataclass
class InferredGraphSet:
    """T signed undirected graphs inferred at one penalty level.

    ``edges[t]`` is a list of ``(i, j, sign, weight)`` with ``i < j``;
    sign is +1/-1 (sign of the concentration entry) or 0 when the two
    directed estimates disagree. ``coef[t, i, j]`` is the directed
    coefficient of variable j in the regression of node i, which estimates
    ``K_ij / K_ii``.
    """

    edges: list
    coef: np.ndarray
    lam: float
    method: str
    symmetrization: str
    diagnostics: list
    variable_names: tuple = ()
    task_names: tuple = ()
    pseudo_loglik: float = float("nan")

    @property
    def n_tasks(self) -> int:
        return len(self.edges)

    def edge_set(self, t: int) -> set:
        return {(i, j) for i, j, _, _ in self.edges[t]}

    def adjacency(self, t: int, signed: bool = False) -> np.ndarray:
        p = self.coef.shape[1]
        A = np.zeros((p, p), dtype=int)
        for i, j, s, _ in self.edges[t]:
            A[i, j] = A[j, i] = s if signed else 1
        return A

    @property
    def n_edges(self) -> int:
        return sum(len(e) for e in self.edges)

    @property
    def converged(self) -> bool:
        return all(d.converged for d in self.diagnostics)


@dataclass
class SolutionPath:
    """Per-node, per-lambda stacked coefficients along a descending grid."""

    lambdas: np.ndarray
    betas: list  # betas[k][node] -> stacked vector at lambdas[k]
    residuals: np.ndarray  # (n_lambda, p)
    tolerances: np.ndarray  # (n_lambda, p)
    seconds: float = 0.0


def _solve(problem: BlockCovariance, method: str, lam: float, weights, warm):
    if method in ("independent", "pooled", "intertwined"):
        return solve_lasso(problem, lam, weights, warm_start=warm)
    if method == "group":
        return solve_group(problem, lam, warm_start=warm)
    return solve_coop(problem, lam, warm_start=warm)


def _reweight(problem: BlockCovariance, weights) -> BlockCovariance:
    """Change of variables u_t = w_t beta_t turning weighted group penalties into unit ones."""
    w = np.asarray(weights, dtype=float)
    if np.all(w == 1.0):
        return problem
    if np.any(w <= 0):
        raise ValueError("group and coop methods need strictly positive task weights")
    inv = 1.0 / w
    quad = problem.quad_blocks * (inv[:, None, None] ** 2)
    lin = (problem.linear.reshape(problem.n_tasks, -1) * inv[:, None]).ravel()
    return BlockCovariance(problem.node, quad, lin)


def node_problem(cov: CovarianceSet, node: int, spec: PenaltySpec) -> BlockCovariance:
    """The (possibly reweighted) sub-problem the solver sees for ``node``."""
    problem = block_problem(cov, node, spec)
    if spec.method in ("group", "coop"):
        problem = _reweight(problem, spec.resolve_weights(cov.task_sizes))
    return problem


def node_lambda_max(problem: BlockCovariance, method: str, weights=None) -> float:
    if method in ("group",):
        return group_lambda_max(problem)
    if method == "coop":
        return coop_lambda_max(problem)
    return lambda_max(problem, weights)


def global_lambda_max(cov: CovarianceSet, spec: PenaltySpec) -> float:
    """Smallest lambda giving empty graphs for every node."""
    weights = spec.resolve_weights(cov.task_sizes)
    return max(node_lambda_max(node_problem(cov, i, spec), spec.method, weights)
               for i in range(cov.n_features))


def _node_path(cov: CovarianceSet, node: int, spec: PenaltySpec, lambdas):
    """Solve one node along the grid, warm-starting each lambda from the previous."""
    # single-threaded BLAS keeps results identical for any worker count
    with threadpool_limits(1):
        return _node_path_inner(cov, node, spec, lambdas)


def _node_path_inner(cov, node, spec, lambdas):
    problem = node_problem(cov, node, spec)
    weights = spec.resolve_weights(cov.task_sizes)
    scale = None
    if spec.method in ("group", "coop"):
        scale = 1.0 / np.repeat(weights, problem.n_features)
    out = []
    warm = None
    for lam in lambdas:
        try:
            res = _solve(problem, spec.method, float(lam), weights, warm)
        except (SolverError, np.linalg.LinAlgError, FloatingPointError) as exc:
            out.append((np.zeros(problem.size),
                        NodeDiagnostics(node, np.inf, np.nan, False, 0, [], repr(exc))))
            warm = None
            continue
        warm = res.beta
        beta = res.beta if scale is None else res.beta * scale
        out.append((beta, NodeDiagnostics(node, res.residual, res.tol, res.converged,
                                          res.n_iter, sorted(set(res.flags)))))
    return out


def certify(cov: CovarianceSet, spec: PenaltySpec, coef: np.ndarray) -> np.ndarray:
    """Re-check optimality of directed coefficients at ``spec.lam``.

    ``coef`` is (T, p, p) as in InferredGraphSet. Returns per-node
    ``(residual, tolerance)`` pairs as a (p, 2) array.
    """
    p, T = cov.n_features, cov.n_tasks
    weights = spec.resolve_weights(cov.task_sizes)
    kind = {"group": "group", "coop": "coop"}.get(spec.method, "l1")
    out = np.zeros((p, 2))
    for i in range(p):
        problem = node_problem(cov, i, spec)
        others = np.r_[0:i, i + 1:p]
        B = coef[:1, i, others] if spec.method == "pooled" else coef[:, i, others]
        beta = B.ravel()
        if kind != "l1":
            beta = beta * np.repeat(weights, problem.n_features)
        grad = problem.quad_dot(beta) + problem.linear
        cert = certificate(kind, beta, grad, spec.lam, problem.n_tasks,
                           weights if kind == "l1" else None)
        out[i] = cert.residual, certificate_tolerance(problem, spec.lam)
    return out


def symmetrize(coef: np.ndarray, rule: str = "AND") -> list:
    """Undirected signed edges ``(i, j, sign, weight)`` from directed coefficients.

    ``coef`` has shape (p, p); ``coef[i, j]`` comes from node i's regression.
    """
    rule = rule.upper()
    if rule not in SYMMETRIZATIONS:
        raise ValueError(f"symmetrization must be AND or OR, got {rule!r}")
    p = coef.shape[0]
    nz = np.abs(coef) >= ZERO_TOL
    edges = []
    for i in range(p):
        for j in range(i + 1, p):
            a, b = nz[i, j], nz[j, i]
            if not (a and b if rule == "AND" else a or b):
                continue
            vals = [v for v, keep in ((coef[i, j], a), (coef[j, i], b)) if keep]
            signs = {int(np.sign(v)) for v in vals}
            sign = signs.pop() if len(signs) == 1 else 0
            weight = float(np.mean(np.abs(vals)))
            edges.append((i, j, sign, weight))
    return edges


def _assemble(cov, spec, lam, node_results, symmetrization, data):
    p, T = cov.n_features, cov.n_tasks
    m = p - 1
    t_solved = 1 if spec.method == "pooled" else T
    coef = np.zeros((T, p, p))
    diagnostics = []
    for i, (beta, diag) in enumerate(node_results):
        B = beta.reshape(t_solved, m)
        if t_solved == 1 and T > 1:
            B = np.repeat(B, T, axis=0)
        others = np.r_[0:i, i + 1:p]
        coef[:, i, others] = B
        diagnostics.append(diag)
    edges = [symmetrize(coef[t], symmetrization) for t in range(T)]
    pll = path_pseudo_loglik(coef, cov)
    return InferredGraphSet(edges, coef, float(lam), spec.method, symmetrization.upper(),
                            diagnostics, data.variable_names if data else (),
                            data.task_names if data else (), pll)


def path_pseudo_loglik(coef: np.ndarray, cov: CovarianceSet) -> float:
    """Sum over tasks of the pseudo-log-likelihood of the implied concentration.

    Each row i of the concentration is ``K_ii * (1, beta)`` with K_ii the
    inverse residual variance of node i's regression on the task covariance.
    """
    total = 0.0
    for t in range(cov.n_tasks):
        S = cov.per_task[t]
        B = coef[t].copy()
        np.fill_diagonal(B, 1.0)
        resid = np.einsum("ij,jk,ik->i", B, S, B)
        if np.any(resid <= 0):
            return float("nan")
        K = B / resid[:, None]
        total += pseudo_loglik(K.T, S, cov.task_sizes[t])
    return float(total)


def _prepare(data: TaskDataset, spec: PenaltySpec, center: bool) -> CovarianceSet:
    validate_dataset(data)
    if center:
        data = center_columns(data)
    return empirical_covariance(data, spec.alpha)


def _run_nodes(cov, spec, lambdas, n_jobs):
    p = cov.n_features
    if n_jobs == 1 or p < 2:
        per_node = [_node_path(cov, i, spec, lambdas) for i in range(p)]
    else:
        per_node = Parallel(n_jobs=n_jobs)(
            delayed(_node_path)(cov, i, spec, lambdas) for i in range(p))
    if all(d.error for node in per_node for _, d in node):
        raise SolverError("every node sub-problem failed")
    return per_node


def infer(data: TaskDataset, spec: PenaltySpec, symmetrization: str = "AND",
          center: bool = True, n_jobs: int = 1) -> InferredGraphSet:
    """Infer T graphs at the single penalty level ``spec.lam``."""
    cov = _prepare(data, spec, center)
    return infer_from_covariance(cov, spec, symmetrization, n_jobs, data)


def infer_from_covariance(cov: CovarianceSet, spec: PenaltySpec, symmetrization="AND",
                          n_jobs: int = 1, data: TaskDataset | None = None) -> InferredGraphSet:
    per_node = _run_nodes(cov, spec, [spec.lam], n_jobs)
    return _assemble(cov, spec, spec.lam, [node[0] for node in per_node], symmetrization, data)


def lambda_grid(lam_max: float, grid_size: int, grid_ratio: float) -> np.ndarray:
    """Log-spaced descending grid from ``lam_max`` to ``grid_ratio * lam_max``."""
    if grid_size < 1:
        raise ValueError("grid_size must be >= 1")
    if not 0 < grid_ratio < 1:
        raise ValueError("grid_ratio must lie in (0, 1)")
    if grid_size == 1:
        return np.array([lam_max])
    return lam_max * np.logspace(0.0, np.log10(grid_ratio), grid_size)


def infer_path(data: TaskDataset, spec: PenaltySpec, grid_size: int = 20,
               grid_ratio: float = 0.05, symmetrization: str = "AND", center: bool = True,
               n_jobs: int = 1, lambdas=None):
    """Solve along a descending lambda grid with warm starts.

    The grid runs from the global lambda_max down to ``grid_ratio`` times
    it unless explicit ``lambdas`` are given. Returns
    ``(SolutionPath, [InferredGraphSet, ...])``.
    """
    cov = _prepare(data, spec, center)
    return path_from_covariance(cov, spec, grid_size, grid_ratio, symmetrization, n_jobs,
                                lambdas, data)


def path_from_covariance(cov: CovarianceSet, spec: PenaltySpec, grid_size: int = 20,
                         grid_ratio: float = 0.05, symmetrization: str = "AND",
                         n_jobs: int = 1, lambdas=None, data=None):
    if lambdas is None:
        lambdas = lambda_grid(global_lambda_max(cov, spec), grid_size, grid_ratio)
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.size > 1 and np.any(np.diff(lambdas) >= 0):
        raise ValueError("lambda grid must be strictly descending")
    start = time.perf_counter()
    per_node = _run_nodes(cov, spec, lambdas, n_jobs)
    graphs = []
    for k, lam in enumerate(lambdas):
        results = [node[k] for node in per_node]
        graphs.append(_assemble(cov, spec, lam, results, symmetrization, data))
    path = SolutionPath(
        lambdas=lambdas,
        betas=[[node[k][0] for node in per_node] for k in range(len(lambdas))],
        residuals=np.array([[node[k][1].residual for node in per_node]
                            for k in range(len(lambdas))]),
        tolerances=np.array([[node[k][1].tol for node in per_node]
                             for k in range(len(lambdas))]),
        seconds=time.perf_counter() - start,
    )
    return path, graphs
