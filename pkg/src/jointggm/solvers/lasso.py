"""Active-set LASSO for the independent, pooled and intertwined sub-problems.

Minimizes ``f(beta) + lam * sum_j w_j |beta_j|`` with
``f(beta) = beta^T C beta / 2 + beta^T c``. The active set grows one
coordinate at a time (largest violation first); on the active set the
sign pattern is frozen so the master problem is a linear system, and steps
are truncated at the first sign change.
"""

from __future__ import annotations

import numpy as np
from scipy import linalg

from .._core import ZERO_TOL, SolverError
from ..covariance import BlockCovariance
from ..penalties import lasso_subdiff_element
from ._common import SolveResult, certificate_tolerance, submatrix

JITTER = 1e-10


def _coordinate_weights(problem: BlockCovariance, weights) -> np.ndarray:
    if weights is None:
        return np.ones(problem.size)
    w = np.asarray(weights, dtype=float)
    if w.size == problem.n_tasks:
        return np.repeat(w, problem.n_features)
    if w.size != problem.size:
        raise ValueError(f"expected {problem.n_tasks} task weights, got {w.size}")
    return w


def lambda_max(problem: BlockCovariance, weights=None) -> float:
    """Smallest lambda at which beta = 0 is optimal."""
    w = _coordinate_weights(problem, weights)
    c = np.abs(problem.linear)
    if c.size == 0:
        return 0.0
    if np.any((w == 0) & (c > 0)):
        return np.inf
    ratio = np.divide(c, w, out=np.zeros_like(c), where=w > 0)
    return float(ratio.max(initial=0.0))


def _solve_restricted(Q: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve Q x = rhs for symmetric PSD Q, adding jitter when singular."""
    scale = max(float(np.abs(np.diag(Q)).max(initial=0.0)), 1.0)
    for jitter in (0.0, JITTER, JITTER * 1e2, JITTER * 1e4):
        try:
            factor = linalg.cho_factor(Q + jitter * scale * np.eye(len(Q)), check_finite=False)
            return linalg.cho_solve(factor, rhs, check_finite=False)
        except linalg.LinAlgError:
            continue
    raise SolverError("restricted system is singular even after jitter")


def solve_lasso(problem: BlockCovariance, lam: float, weights=None, warm_start=None,
                tol: float | None = None, max_iter: int | None = None) -> SolveResult:
    """Solve the weighted LASSO sub-problem by the active-set method.

    Parameters
    ----------
    problem : BlockCovariance
    lam : float
        Penalty level (>= 0).
    weights : array-like, optional
        Per-task (length T) or per-coordinate weights; default all ones.
    warm_start : ndarray, optional
        Starting coefficients, e.g. the solution at a larger lambda.
    tol : float, optional
        Target certificate residual; default ``1e-8 * (lam + ||c||_inf)``.

    Returns
    -------
    SolveResult
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    m = problem.size
    T = problem.n_tasks
    w = _coordinate_weights(problem, weights)
    lw = lam * w
    c = problem.linear
    target = certificate_tolerance(problem, lam) if tol is None else tol
    inner_tol = 0.1 * target
    if max_iter is None:
        max_iter = 10 * T * (problem.n_features + 1)

    beta = np.zeros(m)
    if warm_start is not None:
        beta = np.array(warm_start, dtype=float)
        if beta.shape != (m,):
            raise ValueError(f"warm start has shape {beta.shape}, expected ({m},)")
        beta[np.abs(beta) < ZERO_TOL] = 0.0
    active = [int(j) for j in np.flatnonzero(beta)]
    theta = {j: float(np.sign(beta[j])) for j in active}

    n_outer = 0
    n_master = 0
    converged = False
    while n_outer < max_iter:
        n_outer += 1
        # 1. master problem on the active set, with sign-consistency truncation
        while active:
            n_master += 1
            if n_master > 50 * max_iter:
                break
            idx = np.array(active)
            Q = submatrix(problem, idx)
            th = np.array([theta[j] for j in active])
            new = _solve_restricted(Q, -(c[idx] + lw[idx] * th))
            h = new - beta[idx]
            bad = th * new < 0
            if not bad.any():
                beta[idx] = new
                break
            # largest step keeping every coordinate on the side of its theta
            cand = np.flatnonzero(bad)
            rho = -beta[idx[cand]] / h[cand]
            k = cand[np.argmin(rho)]  # argmin returns the lowest index on ties
            step = float(rho.min())
            beta[idx] += step * h
            j = int(idx[k])
            beta[j] = 0.0
            gj = float(problem.quad_dot(beta)[j] + c[j])
            # 2. the zeroed coordinate leaves A unless it still violates optimality
            if abs(gj) < lw[j] or step == 0.0 and theta[j] == -np.sign(gj):
                active.remove(j)
                del theta[j]
            else:
                theta[j] = -float(np.sign(gj))
        for j in [j for j in active if beta[j] == 0.0]:
            active.remove(j)
            del theta[j]

        # 3. admit the most violating inactive coordinate
        grad = problem.quad_dot(beta) + c
        viol = np.maximum(np.abs(grad) - lw, 0.0)
        if active:
            viol[np.array(active)] = 0.0
        j = int(np.argmax(viol))
        if viol[j] <= inner_tol:
            converged = True
            break
        active.append(j)
        active.sort()
        theta[j] = -float(np.sign(grad[j]))

    grad = problem.quad_dot(beta) + c
    cert = lasso_subdiff_element(beta, grad, lam, w, T)
    return SolveResult(
        beta=beta,
        certificate=cert,
        converged=converged and cert.residual <= target,
        n_iter=n_outer,
        n_master=n_master,
        tol=target,
        objective=problem.objective(beta) + float(lw @ np.abs(beta)),
    )
