"""Graphical Group-LASSO sub-problem solver.

Minimizes ``f(beta) + lam * sum_i ||beta_i^{[1:T]}||_2`` where the group of
feature i collects its T task coefficients. Groups enter the active set one
at a time by largest ``max(0, ||grad_i f||_2 - lam)``; the master problem on
active groups is solved by BFGS.
"""

from __future__ import annotations

import numpy as np

from .._core import ZERO_TOL
from ..covariance import BlockCovariance
from ..penalties import group_penalty, group_subdiff_element
from ._common import SolveResult, certificate_tolerance, submatrix
from ._master import carry_curvature, minimize_master


def group_lambda_max(problem: BlockCovariance) -> float:
    """Largest group norm of the gradient at zero."""
    c = problem.linear.reshape(problem.n_tasks, problem.n_features)
    return float(np.sqrt((c ** 2).sum(axis=0)).max(initial=0.0))


def solve_group(problem: BlockCovariance, lam: float, warm_start=None,
                tol: float | None = None, max_iter: int | None = None) -> SolveResult:
    """Solve the Group-LASSO sub-problem by the active-set method.

    Parameters
    ----------
    problem : BlockCovariance
    lam : float
    warm_start : ndarray, optional
    tol : float, optional
        Target certificate residual (default ``1e-8 * (lam + ||c||_inf)``).
    max_iter : int, optional
        Cap on outer (activation) iterations, default ``10 * T * p``.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    T, m = problem.n_tasks, problem.n_features
    target = certificate_tolerance(problem, lam) if tol is None else tol
    inner_tol = 0.1 * target
    scale = lam + float(np.abs(problem.linear).max(initial=0.0))
    if max_iter is None:
        max_iter = 10 * T * (m + 1)

    beta = np.zeros(T * m)
    if warm_start is not None:
        beta = np.array(warm_start, dtype=float)
        if beta.shape != (T * m,):
            raise ValueError(f"warm start has shape {beta.shape}, expected ({T * m},)")
    B = beta.reshape(T, m)
    B[:, np.sqrt((B ** 2).sum(axis=0)) < ZERO_TOL] = 0.0
    active = set(np.flatnonzero(np.abs(B).sum(axis=0) > 0).tolist())

    H = None
    H_keys = []
    flags = []
    trace = []
    n_outer = 0
    n_master = 0
    converged = False
    while n_outer < max_iter:
        n_outer += 1
        if active:
            groups = sorted(active)
            idx = (np.arange(T)[:, None] * m + np.array(groups)[None, :]).ravel()
            idx.sort()
            H0 = carry_curvature(H, H_keys, idx.tolist())
            res = minimize_master(submatrix(problem, idx), problem.linear[idx], beta[idx],
                                  idx % m, lam, H=H0, tol=inner_tol, scale=scale)
            n_master += res.n_iter
            flags.extend(res.flags)
            trace.extend(res.trace)
            beta[idx] = res.x
            B = beta.reshape(T, m)
            active = set((idx[res.alive] % m).tolist())
            H, H_keys = res.H, idx[res.alive].tolist()
            B[:, [i for i in groups if i not in active]] = 0.0
        grad = problem.quad_dot(beta) + problem.linear
        G = grad.reshape(T, m)
        viol = np.maximum(np.sqrt((G ** 2).sum(axis=0)) - lam, 0.0)
        if active:
            viol[sorted(active)] = 0.0
        i = int(np.argmax(viol))
        if viol[i] <= inner_tol:
            converged = True
            break
        active.add(i)

    grad = problem.quad_dot(beta) + problem.linear
    cert = group_subdiff_element(beta, grad, lam, T)
    if not converged:
        flags.append("max_iter")
    return SolveResult(
        beta=beta,
        certificate=cert,
        converged=converged and cert.residual <= target,
        n_iter=n_outer,
        n_master=n_master,
        tol=target,
        objective=problem.objective(beta) + lam * group_penalty(beta, T),
        flags=flags,
        objective_trace=trace,
    )
