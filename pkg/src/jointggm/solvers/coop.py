"""Graphical Cooperative-LASSO sub-problem solver.

Minimizes ``f(beta) + lam * sum_i (||(b_i)_+||_2 + ||(-b_i)_+||_2)`` with
``b_i`` the group of feature i across tasks. The support is tracked per
coordinate together with its sign; the positive and negative parts of a
group form two sign-bounded sub-groups, so within the current orthant the
master problem is a smooth group problem with box constraints ``s_j x_j >= 0``.
A coordinate reaching its bound leaves the support; activation picks the
group with the largest minimized violation
``||(g + lam theta)_+|| + ||(-g - lam theta)_+||`` over feasible theta.
"""

from __future__ import annotations

import numpy as np

from .._core import ZERO_TOL
from ..covariance import BlockCovariance
from ..penalties import (coop_penalty, coop_subdiff_element, coop_theta_columns,
                         coop_violation_columns)
from ._common import SolveResult, certificate_tolerance, submatrix
from ._master import carry_curvature, minimize_master


def coop_lambda_max(problem: BlockCovariance) -> float:
    """Smallest lambda with an all-zero solution."""
    c = problem.linear.reshape(problem.n_tasks, problem.n_features)
    pos = np.sqrt((np.maximum(c, 0) ** 2).sum(axis=0))
    neg = np.sqrt((np.maximum(-c, 0) ** 2).sum(axis=0))
    return float(np.maximum(pos, neg).max(initial=0.0))


def solve_coop(problem: BlockCovariance, lam: float, warm_start=None,
               tol: float | None = None, max_iter: int | None = None) -> SolveResult:
    """Solve the Cooperative-LASSO sub-problem by the active-set method.

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
        beta[np.abs(beta) < ZERO_TOL] = 0.0
    # support: coordinate -> sign bound
    support = {int(j): float(np.sign(beta[j])) for j in np.flatnonzero(beta)}

    # a feature's violation adds up the positive and negative parts of two
    # sign sub-groups, each bounded by the master tolerance
    master_tol = inner_tol / 4
    stalls = 0
    H = None
    H_keys = []
    flags = []
    trace = []
    n_outer = 0
    n_master = 0
    converged = False
    while n_outer < max_iter:
        n_outer += 1
        if support:
            idx = np.array(sorted(support))
            signs = np.array([support[j] for j in idx])
            gid = 2 * (idx % m) + (signs > 0)
            keys = list(zip(idx.tolist(), signs.tolist()))
            H0 = carry_curvature(H, H_keys, keys)
            res = minimize_master(submatrix(problem, idx), problem.linear[idx], beta[idx],
                                  gid, lam, signs=signs, H=H0, tol=master_tol, scale=scale)
            n_master += res.n_iter
            flags.extend(res.flags)
            trace.extend(res.trace)
            beta[idx] = res.x
            support = {int(j): support[int(j)] for j in idx[res.alive]}
            H, H_keys = res.H, [k for k, a in zip(keys, res.alive) if a]

        grad = problem.quad_dot(beta) + problem.linear
        B = beta.reshape(T, m)
        G = grad.reshape(T, m)
        V = G + lam * coop_theta_columns(B, G, lam)
        viol = coop_violation_columns(V)
        best_i = int(np.argmax(viol)) if m else 0
        if m == 0 or viol[best_i] <= inner_tol:
            converged = True
            break
        # admit the zero coordinates of the worst group that want to move,
        # each bounded to the sign of its descent direction
        added = False
        for t in range(T):
            j = t * m + best_i
            if j not in support and abs(V[t, best_i]) > 0.01 * inner_tol:
                support[j] = -float(np.sign(V[t, best_i]))
                added = True
        if not added:
            # the violation sits on active coordinates: polish harder, then give up
            stalls += 1
            if stalls > 3:
                flags.append("stalled")
                break
            master_tol /= 10

    grad = problem.quad_dot(beta) + problem.linear
    cert = coop_subdiff_element(beta, grad, lam, T)
    if n_outer >= max_iter and not converged:
        flags.append("max_iter")
    return SolveResult(
        beta=beta,
        certificate=cert,
        converged=bool(cert.residual <= target),
        n_iter=n_outer,
        n_master=n_master,
        tol=target,
        objective=problem.objective(beta) + lam * coop_penalty(beta, T),
        flags=flags,
        objective_trace=trace,
    )
