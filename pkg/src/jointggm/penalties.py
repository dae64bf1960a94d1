"""Penalty functions and subgradient certificates for the stacked sub-problems.

Coordinates are stored task-major: for T tasks and m = p - 1 features the
stacked vector reshapes to a (T, m) array whose column i is the group of
feature i across tasks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._core import ZERO_TOL


def as_groups(beta, n_tasks: int) -> np.ndarray:
    """View the stacked vector as a (T, m) array; column i is a group."""
    beta = np.asarray(beta, dtype=float)
    return beta.reshape(n_tasks, -1)


def flatten_groups(groups: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(groups).ravel()


def positive_part(x):
    return np.maximum(x, 0.0)


def negative_part(x):
    """``(-x)_+``."""
    return np.maximum(-x, 0.0)


def _safe_div(num, den):
    """Elementwise num / den with 0/0 = 0."""
    den = np.asarray(den, dtype=float)
    out = np.zeros(np.broadcast(num, den).shape)
    np.divide(num, den, out=out, where=den > 0)
    return out


def l1_penalty(beta, n_tasks: int, task_weights=None) -> float:
    b = as_groups(beta, n_tasks)
    w = np.ones(n_tasks) if task_weights is None else np.asarray(task_weights, float)
    return float(w @ np.abs(b).sum(axis=1))


def group_penalty(beta, n_tasks: int) -> float:
    b = as_groups(beta, n_tasks)
    return float(np.sqrt((b ** 2).sum(axis=0)).sum())


def coop_penalty(beta, n_tasks: int) -> float:
    b = as_groups(beta, n_tasks)
    pos = np.sqrt((positive_part(b) ** 2).sum(axis=0))
    neg = np.sqrt((negative_part(b) ** 2).sum(axis=0))
    return float((pos + neg).sum())


_PENALTIES = {"g1": "l1", "g2": "group", "g3": "coop"}


def penalty_value(kind: str, beta, n_tasks: int, task_weights=None) -> float:
    """Evaluate g1 (weighted l1), g2 (group) or g3 (cooperative)."""
    kind = _PENALTIES.get(kind, kind)
    if kind == "l1":
        return l1_penalty(beta, n_tasks, task_weights)
    if kind == "group":
        return group_penalty(beta, n_tasks)
    if kind == "coop":
        return coop_penalty(beta, n_tasks)
    raise ValueError(f"unknown penalty kind {kind!r}")


@dataclass(frozen=True)
class SubgradientCertificate:
    """A feasible subgradient and the optimality violation it leaves.

    ``theta`` is stacked like beta; ``per_group_violation`` has one entry per
    feature group; ``residual`` is their maximum.
    """

    theta: np.ndarray
    residual: float
    per_group_violation: np.ndarray

    def ok(self, tol: float) -> bool:
        return self.residual <= tol


def lasso_subdiff_element(beta, grad_f, lam, weights=None, n_tasks: int = 1
                          ) -> SubgradientCertificate:
    """Best subgradient of ``lam * sum_j w_j |beta_j|`` against ``grad_f``.

    ``weights`` may be per task (length T) or per coordinate.
    """
    beta = np.asarray(beta, dtype=float)
    g = np.asarray(grad_f, dtype=float)
    if weights is None:
        w = np.ones_like(beta)
    else:
        w = np.asarray(weights, dtype=float)
        if w.size == n_tasks and w.size != beta.size:
            w = np.repeat(w, beta.size // n_tasks)
    lw = lam * w
    nz = np.abs(beta) >= ZERO_TOL
    theta = np.where(nz, np.sign(beta), np.clip(_safe_div(-g, lw), -1.0, 1.0))
    # unpenalized coordinates keep theta = 0
    theta = np.where(lw > 0, theta, 0.0)
    viol = np.abs(g + lw * theta)
    per_group = as_groups(viol, n_tasks).max(axis=0) if viol.size else viol
    return SubgradientCertificate(theta, float(viol.max(initial=0.0)), per_group)


def group_subdiff_element(beta, grad_f, lam, n_tasks: int) -> SubgradientCertificate:
    """Best subgradient of the group penalty; violation is a per-group 2-norm."""
    b = as_groups(beta, n_tasks)
    g = as_groups(grad_f, n_tasks)
    norms = np.sqrt((b ** 2).sum(axis=0))
    gnorms = np.sqrt((g ** 2).sum(axis=0))
    active = norms >= ZERO_TOL
    theta = np.where(active, _safe_div(b, norms),
                     -g / np.maximum(gnorms, lam) if lam > 0 else 0.0)
    theta = np.where(np.isfinite(theta), theta, 0.0)
    viol = np.sqrt(((g + lam * theta) ** 2).sum(axis=0))
    return SubgradientCertificate(flatten_groups(theta), float(viol.max(initial=0.0)), viol)


def _one_sided_clip(a, lam):
    """Scale a nonnegative vector into the ball of radius 1 after dividing by lam."""
    na = np.sqrt((a ** 2).sum())
    if lam <= 0 or na == 0:
        return np.zeros_like(a)
    return a / max(lam, na)


def coop_group_theta(b, g, lam):
    """Feasible theta for one group of the cooperative penalty.

    Handles the four membership cases: zero group, only negative entries,
    only positive entries, both signs present.
    """
    pos = b >= ZERO_TOL
    neg = b <= -ZERO_TOL
    zero = ~(pos | neg)
    theta = np.zeros_like(b)
    npos = np.sqrt((b[pos] ** 2).sum())
    nneg = np.sqrt((b[neg] ** 2).sum())
    if pos.any():
        theta[pos] = b[pos] / npos
    if neg.any():
        theta[neg] = b[neg] / nneg
    if not pos.any():
        # positive side at its kink: theta >= 0 on the zero set, norm <= 1
        a = np.where(zero, positive_part(-g), 0.0)
        theta += _one_sided_clip(a, lam)
    if not neg.any():
        a = np.where(zero, positive_part(g), 0.0)
        theta -= _one_sided_clip(a, lam)
    return theta


def coop_theta_columns(B, G, lam):
    """Column-wise ``coop_group_theta`` for (T, m) arrays of groups."""
    B = np.asarray(B, dtype=float)
    G = np.asarray(G, dtype=float)
    pos = B >= ZERO_TOL
    neg = B <= -ZERO_TOL
    zero = ~(pos | neg)
    npos = np.sqrt(np.where(pos, B * B, 0.0).sum(axis=0))
    nneg = np.sqrt(np.where(neg, B * B, 0.0).sum(axis=0))
    theta = np.where(pos, _safe_div(B, npos), 0.0) + np.where(neg, _safe_div(B, nneg), 0.0)

    def clip(a):
        na = np.sqrt((a * a).sum(axis=0))
        return a / np.maximum(na, lam) if lam > 0 else np.zeros_like(a)

    theta += np.where(pos.any(axis=0), 0.0, clip(np.where(zero, positive_part(-G), 0.0)))
    theta -= np.where(neg.any(axis=0), 0.0, clip(np.where(zero, positive_part(G), 0.0)))
    return theta


def coop_violation_columns(V) -> np.ndarray:
    """Column-wise ``coop_violation``."""
    return (np.sqrt((positive_part(V) ** 2).sum(axis=0))
            + np.sqrt((negative_part(V) ** 2).sum(axis=0)))


def coop_violation(v) -> float:
    """``||(v)_+||_2 + ||(-v)_+||_2``."""
    return float(np.sqrt((positive_part(v) ** 2).sum()) + np.sqrt((negative_part(v) ** 2).sum()))


def coop_subdiff_element(beta, grad_f, lam, n_tasks: int) -> SubgradientCertificate:
    """Best subgradient of the cooperative penalty against ``grad_f``."""
    b = as_groups(beta, n_tasks)
    g = as_groups(grad_f, n_tasks)
    theta = coop_theta_columns(b, g, lam)
    viol = coop_violation_columns(g + lam * theta)
    return SubgradientCertificate(flatten_groups(theta), float(viol.max(initial=0.0)), viol)


def certificate(kind: str, beta, grad_f, lam, n_tasks: int, weights=None
                ) -> SubgradientCertificate:
    """Dispatch to the certificate of the given penalty kind."""
    kind = _PENALTIES.get(kind, kind)
    if kind == "l1":
        return lasso_subdiff_element(beta, grad_f, lam, weights, n_tasks)
    if kind == "group":
        return group_subdiff_element(beta, grad_f, lam, n_tasks)
    if kind == "coop":
        return coop_subdiff_element(beta, grad_f, lam, n_tasks)
    raise ValueError(f"unknown penalty kind {kind!r}")
