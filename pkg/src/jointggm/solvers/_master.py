"""Smooth master problem shared by the group and cooperative solvers.

On the current active coordinates the objective is

    F(x) = x^T Q x / 2 + c^T x + lam * sum_G ||x_G||_2

where the groups G partition the coordinates. The cooperative solver adds
sign bounds ``s_j x_j >= 0``; inside one orthant its penalty is exactly of
this form with one group per (feature, sign) pair.

The minimization is BFGS with Armijo backtracking. Steps are truncated at
the first sign bound, groups whose block minimizer is zero are zeroed
(this never increases F) and dropped, and once the gradient is small a
few exact Newton steps finish the job, because function-value line
searches cannot resolve decreases below rounding error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

ARMIJO_C1 = 1e-4
MAX_HALVINGS = 50
NEWTON_SWITCH = 1e-3  # switch to Newton once ||grad|| < NEWTON_SWITCH * scale


@dataclass
class MasterResult:
    x: np.ndarray
    alive: np.ndarray
    H: np.ndarray
    converged: bool
    n_iter: int
    flags: list = field(default_factory=list)
    trace: list = field(default_factory=list)


class _Problem:
    def __init__(self, Q, c, gid, lam, signs):
        self.Q = Q
        self.c = c
        self.gid = gid
        self.lam = lam
        self.signs = signs
        _, self.gidx = np.unique(gid, return_inverse=True)
        self.n_groups = int(self.gidx.max(initial=-1)) + 1
        same = self.gidx[:, None] == self.gidx[None, :]
        self.Q_block = np.where(same, Q, 0.0)
        order = np.argsort(self.gidx, kind="stable")
        bounds = np.searchsorted(self.gidx[order], np.arange(self.n_groups + 1))
        self.members = [order[a:b] for a, b in zip(bounds[:-1], bounds[1:])]

    def group_norms(self, x):
        return np.sqrt(np.bincount(self.gidx, weights=x * x, minlength=self.n_groups))

    def value(self, x):
        return float(0.5 * x @ self.Q @ x + self.c @ x + self.lam * self.group_norms(x).sum())

    def smooth_grad(self, x):
        return self.Q @ x + self.c

    def theta(self, x, g):
        """Penalty gradient, with the minimizing subgradient on all-zero groups."""
        norms = self.group_norms(x)
        nrm = norms[self.gidx]
        th = np.divide(x, nrm, out=np.zeros_like(x), where=nrm > 0)
        zero = nrm == 0
        if zero.any():
            if self.signs is None:
                d = -g
            else:
                d = self.signs * np.maximum(-self.signs * g, 0.0)
            d = np.where(zero, d, 0.0)
            dn = np.sqrt(np.bincount(self.gidx, weights=d * d, minlength=self.n_groups))
            dn = dn[self.gidx]
            th = np.where(zero, np.divide(d, dn, out=np.zeros_like(d), where=dn > 0), th)
        return th

    def gradient(self, x):
        g = self.smooth_grad(x)
        return g + self.lam * self.theta(x, g), g

    def blocked(self, x, grad):
        """Coordinates sitting on their sign bound with the gradient pushing outward."""
        if self.signs is None:
            return np.zeros(x.shape, dtype=bool)
        return (x == 0) & (self.signs * grad >= 0)

    def hessian(self, x):
        Hs = self.Q.copy()
        norms = self.group_norms(x)
        for k in np.flatnonzero(norms > 0):
            idx = self.members[k]
            u = x[idx] / norms[k]
            if idx.size == 1:
                continue  # a singleton group's penalty is linear away from zero
            Hs[np.ix_(idx, idx)] += self.lam / norms[k] * (np.eye(idx.size) - np.outer(u, u))
        return Hs

    def lift_zero_groups(self, x):
        """One block proximal-gradient step on every all-zero group.

        Quasi-Newton directions ignore the kink at zero, so a group admitted
        at exactly zero would otherwise only creep off it. With step 1/L_G
        (L_G the largest eigenvalue of the group block) the step never
        increases F, and it leaves the group at zero when zero is block-optimal.
        """
        x = x.copy()
        norms = self.group_norms(x)
        g = self.smooth_grad(x)
        for k in np.flatnonzero(norms == 0):
            idx = self.members[k]
            L = float(np.linalg.eigvalsh(self.Q[np.ix_(idx, idx)])[-1])
            if L <= 0:
                continue
            a = -g[idx] / L
            if self.signs is not None:
                a = self.signs[idx] * np.maximum(self.signs[idx] * a, 0.0)
            na = float(np.linalg.norm(a))
            if na > self.lam / L:
                x[idx] = a * (1.0 - self.lam / (L * na))
        return x

    def block_zero(self, x, g_smooth):
        """Groups for which x_G = 0 minimizes F with the other groups fixed."""
        g0 = g_smooth - self.Q_block @ x
        if self.signs is None:
            a = g0
        else:
            a = np.maximum(-self.signs * g0, 0.0)
        dn = np.sqrt(np.bincount(self.gidx, weights=a * a, minlength=self.n_groups))
        norms = self.group_norms(x)
        return (dn <= self.lam) & (norms > 0)


def _group_max_norm(v, gidx, n_groups):
    if v.size == 0:
        return 0.0
    return float(np.sqrt(np.bincount(gidx, weights=v * v, minlength=n_groups)).max())


def minimize_master(Q, c, x, gid, lam, signs=None, H=None, tol=1e-10,
                    max_iter=500, scale=1.0) -> MasterResult:
    """Minimize F over the given coordinates.

    Parameters
    ----------
    Q, c : restricted quadratic and linear terms.
    x : starting point (may contain exact zeros for newly admitted groups).
    gid : group label of each coordinate.
    signs : optional array of +1/-1 sign bounds.
    H : optional inverse-Hessian approximation to continue from.
    tol : stop when every group's projected gradient has 2-norm <= tol.

    Returns
    -------
    MasterResult
        ``alive`` marks coordinates still in the active set; dropped ones
        are exactly zero in ``x``.
    """
    n_all = len(x)
    x_all = np.array(x, dtype=float)
    alive = np.ones(n_all, dtype=bool)
    idx = np.arange(n_all)
    H = np.eye(n_all) if H is None or H.shape != (n_all, n_all) else H.copy()
    flags = []
    trace = []
    prob = _Problem(Q, c, gid, lam, signs)
    xs = prob.lift_zero_groups(x_all)
    converged = False
    it = 0
    F = prob.value(xs)
    trace.append(F)
    while it < max_iter:
        it += 1
        grad, g_smooth = prob.gradient(xs)
        blocked = prob.blocked(xs, grad)
        pg = np.where(blocked, 0.0, grad)
        gnorm = _group_max_norm(pg, prob.gidx, prob.n_groups)
        if gnorm <= tol:
            converged = True
            break

        use_newton = gnorm < NEWTON_SWITCH * scale
        d = _direction(prob, xs, pg, H, blocked, use_newton)
        slope = float(pg @ d)
        if slope >= 0:
            H = np.eye(len(xs))
            d = -pg
            slope = float(pg @ d)

        cand, step, truncated, hit, accepted = _line_search(prob, xs, d, slope, F)
        if not accepted and not use_newton:
            # retry this iteration with an exact Newton step
            d = _direction(prob, xs, pg, H, blocked, True)
            slope = float(pg @ d)
            if slope < 0:
                cand, step, truncated, hit, accepted = _line_search(prob, xs, d, slope, F)
        if not accepted:
            flags.append("line_search_failed")
            break

        s = cand - xs
        new_grad, new_smooth = prob.gradient(cand)
        y = new_grad - grad
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            Hy = H @ y
            r = 1.0 / sy
            H = (H - r * (np.outer(s, Hy) + np.outer(Hy, s))
                 + (r * r * float(y @ Hy) + r) * np.outer(s, s))
        xs = cand

        # zero groups that are better off at zero
        drop = np.zeros(len(xs), dtype=bool)
        if truncated:
            drop |= hit
        zero_groups = prob.block_zero(xs, new_smooth)
        if zero_groups.any():
            zmask = zero_groups[prob.gidx]
            xs = np.where(zmask, 0.0, xs)
            drop |= zmask
        F = prob.value(xs)
        trace.append(F)
        if drop.any():
            keep = ~drop
            x_all[idx] = xs
            x_all[idx[drop]] = 0.0
            alive[idx[drop]] = False
            idx = idx[keep]
            xs = xs[keep]
            H = H[np.ix_(keep, keep)]
            Q = Q[np.ix_(keep, keep)]
            c = c[keep]
            gid = gid[keep]
            if signs is not None:
                signs = signs[keep]
            prob = _Problem(Q, c, gid, lam, signs)
            if len(xs) == 0:
                converged = True
                break
    x_all[idx] = xs
    # coordinates never moved off zero are not part of the support
    still_zero = xs == 0
    alive[idx[still_zero]] = False
    if it >= max_iter and not converged:
        flags.append("max_iter")
    return MasterResult(x_all, alive, H[np.ix_(~still_zero, ~still_zero)],
                        converged, it, flags, trace)


def carry_curvature(H, old_keys, new_keys):
    """Embed an inverse-Hessian estimate indexed by ``old_keys`` into ``new_keys``.

    Keys present in both keep their curvature block; new keys get identity.
    """
    n = len(new_keys)
    H0 = np.eye(n)
    if H is None or len(old_keys) == 0 or H.shape != (len(old_keys),) * 2:
        return H0
    pos = {k: j for j, k in enumerate(new_keys)}
    src = [i for i, k in enumerate(old_keys) if k in pos]
    if not src:
        return H0
    dst = [pos[old_keys[i]] for i in src]
    H0[np.ix_(dst, dst)] = H[np.ix_(src, src)]
    return H0


def _line_search(prob, xs, d, slope, F):
    """Armijo backtracking from min(1, distance to the first sign bound)."""
    rho_max = np.inf
    hit = np.zeros(len(xs), dtype=bool)
    if prob.signs is not None:
        toward = (prob.signs * d < 0) & (xs != 0)
        if toward.any():
            r = -xs[toward] / d[toward]
            rho_max = float(r.min())
            hit[np.flatnonzero(toward)[r <= rho_max * (1 + 1e-12)]] = True
    step = min(1.0, rho_max)
    slack = 8 * np.finfo(float).eps * (abs(F) + 1.0)
    for _ in range(MAX_HALVINGS):
        truncated = step == rho_max
        cand = xs + step * d
        if truncated:
            cand[hit] = 0.0
        if prob.value(cand) <= F + ARMIJO_C1 * step * slope + slack:
            return cand, step, truncated, hit, True
        step *= 0.5
    return xs, 0.0, False, hit, False


def _direction(prob, x, pg, H, blocked, newton):
    free = ~blocked
    d = np.zeros_like(x)
    if newton:
        Hs = prob.hessian(x)[np.ix_(free, free)]
        try:
            factor = linalg.cho_factor(Hs, check_finite=False)
            d[free] = -linalg.cho_solve(factor, pg[free], check_finite=False)
            return d
        except linalg.LinAlgError:
            pass
        jitter = 1e-10 * max(1.0, float(np.abs(np.diag(Hs)).max(initial=1.0)))
        d[free] = -np.linalg.lstsq(Hs + jitter * np.eye(Hs.shape[0]), pg[free], rcond=None)[0]
        return d
    d[free] = -(H[np.ix_(free, free)] @ pg[free])
    return d
