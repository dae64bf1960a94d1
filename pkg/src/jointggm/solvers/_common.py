from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..covariance import BlockCovariance
from ..penalties import SubgradientCertificate

#: Relative KKT tolerance; the absolute target is this times (lam + ||c||_inf).
RELATIVE_TOL = 1e-8


@dataclass
class SolveResult:
    """Solution of one neighborhood sub-problem plus diagnostics."""

    beta: np.ndarray
    certificate: SubgradientCertificate
    converged: bool
    n_iter: int
    tol: float
    objective: float
    n_master: int = 0
    flags: list = field(default_factory=list)
    objective_trace: list = field(default_factory=list)

    @property
    def residual(self) -> float:
        return self.certificate.residual


def certificate_tolerance(problem: BlockCovariance, lam: float) -> float:
    scale = lam + float(np.abs(problem.linear).max(initial=0.0))
    return RELATIVE_TOL * max(scale, np.finfo(float).tiny)


def submatrix(problem: BlockCovariance, idx: np.ndarray) -> np.ndarray:
    """Dense ``C[idx][:, idx]`` read off the diagonal blocks."""
    m = problem.n_features
    task, feat = np.divmod(np.asarray(idx, dtype=int), m)
    same = task[:, None] == task[None, :]
    vals = problem.quad_blocks[task[:, None], feat[:, None], feat[None, :]]
    return np.where(same, vals, 0.0)
