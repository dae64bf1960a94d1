"""Replicated simulation benchmark: simulate, infer along a grid, score, aggregate.

Every replicate of a method is solved on the same absolute lambda grid so
that replicate curves can be averaged at fixed lambda. The grid runs from
the largest per-replicate lambda_max down to ``grid_ratio`` times it.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from joblib import Parallel, delayed
from threadpoolctl import threadpool_limits

from ._core import METHODS, PenaltySpec, spawn_seeds
from .engine import _prepare, global_lambda_max, lambda_grid, path_from_covariance
from .evaluation import PRCurve, aggregate_curves, auc_pr, score
from .simulate import simulate


@dataclass(frozen=True)
class SweepConfig:
    p: int = 20
    k: int = 20
    n_tasks: int = 4
    delta: int = 1
    n_per_task: int = 25
    deflation: float = 0.9
    methods: tuple = METHODS
    replicates: int = 20
    seed: int = 0
    grid_size: int = 30
    grid_ratio: float = 0.01
    symmetrization: str = "AND"
    alpha: float = 0.5

    def __post_init__(self):
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["methods"] = list(self.methods)
        return d


@dataclass
class SweepResult:
    config: SweepConfig
    lambdas: dict  # method -> grid
    curves: dict  # method -> aggregated PRCurve
    aucs: dict  # method -> per-replicate AUC-PR
    n_unconverged: dict = field(default_factory=dict)  # method -> (node, lambda) failures

    def auc_mean(self, method: str) -> float:
        return float(np.mean(self.aucs[method]))

    def auc_se(self, method: str) -> float:
        a = np.asarray(self.aucs[method])
        return float(a.std(ddof=1) / np.sqrt(a.size)) if a.size > 1 else 0.0


def _spec(config: SweepConfig, method: str) -> PenaltySpec:
    alpha = config.alpha if method == "intertwined" else 0.5
    return PenaltySpec(method, 0.0, alpha)


def _replicate_data(config: SweepConfig, seed):
    return simulate(config.p, config.k, config.n_tasks, config.delta, config.n_per_task,
                    config.deflation, seed)


def _lambda_max(config, method, seed) -> float:
    with threadpool_limits(1):
        _, data = _replicate_data(config, seed)
        spec = _spec(config, method)
        return global_lambda_max(_prepare(data, spec, True), spec)


def _run_one(config, method, seed, lambdas):
    with threadpool_limits(1):
        truth, data = _replicate_data(config, seed)
        spec = _spec(config, method)
        cov = _prepare(data, spec, True)
        _, graphs = path_from_covariance(cov, spec, symmetrization=config.symmetrization,
                                         lambdas=lambdas)
        points = [score(g, truth) for g in graphs]
        bad = sum(not d.converged for g in graphs for d in g.diagnostics)
        return points, bad


def sweep(config: SweepConfig, n_jobs: int = 1) -> SweepResult:
    """Run every method on ``config.replicates`` simulated replicates.

    Replicate r uses the r-th child of ``SeedSequence(config.seed)``, so
    results do not depend on ``n_jobs``.
    """
    seeds = spawn_seeds(config.seed, config.replicates)
    jobs = [(m, r) for m in config.methods for r in range(config.replicates)]
    run = Parallel(n_jobs=n_jobs) if n_jobs != 1 else None

    def _map(fn, args):
        if run is None:
            return [fn(*a) for a in args]
        return run(delayed(fn)(*a) for a in args)

    lam_max = _map(_lambda_max, [(config, m, seeds[r]) for m, r in jobs])
    lambdas = {}
    for m in config.methods:
        top = max(lm for (mm, _), lm in zip(jobs, lam_max) if mm == m)
        lambdas[m] = lambda_grid(top, config.grid_size, config.grid_ratio)

    runs = _map(_run_one, [(config, m, seeds[r], lambdas[m]) for m, r in jobs])
    curves, aucs, failures = {}, {}, {}
    for m in config.methods:
        reps = [pts for (mm, _), (pts, _) in zip(jobs, runs) if mm == m]
        curves[m] = aggregate_curves(reps, m)
        aucs[m] = np.array([auc_pr(pts) for pts in reps])
        failures[m] = sum(bad for (mm, _), (_, bad) in zip(jobs, runs) if mm == m)
    return SweepResult(config, lambdas, curves, aucs, failures)


def ordering_margins(result: SweepResult, order) -> list:
    """Paired AUC differences between adjacent methods in ``order``.

    Returns ``(a, b, mean difference, standard error of the difference)``
    per adjacent pair; the replicates are shared, so the paired difference
    is the natural comparison.
    """
    out = []
    for a, b in zip(order, order[1:]):
        d = np.asarray(result.aucs[a]) - np.asarray(result.aucs[b])
        se = float(d.std(ddof=1) / np.sqrt(d.size)) if d.size > 1 else 0.0
        out.append((a, b, float(d.mean()), se))
    return out


__all__ = ["SweepConfig", "SweepResult", "sweep", "ordering_margins", "PRCurve"]
