"""Cumulative precision/recall over T networks and curve aggregation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class PRPoint:
    lam: float
    precision: float
    recall: float
    true_positives: int
    selected: int
    total_true: int
    empty_selection: bool = False


@dataclass
class PRCurve:
    method: str
    points: list
    n_replicates: int = 1
    aggregation: str = "single"
    precision_se: np.ndarray | None = None
    recall_se: np.ndarray | None = None
    replicate_points: list = field(default_factory=list)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([pt.lam for pt in self.points])

    @property
    def precision(self) -> np.ndarray:
        return np.array([pt.precision for pt in self.points])

    @property
    def recall(self) -> np.ndarray:
        return np.array([pt.recall for pt in self.points])


def _undirected(edges) -> set:
    out = set()
    for e in edges:
        i, j = int(e[0]), int(e[1])
        if i != j:
            out.add((min(i, j), max(i, j)))
    return out


def _signed(edges) -> dict:
    return {(min(int(e[0]), int(e[1])), max(int(e[0]), int(e[1]))): int(np.sign(e[2]))
            for e in edges}


def score_edges(predicted, truth, lam: float = float("nan"), signed: bool = False) -> PRPoint:
    """Score per-task edge lists against per-task true edge lists.

    ``predicted[t]`` and ``truth[t]`` are iterables of ``(i, j, ...)``; with
    ``signed=True`` the third element is a sign and a detection counts only
    when the signs agree.
    """
    if len(predicted) != len(truth):
        raise ValueError(f"task count mismatch: {len(predicted)} predicted vs {len(truth)} true")
    tp = sel = tot = 0
    for pred_t, true_t in zip(predicted, truth):
        if signed:
            P, E = _signed(pred_t), _signed(true_t)
            tp += sum(1 for e, s in P.items() if e in E and E[e] == s)
        else:
            P, E = _undirected(pred_t), _undirected(true_t)
            tp += len(P & E)
        sel += len(P)
        tot += len(E)
    precision = tp / sel if sel else 1.0
    recall = tp / tot if tot else 1.0
    return PRPoint(float(lam), precision, recall, tp, sel, tot, sel == 0)


def score(inferred, truth, signed: bool = False) -> PRPoint:
    """Cumulative precision/recall of an InferredGraphSet against a GroundTruth."""
    if inferred.n_tasks != truth.n_tasks:
        raise ValueError(f"inferred {inferred.n_tasks} tasks, truth has {truth.n_tasks}")
    if inferred.coef.shape[1] != truth.n_features:
        raise ValueError(
            f"inferred graphs have {inferred.coef.shape[1]} nodes, truth has {truth.n_features}")
    true_edges = [truth.signed_edges(t) for t in range(truth.n_tasks)]
    return score_edges(inferred.edges, true_edges, inferred.lam, signed)


def aggregate_curves(replicates, method: str = "") -> PRCurve:
    """Average replicate PR points at each fixed lambda.

    ``replicates`` is a list (one per replicate) of lists of PRPoint on the
    same lambda grid.
    """
    replicates = [list(r) for r in replicates]
    if not replicates:
        raise ValueError("no replicates to aggregate")
    grid = [pt.lam for pt in replicates[0]]
    for r in replicates[1:]:
        if len(r) != len(grid) or any(a.lam != b for a, b in zip(r, grid)):
            raise ValueError("replicates were evaluated on different lambda grids")
    prec = np.array([[pt.precision for pt in r] for r in replicates])
    rec = np.array([[pt.recall for pt in r] for r in replicates])
    R = len(replicates)
    points = []
    for k, lam in enumerate(grid):
        col = [r[k] for r in replicates]
        points.append(PRPoint(
            lam, float(prec[:, k].mean()), float(rec[:, k].mean()),
            sum(pt.true_positives for pt in col), sum(pt.selected for pt in col),
            sum(pt.total_true for pt in col), any(pt.empty_selection for pt in col)))
    ddof = 1 if R > 1 else 0
    se = lambda a: a.std(axis=0, ddof=ddof) / np.sqrt(R)  # noqa: E731
    return PRCurve(method, points, R, "mean" if R > 1 else "single", se(prec), se(rec),
                   replicates)


def auc_pr(curve) -> float:
    """Trapezoidal area under precision as a function of recall, clipped to [0, 1].

    Accepts a PRCurve or a sequence of PRPoint.
    """
    points = curve.points if isinstance(curve, PRCurve) else list(curve)
    if len(points) < 2:
        raise ValueError("need at least two points for an area")
    rec = np.array([pt.recall for pt in points])
    prec = np.array([pt.precision for pt in points])
    order = np.lexsort((-prec, rec))
    area = np.trapezoid(prec[order], rec[order])
    return float(np.clip(area, 0.0, 1.0))


def auc_summary(replicate_curves) -> tuple:
    """Mean and standard error of per-replicate AUC-PR."""
    aucs = np.array([auc_pr(r) for r in replicate_curves])
    R = len(aucs)
    se = aucs.std(ddof=1) / np.sqrt(R) if R > 1 else 0.0
    return float(aucs.mean()), float(se), aucs
