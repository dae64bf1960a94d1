"""Benchmark generator: ancestor graph, perturbed children, signed concentrations."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy import linalg

from ._core import TaskDataset, make_rng, spawn_seeds


def _all_pairs(p: int) -> np.ndarray:
    return np.array(list(combinations(range(p), 2)), dtype=int).reshape(-1, 2)


def _as_edge_set(edges) -> frozenset:
    return frozenset((min(i, j), max(i, j)) for i, j in edges)


def draw_ancestor(p: int, k: int, rng) -> frozenset:
    """Erdos-Renyi G(p, k): k distinct edges drawn uniformly without replacement."""
    pairs = _all_pairs(p)
    if not 0 <= k <= len(pairs):
        raise ValueError(f"k={k} edges impossible on p={p} nodes (max {len(pairs)})")
    chosen = rng.choice(len(pairs), size=k, replace=False)
    return frozenset(map(tuple, pairs[np.sort(chosen)].tolist()))


def perturb_child(ancestor, delta: int, p: int, rng) -> frozenset:
    """Delete delta existing edges and add delta absent ones (edge count preserved)."""
    ancestor = sorted(_as_edge_set(ancestor))
    absent = sorted(set(map(tuple, _all_pairs(p).tolist())) - set(ancestor))
    if delta < 0 or delta > len(ancestor) or delta > len(absent):
        raise ValueError(
            f"cannot perturb {len(ancestor)} edges by delta={delta} "
            f"({len(absent)} absent slots)")
    if delta == 0:
        return frozenset(ancestor)
    removed = rng.choice(len(ancestor), size=delta, replace=False)
    added = rng.choice(len(absent), size=delta, replace=False)
    keep = set(ancestor) - {ancestor[r] for r in removed}
    return frozenset(keep | {absent[a] for a in added})


def draw_signs(p: int, rng) -> np.ndarray:
    """Symmetric Rademacher sign matrix with unit diagonal."""
    upper = rng.choice(np.array([-1.0, 1.0]), size=(p, p))
    S = np.triu(upper, 1)
    S = S + S.T
    np.fill_diagonal(S, 1.0)
    return S


def build_concentration(edges, signs: np.ndarray, deflation: float, p: int) -> np.ndarray:
    """Signed, deflated normalized Laplacian of the graph.

    Diagonal 1; entry (i, j) of an edge is
    ``-deflation * sign_ij / sqrt(d_i d_j) / max(1, r_i, r_j)`` where r_i is
    the off-diagonal row sum of the normalized Laplacian at node i. Those
    row sums can exceed 1 (a node of degree d whose neighbors are leaves
    reaches sqrt(d)), and the extra factor only touches edges at such rows,
    which is enough for every row to sum to at most ``deflation`` and the
    matrix to be strictly diagonally dominant.
    """
    if not 0 < deflation < 1:
        raise ValueError("deflation must lie in (0, 1)")
    edges = sorted(_as_edge_set(edges))
    deg = np.zeros(p)
    for i, j in edges:
        deg[i] += 1
        deg[j] += 1
    M = np.zeros((p, p))
    for i, j in edges:
        M[i, j] = M[j, i] = 1.0 / np.sqrt(deg[i] * deg[j])
    r = np.maximum(1.0, M.sum(axis=1))
    M /= np.maximum(r[:, None], r[None, :])
    K = np.eye(p) - deflation * signs * M
    np.fill_diagonal(K, 1.0)
    return K


@dataclass(frozen=True)
class GroundTruth:
    ancestor: frozenset
    children: tuple
    concentrations: np.ndarray  # (T, p, p)
    signs: np.ndarray
    params: dict

    @property
    def n_tasks(self) -> int:
        return len(self.children)

    @property
    def n_features(self) -> int:
        return self.concentrations.shape[1]

    def edge_set(self, t: int) -> frozenset:
        return self.children[t]

    def signed_edges(self, t: int) -> list:
        K = self.concentrations[t]
        return [(i, j, int(np.sign(K[i, j])), float(K[i, j])) for i, j in sorted(self.children[t])]


def make_ground_truth(p: int = 20, k: int = 20, n_tasks: int = 4, delta: int = 1,
                      deflation: float = 0.9, seed=0) -> GroundTruth:
    """Ancestor graph, T children and their concentration matrices.

    One sign matrix is shared by all children so that edges common to
    several children carry the same sign.
    """
    rng = make_rng(seed)
    ancestor = draw_ancestor(p, k, rng)
    signs = draw_signs(p, rng)
    children = tuple(perturb_child(ancestor, delta, p, rng) for _ in range(n_tasks))
    Ks = np.stack([build_concentration(ch, signs, deflation, p) for ch in children])
    params = dict(p=p, k=k, n_tasks=n_tasks, delta=delta, deflation=deflation,
                  seed=int(seed) if not isinstance(seed, np.random.SeedSequence) else None)
    return GroundTruth(ancestor, children, Ks, signs, params)


def sample_gaussian(K: np.ndarray, n: int, rng) -> np.ndarray:
    """n draws from N(0, K^{-1}) via the Cholesky factor of K."""
    L = linalg.cholesky(K, lower=True)
    z = rng.standard_normal((K.shape[0], n))
    # x = L^{-T} z has covariance (L L^T)^{-1} = K^{-1}
    return linalg.solve_triangular(L.T, z, lower=False).T


def sample_tasks(truth: GroundTruth, n_per_task, seed=0, variable_names=None) -> TaskDataset:
    """Draw each task from its own child stream split off ``seed``."""
    T = truth.n_tasks
    sizes = np.broadcast_to(np.asarray(n_per_task, dtype=int), (T,))
    seeds = spawn_seeds(seed, T)
    tasks = [sample_gaussian(truth.concentrations[t], int(sizes[t]), make_rng(seeds[t]))
             for t in range(T)]
    return TaskDataset(tasks, variable_names, [f"task{t + 1}" for t in range(T)])


def simulate(p: int = 20, k: int = 20, n_tasks: int = 4, delta: int = 1, n_per_task=25,
             deflation: float = 0.9, seed=0):
    """Ground truth and data for one replicate; both derived from ``seed``."""
    truth_seed, data_seed = spawn_seeds(seed, 2)
    truth = make_ground_truth(p, k, n_tasks, delta, deflation, truth_seed)
    truth.params["seed"] = seed if isinstance(seed, int) else None
    truth.params["n_per_task"] = np.broadcast_to(np.asarray(n_per_task), (n_tasks,)).tolist()
    return truth, sample_tasks(truth, n_per_task, data_seed)
