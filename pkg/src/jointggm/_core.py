"""Shared data containers, validation and the random-number contract."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

METHODS = ("independent", "pooled", "intertwined", "group", "coop")

#: |beta| below this is treated as an exact zero everywhere in the package.
ZERO_TOL = 1e-10

#: Bit generator used for every random stream (PCG64 seeded via SeedSequence).
RNG_ALGORITHM = "PCG64"


class DataError(ValueError):
    """Raised when input observations violate the dataset invariants."""


class SolverError(RuntimeError):
    """Raised when a sub-problem cannot be solved at all."""


@dataclass(frozen=True)
class TaskDataset:
    """T observation matrices sharing the same p variables.

    Parameters
    ----------
    tasks : list of ndarray, each of shape (n_t, p)
    variable_names : list of str, length p
    task_names : list of str, length T
    """

    tasks: tuple
    variable_names: tuple
    task_names: tuple

    def __init__(self, tasks, variable_names=None, task_names=None):
        arrays = tuple(np.array(x, dtype=float, copy=True) for x in tasks)
        for a in arrays:
            a.setflags(write=False)
        if variable_names is None:
            p = arrays[0].shape[1] if arrays and arrays[0].ndim == 2 else 0
            variable_names = [f"x{j + 1}" for j in range(p)]
        if task_names is None:
            task_names = [f"task{t + 1}" for t in range(len(arrays))]
        object.__setattr__(self, "tasks", arrays)
        object.__setattr__(self, "variable_names", tuple(str(v) for v in variable_names))
        object.__setattr__(self, "task_names", tuple(str(v) for v in task_names))

    @property
    def n_tasks(self) -> int:
        return len(self.tasks)

    @property
    def n_features(self) -> int:
        return self.tasks[0].shape[1]

    @property
    def task_sizes(self) -> np.ndarray:
        return np.array([x.shape[0] for x in self.tasks], dtype=int)


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty configuration for one inference run.

    ``task_weights=None`` resolves to 1/n_t for the l1-type methods
    (independent, pooled, intertwined) and to 1 for group/coop.
    """

    method: str = "intertwined"
    lam: float = 0.0
    alpha: float = 0.5
    task_weights: tuple | None = field(default=None)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ValueError(f"lambda must be a nonnegative finite number, got {self.lam}")
        if self.method == "intertwined":
            if not 0.0 <= self.alpha <= 1.0:
                raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        else:
            object.__setattr__(self, "alpha", 0.5)
        if self.task_weights is not None:
            w = tuple(float(v) for v in self.task_weights)
            if any(v < 0 or not np.isfinite(v) for v in w):
                raise ValueError("task weights must be nonnegative and finite")
            object.__setattr__(self, "task_weights", w)

    def with_lambda(self, lam: float) -> "PenaltySpec":
        return PenaltySpec(self.method, lam, self.alpha, self.task_weights)

    def resolve_weights(self, task_sizes: Sequence[int]) -> np.ndarray:
        """Per-task penalty weights for the stacked sub-problem."""
        sizes = np.asarray(task_sizes, dtype=float)
        if self.method == "pooled":
            n_tasks = 1
            default = np.array([1.0 / sizes.sum()])
        else:
            n_tasks = len(sizes)
            if self.method in ("group", "coop"):
                default = np.ones(n_tasks)
            else:
                default = 1.0 / sizes
        if self.task_weights is None:
            return default
        w = np.asarray(self.task_weights, dtype=float)
        if w.shape != (n_tasks,):
            raise ValueError(f"expected {n_tasks} task weights, got {w.size}")
        return w


def make_rng(seed) -> np.random.Generator:
    """Return the package's generator for ``seed`` (an int or a SeedSequence)."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def spawn_seeds(seed, n: int) -> list:
    """Split ``seed`` into ``n`` independent child seed sequences.

    Children depend only on (seed, position). Unlike ``SeedSequence.spawn``
    this does not advance the parent, so repeated calls return the same
    children whether or not ``seed`` was pickled to a worker in between.
    """
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(int(seed))
    return [np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key + (i,),
                                   pool_size=seed.pool_size) for i in range(n)]


def validate_dataset(data: TaskDataset) -> TaskDataset:
    """Check the dataset invariants and return ``data`` unchanged."""
    if data.n_tasks < 1:
        raise DataError("dataset must contain at least one task")
    if len(data.task_names) != data.n_tasks:
        raise DataError(
            f"{len(data.task_names)} task names given for {data.n_tasks} tasks")
    p = None
    for t, x in enumerate(data.tasks):
        name = data.task_names[t]
        if x.ndim != 2:
            raise DataError(f"task {name!r}: expected a 2-d array, got {x.ndim}-d")
        if p is None:
            p = x.shape[1]
        elif x.shape[1] != p:
            raise DataError(
                f"dimension mismatch: task {data.task_names[0]!r} has {p} variables, "
                f"task {name!r} has {x.shape[1]}")
        if x.shape[0] < 2:
            raise DataError(f"task {name!r} has {x.shape[0]} observations; at least 2 required")
        bad = np.argwhere(~np.isfinite(x))
        if bad.size:
            row, col = bad[0]
            raise DataError(
                f"non-finite entry {x[row, col]!r} in task {name!r} "
                f"(task {t + 1}, row {row + 1}, column {col + 1})")
    if len(data.variable_names) != p:
        raise DataError(f"{len(data.variable_names)} variable names given for {p} variables")
    if len(set(data.variable_names)) != p:
        raise DataError("variable names must be unique")
    return data


def center_columns(data: TaskDataset, scale: bool = False) -> TaskDataset:
    """Remove each task's own column means (optionally divide by std)."""
    tasks = []
    for x in data.tasks:
        xc = x - x.mean(axis=0)
        # a second pass removes the O(eps) residual mean left by the first
        xc -= xc.mean(axis=0)
        if scale:
            sd = np.sqrt((xc ** 2).mean(axis=0))
            sd[sd == 0] = 1.0
            xc = xc / sd
        tasks.append(xc)
    return TaskDataset(tasks, data.variable_names, data.task_names)
