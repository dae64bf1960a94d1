"""Text file formats: task data, edge lists, coefficients, PR tables, manifests.

All files are tab-separated with a header row, except task data which is
CSV (one file per task, header of variable names). Floats are written
with ``repr`` so they round-trip exactly. Node indices are 0-based.
"""

from __future__ import annotations

import csv
import json
import platform
from pathlib import Path

import numpy as np

from ._core import DataError, TaskDataset

TASKS_MANIFEST = "tasks.tsv"
EDGE_HEADER = ("task", "node_i", "node_j", "sign", "weight")
PR_HEADER = ("lambda", "precision", "recall", "true_positives", "selected", "total_true",
             "empty_selection")


def fmt(x) -> str:
    """Shortest decimal string that reads back to the same float."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_table(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(v if isinstance(v, str) else fmt(v) for v in row) + "\n")


def read_table(path) -> tuple:
    """Return ``(header, rows)`` of a TSV file; rows are lists of strings."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from exc
    if not lines:
        raise DataError(f"{path}: empty file")
    header = lines[0].split("\t")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        row = line.split("\t")
        if len(row) != len(header):
            raise DataError(f"{path}, line {lineno}: expected {len(header)} fields, got {len(row)}")
        rows.append(row)
    return header, rows


def _expect_header(path, header, expected) -> None:
    if tuple(header) != tuple(expected):
        raise DataError(f"{path}, line 1: expected header {' '.join(expected)!r} (tab-separated)")


# -- task data ---------------------------------------------------------------

def read_task_csv(path) -> tuple:
    """Read one task file; returns ``(variable_names, array)``."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                names = [h.strip() for h in next(reader)]
            except StopIteration:
                raise DataError(f"{path}: empty file") from None
            rows = []
            for row in reader:
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != len(names):
                    raise DataError(f"{path}, line {reader.line_num}: expected {len(names)} "
                                    f"values, got {len(row)}")
                try:
                    rows.append([float(c) for c in row])
                except ValueError:
                    bad = next(c for c in row if not _is_float(c))
                    raise DataError(f"{path}, line {reader.line_num}: "
                                    f"cannot parse {bad!r} as a number") from None
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from exc
    return names, np.array(rows, dtype=float).reshape(len(rows), len(names))


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def read_tasks(source) -> TaskDataset:
    """Load tasks from a manifest (``tasks.tsv`` or its directory) or a list of CSV files.

    The manifest lists ``task``, ``file`` (relative to the manifest) and
    ``n`` per row; ``n`` is checked against the file.
    """
    if isinstance(source, (str, Path)):
        src = Path(source)
        manifest = src / TASKS_MANIFEST if src.is_dir() else src
        if manifest.suffix == ".csv":
            return read_tasks([manifest])
        header, rows = read_table(manifest)
        _expect_header(manifest, header, ("task", "file", "n"))
        if not rows:
            raise DataError(f"{manifest}: no tasks listed")
        names, arrays, var_names = [], [], None
        for lineno, (task, fname, n) in enumerate(rows, start=2):
            cols, X = read_task_csv(manifest.parent / fname)
            if not n.isdigit() or int(n) != X.shape[0]:
                raise DataError(f"{manifest}, line {lineno}: task {task!r} declares n={n} "
                                f"but {fname} has {X.shape[0]} rows")
            if var_names is not None and cols != var_names:
                raise DataError(f"{manifest.parent / fname}, line 1: variable names differ "
                                f"from the first task")
            var_names = cols
            names.append(task)
            arrays.append(X)
        return TaskDataset(arrays, tuple(var_names), tuple(names))
    files = [Path(f) for f in source]
    if not files:
        raise DataError("no task files given")
    arrays, var_names = [], None
    for f in files:
        cols, X = read_task_csv(f)
        if var_names is not None and cols != var_names:
            raise DataError(f"{f}, line 1: variable names differ from {files[0]}")
        var_names = cols
        arrays.append(X)
    return TaskDataset(arrays, tuple(var_names), tuple(f.stem for f in files))


def write_tasks(data: TaskDataset, out_dir) -> Path:
    """Write one CSV per task plus the ``tasks.tsv`` manifest; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    p = data.n_features
    var_names = list(data.variable_names or [f"V{j + 1}" for j in range(p)])
    task_names = list(data.task_names or [f"task{t + 1}" for t in range(data.n_tasks)])
    rows = []
    for name, X in zip(task_names, data.tasks):
        fname = f"{name}.csv"
        with open(out / fname, "w", newline="") as fh:
            fh.write(",".join(var_names) + "\n")
            for r in X:
                fh.write(",".join(fmt(v) for v in r) + "\n")
        rows.append((name, fname, X.shape[0]))
    write_table(out / TASKS_MANIFEST, ("task", "file", "n"), rows)
    return out / TASKS_MANIFEST


# -- edges and coefficients --------------------------------------------------

def edge_rows(task: str, edges) -> list:
    return [(task, int(i), int(j), int(s), float(w)) for i, j, s, w in edges]


def write_edges(path, rows) -> None:
    """Rows are written as given: task order first, then ``(node_i, node_j)``."""
    write_table(path, EDGE_HEADER, rows)


def read_edges(path) -> dict:
    """Edge list file -> {task: [(i, j, sign, weight), ...]} in file order."""
    header, rows = read_table(path)
    _expect_header(path, header, EDGE_HEADER)
    out = {}
    for lineno, (task, i, j, s, w) in enumerate(rows, start=2):
        try:
            i, j, s, w = int(i), int(j), int(s), float(w)
        except ValueError:
            raise DataError(f"{path}, line {lineno}: malformed edge row") from None
        if not 0 <= i < j:
            raise DataError(f"{path}, line {lineno}: need 0 <= node_i < node_j, got {i}, {j}")
        out.setdefault(task, []).append((i, j, s, w))
    return out


def write_matrix(path, M) -> None:
    M = np.atleast_2d(M)
    write_table(path, [f"c{j}" for j in range(M.shape[1])], M.tolist())


def read_matrix(path) -> np.ndarray:
    _, rows = read_table(path)
    return np.array([[float(v) for v in r] for r in rows])


# -- PR tables ---------------------------------------------------------------

def pr_rows(points) -> list:
    return [(pt.lam, pt.precision, pt.recall, pt.true_positives, pt.selected, pt.total_true,
             pt.empty_selection) for pt in points]


def write_pr_table(path, points) -> None:
    write_table(path, PR_HEADER, pr_rows(points))


def read_pr_table(path) -> list:
    from .evaluation import PRPoint

    header, rows = read_table(path)
    _expect_header(path, header, PR_HEADER)
    return [PRPoint(float(a), float(b), float(c), int(d), int(e), int(f), g == "1")
            for a, b, c, d, e, f, g in rows]


# -- manifests ---------------------------------------------------------------

def versions() -> dict:
    import scipy

    from . import __version__

    return {"jointggm": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def write_manifest(out_dir, command: str, config: dict, extra: dict | None = None) -> Path:
    """``manifest.json`` with the command, its full config and library versions."""
    body = {"command": command, "config": config, "versions": versions()}
    if extra:
        body.update(extra)
    path = Path(out_dir) / "manifest.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(body, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def read_manifest(path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    try:
        return json.loads(path.read_text())
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}, line {exc.lineno}: {exc.msg}") from exc


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")
