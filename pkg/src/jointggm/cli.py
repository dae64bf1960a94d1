"""Command-line interface: ``jointggm {simulate,infer,check,eval,sweep,rerun}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 a node sub-problem did
not converge (outputs are still written). The default worker count comes
from the ``JOINTGGM_WORKERS`` environment variable (1 if unset); outputs
do not depend on it.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from ._core import METHODS, DataError, PenaltySpec, SolverError
from .benchmark import SweepConfig, sweep
from .engine import _prepare, certify, global_lambda_max, lambda_grid, path_from_covariance
from .evaluation import score_edges
from .simulate import build_concentration, simulate

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 0, 1, 2, 3
WORKERS_ENV = "JOINTGGM_WORKERS"
TRUTH_INDEX = "index.tsv"

log = logging.getLogger("jointggm")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if n == 0:
        raise UsageError(f"{WORKERS_ENV} must be nonzero")
    return n


# -- simulate ----------------------------------------------------------------

def cmd_simulate(args) -> int:
    out = Path(args.out)
    truth, data = simulate(args.p, args.k, args.tasks, args.delta, args.n, args.deflation,
                           args.seed)
    io.write_tasks(data, out / "data")
    tdir = out / "truth"
    K_anc = build_concentration(truth.ancestor, truth.signs, args.deflation, args.p)
    io.write_edges(tdir / "ancestor.tsv",
                   [("ancestor", i, j, int(np.sign(K_anc[i, j])), K_anc[i, j])
                    for i, j in sorted(truth.ancestor)])
    index = []
    for t, name in enumerate(data.task_names):
        io.write_edges(tdir / f"{name}.tsv",
                       [(name, i, j, s, w) for i, j, s, w in truth.signed_edges(t)])
        io.write_matrix(tdir / f"K_{name}.tsv", truth.concentrations[t])
        index.append((name, f"{name}.tsv"))
    io.write_table(tdir / TRUTH_INDEX, ("task", "file"), index)
    io.write_manifest(out, "simulate", _config(args))
    log.info("wrote %d tasks of %d x %d to %s", args.tasks, args.n, args.p, out)
    return EXIT_OK


def read_truth(truth_dir) -> tuple:
    """Child edge lists in task order: ``(task_names, [edges_t, ...])``."""
    tdir = Path(truth_dir)
    header, rows = io.read_table(tdir / TRUTH_INDEX)
    if tuple(header) != ("task", "file"):
        raise DataError(f"{tdir / TRUTH_INDEX}, line 1: expected header task, file")
    names, edges = [], []
    for task, fname in rows:
        per_task = io.read_edges(tdir / fname)
        names.append(task)
        edges.append(per_task.get(task, []))
    return names, edges


# -- infer -------------------------------------------------------------------

def cmd_infer(args) -> int:
    data = load_data(args.data)
    spec = PenaltySpec(args.method, 0.0, args.alpha,
                       tuple(args.task_weights) if args.task_weights else None)
    cov = _prepare(data, spec, not args.no_center)
    lam_max = global_lambda_max(cov, spec)
    if args.lambdas:
        lambdas = np.array(sorted(set(args.lambdas), reverse=True), dtype=float)
    else:
        lambdas = lambda_grid(lam_max, args.grid_size, args.grid_ratio)
    _, graphs = path_from_covariance(cov, spec, symmetrization=args.symmetrization,
                                     n_jobs=args.workers, lambdas=lambdas, data=data)
    out = Path(args.out)
    write_inference(out, data, graphs)
    n_bad = sum(not d.converged for g in graphs for d in g.diagnostics)
    io.write_manifest(out, "infer", _config(args), {
        "lambda_max": lam_max, "tasks": list(data.task_names),
        "variables": list(data.variable_names), "task_sizes": data.task_sizes.tolist(),
        "unconverged_nodes": n_bad})
    if n_bad:
        log.warning("%d (node, lambda) sub-problems did not converge", n_bad)
        return EXIT_SOLVER
    return EXIT_OK


def write_inference(out: Path, data, graphs) -> None:
    tasks = data.task_names
    io.write_table(out / "lambdas.tsv",
                   ("index", "lambda", "pseudo_loglik", "n_edges", "converged"),
                   [(k, g.lam, g.pseudo_loglik, g.n_edges, g.converged)
                    for k, g in enumerate(graphs)])
    diag_rows, coef_rows = [], []
    for k, g in enumerate(graphs):
        rows = []
        for t, name in enumerate(tasks):
            rows += io.edge_rows(name, g.edges[t])
        io.write_edges(out / "edges" / f"lambda_{k:03d}.tsv", rows)
        for d in g.diagnostics:
            diag_rows.append((k, d.node, d.residual, d.tol, d.converged, d.n_iter,
                              ",".join(d.flags) or "-", d.error or "-"))
        T, p, _ = g.coef.shape
        for t in range(T):
            nz = np.argwhere(g.coef[t] != 0)
            coef_rows += [(k, tasks[t], int(i), int(j), g.coef[t, i, j]) for i, j in nz]
    io.write_table(out / "diagnostics.tsv",
                   ("lambda_index", "node", "residual", "tolerance", "converged", "n_iter",
                    "flags", "error"), diag_rows)
    io.write_table(out / "coefficients.tsv",
                   ("lambda_index", "task", "node", "variable", "coef"), coef_rows)


# -- check -------------------------------------------------------------------

def cmd_check(args) -> int:
    """Re-verify the optimality certificate of every stored coefficient vector."""
    run = Path(args.inferred)
    manifest = io.read_manifest(run)
    if manifest.get("command") != "infer":
        raise DataError(f"{run}: not an infer output (command={manifest.get('command')!r})")
    cfg = manifest["config"]
    data = load_data(args.data) if args.data else _data_from_config(cfg)
    spec = PenaltySpec(cfg["method"], 0.0, cfg["alpha"],
                       tuple(cfg["task_weights"]) if cfg.get("task_weights") else None)
    cov = _prepare(data, spec, not cfg.get("no_center", False))
    _, lam_rows = io.read_table(run / "lambdas.tsv")
    _, coef_rows = io.read_table(run / "coefficients.tsv")
    tasks = list(data.task_names)
    T, p = data.n_tasks, data.n_features
    coefs = {int(r[0]): np.zeros((T, p, p)) for r in lam_rows}
    for lineno, (k, task, i, j, c) in enumerate(coef_rows, start=2):
        if task not in tasks:
            raise DataError(f"{run / 'coefficients.tsv'}, line {lineno}: unknown task {task!r}")
        coefs[int(k)][tasks.index(task), int(i), int(j)] = float(c)
    worst, failures = 0.0, 0
    rows = []
    for k, lam, *_ in lam_rows:
        res = certify(cov, spec.with_lambda(float(lam)), coefs[int(k)])
        ratio = res[:, 0] / res[:, 1]
        worst = max(worst, float(ratio.max()))
        failures += int((ratio >= 1).sum())
        rows += [(int(k), i, res[i, 0], res[i, 1], bool(ratio[i] < 1)) for i in range(p)]
    io.write_table(run / "check.tsv", ("lambda_index", "node", "residual", "tolerance", "ok"),
                   rows)
    print(f"checked {len(rows)} (lambda, node) certificates; worst residual/tolerance "
          f"{worst:.3g}; failures {failures}")
    return EXIT_SOLVER if failures else EXIT_OK


def load_data(paths):
    """One manifest (or its directory), or one CSV file per task."""
    if len(paths) == 1 and not str(paths[0]).endswith(".csv"):
        return io.read_tasks(paths[0])
    return io.read_tasks(paths)


def _data_from_config(cfg):
    paths = cfg.get("data") or []
    if not paths:
        raise UsageError("the run manifest names no data; pass --data")
    return load_data(paths)


# -- eval --------------------------------------------------------------------

def cmd_eval(args) -> int:
    run = Path(args.inferred)
    names, truth = read_truth(args.truth)
    _, lam_rows = io.read_table(run / "lambdas.tsv")
    points = []
    for k, lam, *_ in lam_rows:
        pred = io.read_edges(run / "edges" / f"lambda_{int(k):03d}.tsv")
        unknown = set(pred) - set(names)
        if unknown:
            raise DataError(f"inferred tasks {sorted(unknown)} are not in the truth index")
        predicted = [[(i, j, s) for i, j, s, _ in pred.get(t, [])] for t in names]
        true_edges = [[(i, j, s) for i, j, s, _ in e] for e in truth]
        points.append(score_edges(predicted, true_edges, float(lam), args.signed))
    out = Path(args.out) if args.out else run / "pr.tsv"
    io.write_pr_table(out, points)
    log.info("wrote %s", out)
    return EXIT_OK


# -- sweep -------------------------------------------------------------------

def cmd_sweep(args) -> int:
    config = SweepConfig(p=args.p, k=args.k, n_tasks=args.tasks, delta=args.delta,
                         n_per_task=args.n, deflation=args.deflation,
                         methods=tuple(args.methods), replicates=args.replicates,
                         seed=args.seed, grid_size=args.grid_size, grid_ratio=args.grid_ratio,
                         symmetrization=args.symmetrization, alpha=args.alpha)
    result = sweep(config, n_jobs=args.workers)
    out = Path(args.out)
    write_sweep(out, result)
    n_bad = sum(result.n_unconverged.values())
    io.write_manifest(out, "sweep", config.to_dict(), {"unconverged": result.n_unconverged})
    for m in config.methods:
        print(f"{m:12s} AUC-PR {result.auc_mean(m):.4f} +/- {result.auc_se(m):.4f}")
    return EXIT_SOLVER if n_bad else EXIT_OK


def write_sweep(out: Path, result) -> None:
    long_rows, auc_rows, rep_rows = [], [], []
    for m, curve in result.curves.items():
        for r, pts in enumerate(curve.replicate_points):
            for k, pt in enumerate(pts):
                long_rows.append((m, k, pt.lam, r, pt.precision, pt.recall, pt.true_positives,
                                  pt.selected, pt.total_true, pt.empty_selection))
            rep_rows.append((m, r, result.aucs[m][r]))
        io.write_table(out / f"pr_{m}.tsv", io.PR_HEADER + ("precision_se", "recall_se"),
                       [row + (ps, rs) for row, ps, rs in
                        zip(io.pr_rows(curve.points), curve.precision_se, curve.recall_se)])
        auc_rows.append((m, result.auc_mean(m), result.auc_se(m), len(result.aucs[m])))
    io.write_table(out / "curves.tsv",
                   ("method", "lambda_index", "lambda", "replicate") + io.PR_HEADER[1:],
                   long_rows)
    io.write_table(out / "auc.tsv", ("method", "auc_mean", "auc_se", "replicates"), auc_rows)
    io.write_table(out / "auc_replicates.tsv", ("method", "replicate", "auc"), rep_rows)


# -- rerun -------------------------------------------------------------------

RERUNNABLE = {"simulate": cmd_simulate, "infer": cmd_infer, "sweep": cmd_sweep}


def cmd_rerun(args) -> int:
    """Repeat a run from its manifest into a new output directory."""
    manifest = io.read_manifest(args.manifest)
    command = manifest.get("command")
    if command not in RERUNNABLE:
        raise DataError(f"{args.manifest}: cannot rerun command {command!r}")
    cfg = dict(manifest["config"])
    if command == "sweep":
        # sweep manifests store the SweepConfig field names
        cfg = {"p": cfg["p"], "k": cfg["k"], "tasks": cfg["n_tasks"], "delta": cfg["delta"],
               "n": cfg["n_per_task"], "deflation": cfg["deflation"],
               "methods": cfg["methods"], "replicates": cfg["replicates"], "seed": cfg["seed"],
               "grid_size": cfg["grid_size"], "grid_ratio": cfg["grid_ratio"],
               "symmetrization": cfg["symmetrization"], "alpha": cfg["alpha"]}
    ns = argparse.Namespace(**cfg, out=args.out, workers=args.workers, verbose=args.verbose,
                            command=command)
    return RERUNNABLE[command](ns)


# -- parser ------------------------------------------------------------------

def _config(args) -> dict:
    skip = {"func", "workers", "verbose", "out", "command"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def _add_protocol(sp, n_default):
    sp.add_argument("--p", type=_positive_int, default=20, help="variables per task")
    sp.add_argument("--k", type=int, default=20, help="ancestor edges")
    sp.add_argument("--tasks", type=_positive_int, default=4, help="number of tasks T")
    sp.add_argument("--delta", type=int, default=1, help="edges added and deleted per child")
    sp.add_argument("--n", type=_positive_int, default=n_default, help="observations per task")
    sp.add_argument("--deflation", type=float, default=0.9)
    sp.add_argument("--seed", type=int, default=0)


def _add_grid(sp, size, ratio):
    sp.add_argument("--grid-size", type=_positive_int, default=size)
    sp.add_argument("--grid-ratio", type=float, default=ratio,
                    help="smallest lambda as a fraction of lambda_max")
    sp.add_argument("--symmetrization", choices=("AND", "OR"), default="AND")
    sp.add_argument("--alpha", type=float, default=0.5, help="intertwined blend weight")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="jointggm", description="Joint inference of sparse Gaussian graphs.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("simulate", help="draw ground truth and task data")
    _add_protocol(sp, 25)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("infer", help="infer graphs from task CSV files")
    sp.add_argument("--data", nargs="+", required=True,
                    help="tasks.tsv manifest, its directory, or CSV files (one per task)")
    sp.add_argument("--method", choices=METHODS, default="intertwined")
    sp.add_argument("--lambda", dest="lambdas", type=float, nargs="+",
                    help="explicit penalty levels (default: a grid below lambda_max)")
    _add_grid(sp, 20, 0.05)
    sp.add_argument("--task-weights", type=float, nargs="+")
    sp.add_argument("--no-center", action="store_true", help="data are already centered")
    sp.add_argument("--seed", type=int, default=0, help="recorded only; inference is deterministic")
    sp.add_argument("--out", required=True)
    sp.add_argument("--workers", type=int, default=None)
    sp.set_defaults(func=cmd_infer)

    sp = sub.add_parser("check", help="re-verify optimality of an infer run")
    sp.add_argument("inferred")
    sp.add_argument("--data", nargs="+", help="task data (default: the paths in the run manifest)")
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("eval", help="precision/recall of an infer run against a truth dir")
    sp.add_argument("inferred")
    sp.add_argument("truth")
    sp.add_argument("--signed", action="store_true", help="count a hit only if signs agree")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("sweep", help="replicated simulation benchmark")
    _add_protocol(sp, 25)
    sp.add_argument("--methods", nargs="+", choices=METHODS, default=list(METHODS))
    sp.add_argument("--replicates", type=_positive_int, default=20)
    _add_grid(sp, 30, 0.01)
    sp.add_argument("--out", required=True)
    sp.add_argument("--workers", type=int, default=None)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("rerun", help="repeat a simulate, infer or sweep run from its manifest")
    sp.add_argument("manifest", help="manifest.json or the run directory")
    sp.add_argument("--out", required=True)
    sp.add_argument("--workers", type=int, default=None)
    sp.set_defaults(func=cmd_rerun)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        if hasattr(args, "workers") and args.workers is None:
            args.workers = default_workers()
        if getattr(args, "workers", 1) == 0:
            raise UsageError("--workers must be nonzero")
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"jointggm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"jointggm: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SolverError as exc:
        print(f"jointggm: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"jointggm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
