"""Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned below.

Run alone with ``pytest tests/test_acceptance.py -v`` (or ``python
tests/test_acceptance.py``). Each test prints its verdict line immediately
and the full list is repeated in the terminal summary.
"""

import os
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from jointggm import METHODS, PenaltySpec, infer, io
from jointggm._core import TaskDataset
from jointggm.benchmark import SweepConfig, ordering_margins, sweep
from jointggm.cli import main as cli_main
from jointggm.covariance import (BlockCovariance, make_block_problem, pseudo_loglik,
                                 quad_gradient, quad_objective)
from jointggm.penalties import coop_penalty, group_penalty, l1_penalty
from jointggm.simulate import make_ground_truth, simulate
from jointggm.solvers import (coop_lambda_max, group_lambda_max, lambda_max, solve_coop,
                              solve_group, solve_lasso)
from oracles import (central_difference, coop_objective, coop_split_apg, dense, group_bcd,
                     lasso_cd, pseudo_loglik_conditional)

# pinned tolerances and budgets
KKT_REL = 1e-8
C1_BUDGET_S = 120.0
LASSO_ORACLE_ATOL, GROUP_ORACLE_ATOL, COOP_ORACLE_ATOL = 1e-6, 1e-5, 1e-4
DEGENERACY_ATOL = 1e-6
HOMOGENEITY_RTOL = 1e-12
PLL_RTOL = 1e-8
C6_BUDGET_S = 30.0
C7_BUDGET_S = 15 * 60.0
FD_RTOL = 1e-6

RESULTS = {}
SOLVERS = {"lasso": (solve_lasso, lambda_max), "group": (solve_group, group_lambda_max),
           "coop": (solve_coop, coop_lambda_max)}


@pytest.fixture
def report(capsys):
    def _report(n, ok, detail):
        line = f"CRITERION {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        RESULTS[n] = line
        with capsys.disabled():
            print("\n" + line, flush=True)
        return ok
    return _report


def random_instance(rng, T, p):
    """Node sub-problem built from random task data; n_t is sometimes below p."""
    covs = []
    for _ in range(T):
        n = int(rng.choice([max(2, p // 2), p + 5, 3 * p]))
        X = rng.standard_normal((n, p)) @ (np.eye(p) + 0.3 * rng.standard_normal((p, p)))
        X -= X.mean(axis=0)
        covs.append(X.T @ X / n)
    return make_block_problem(np.stack(covs), int(rng.integers(p)))


# -- 1 ------------------------------------------------------------------------

def test_c1_kkt_certification(report):
    rng = np.random.default_rng(1)
    worst, failures, start = {}, 0, time.perf_counter()
    for kind, (solve, lmax) in SOLVERS.items():
        worst[kind] = 0.0
        for k in range(200):
            prob = random_instance(rng, [1, 2, 4][k % 3], [5, 20][(k // 3) % 2])
            lam = rng.uniform(0.05, 0.95) * lmax(prob)
            res = solve(prob, lam)
            bound = KKT_REL * (lam + np.abs(prob.linear).max())
            worst[kind] = max(worst[kind], res.residual / bound)
            failures += res.residual >= bound
    seconds = time.perf_counter() - start
    ok = failures == 0 and seconds < C1_BUDGET_S
    detail = ", ".join(f"{k} worst {v:.2g}" for k, v in worst.items())
    assert report(1, ok, f"600 instances, residual/bound {detail}; {failures} over; "
                         f"{seconds:.1f}s (budget {C1_BUDGET_S:.0f}s)")


# -- 2 ------------------------------------------------------------------------

def test_c2_oracle_equivalence(report):
    rng = np.random.default_rng(2)
    err = {"lasso": 0.0, "group": 0.0, "coop": 0.0}
    for k in range(50):
        T, p = [1, 2, 3][k % 3], [5, 8][k % 2]
        prob = random_instance(rng, T, p)
        C, c, m = dense(prob.quad_blocks), prob.linear, prob.n_features

        lam = rng.uniform(0.05, 0.9) * lambda_max(prob)
        ref = lasso_cd(C, c, lam, np.ones(c.size), tol=1e-10)
        err["lasso"] = max(err["lasso"], np.abs(solve_lasso(prob, lam).beta - ref).max())

        lam = rng.uniform(0.05, 0.9) * group_lambda_max(prob)
        ref = group_bcd(C, c, lam, T, m, tol=1e-12)
        err["group"] = max(err["group"], np.abs(solve_group(prob, lam).beta - ref).max())

        # keep the accelerated oracle well conditioned
        well = BlockCovariance(prob.node, prob.quad_blocks + 0.1 * np.eye(m), prob.linear)
        lam = rng.uniform(0.05, 0.9) * coop_lambda_max(well)
        ref = coop_split_apg(dense(well.quad_blocks), c, lam, T, m)
        got = solve_coop(well, lam).beta
        assert coop_objective(dense(well.quad_blocks), c, lam, got, T, m) <= \
            coop_objective(dense(well.quad_blocks), c, lam, ref, T, m) + 1e-10
        err["coop"] = max(err["coop"], np.abs(got - ref).max())
    ok = (err["lasso"] <= LASSO_ORACLE_ATOL and err["group"] <= GROUP_ORACLE_ATOL
          and err["coop"] <= COOP_ORACLE_ATOL)
    assert report(2, ok, f"50 instances each, max |diff| lasso {err['lasso']:.1e} "
                         f"(<= {LASSO_ORACLE_ATOL:g}), group {err['group']:.1e} "
                         f"(<= {GROUP_ORACLE_ATOL:g}), coop {err['coop']:.1e} "
                         f"(<= {COOP_ORACLE_ATOL:g})")


# -- 3 ------------------------------------------------------------------------

def _edges_close(a, b):
    if [e[:3] for e in a] != [e[:3] for e in b]:
        return False
    return np.allclose([e[3] for e in a], [e[3] for e in b], rtol=0, atol=DEGENERACY_ATOL)


def test_c3_degeneracies(report):
    checks = {}
    single = alpha1 = alpha0 = True
    for seed in range(5):
        _, data = simulate(10, 10, 3, 2, [30, 40, 50], seed=seed)
        one = TaskDataset([data.tasks[0]])
        graphs = [infer(one, PenaltySpec(m, 0.08, task_weights=(1.0,))) for m in METHODS]
        single &= all(_edges_close(g.edges[0], graphs[0].edges[0]) and
                      np.abs(g.coef - graphs[0].coef).max() <= DEGENERACY_ATOL for g in graphs)
        w = tuple(1.0 / data.task_sizes)
        a = infer(data, PenaltySpec("intertwined", 0.05, 1.0, w))
        b = infer(data, PenaltySpec("independent", 0.05, task_weights=w))
        alpha1 &= np.abs(a.coef - b.coef).max() <= DEGENERACY_ATOL
        a = infer(data, PenaltySpec("intertwined", 0.05, 0.0, (0.02,) * 3))
        b = infer(data, PenaltySpec("pooled", 0.05, task_weights=(0.02,)))
        alpha0 &= np.abs(a.coef - b.coef).max() <= DEGENERACY_ATOL
    checks["T=1 five methods"] = single
    checks["alpha=1 vs independent"] = alpha1
    checks["alpha=0 vs pooled"] = alpha0

    rng = np.random.default_rng(3)
    coherent_cases, orthant = 0, True
    for _ in range(30):
        T, m = 3, 6
        X = rng.standard_normal((m + 8, m + 1))
        S = X.T @ X / len(X)
        quads = np.repeat(S[None, 1:, 1:], T, axis=0) + 0.01 * np.eye(m)
        lins = np.tile(S[1:, 0], T) + 0.02 * rng.standard_normal(T * m)
        prob = BlockCovariance(0, quads, lins)
        lam = rng.uniform(0.1, 0.6) * group_lambda_max(prob)
        g = solve_group(prob, lam).beta
        B = g.reshape(T, m)
        if all((col >= 0).all() or (col <= 0).all() for col in B.T):
            coherent_cases += 1
            orthant &= np.abs(solve_coop(prob, lam).beta - g).max() <= DEGENERACY_ATOL
    checks[f"coop = group on {coherent_cases} sign-coherent optima"] = orthant and \
        coherent_cases >= 10

    disagree = True
    for _ in range(1000):
        u = np.abs(rng.standard_normal(7)) + 1e-3
        v = -np.abs(rng.standard_normal(7)) - 1e-3
        flip = rng.random(7) < 0.5
        beta = np.concatenate([np.where(flip, u, v), np.where(flip, v, u)])
        disagree &= abs(coop_penalty(beta, 2) - l1_penalty(beta, 2)) <= \
            DEGENERACY_ATOL * l1_penalty(beta, 2)
    checks["T=2 full sign disagreement: coop = l1"] = disagree

    ok = all(checks.values())
    assert report(3, ok, "; ".join(f"{k} {'ok' if v else 'VIOLATED'}" for k, v in checks.items()))


# -- 4 ------------------------------------------------------------------------

def test_c4_penalty_algebra(report):
    rng = np.random.default_rng(4)
    n_vec, T, m = 100_000, 3, 4
    bad_order = bad_eq = bad_homog = 0
    for _ in range(n_vec):
        B = rng.standard_normal((T, m)) * (rng.random((T, m)) < 0.7)
        coherent = rng.random(m) < 0.4
        B[:, coherent] = np.abs(B[:, coherent]) * rng.choice([-1.0, 1.0], coherent.sum())
        beta = B.ravel()
        g2, g3 = group_penalty(beta, T), coop_penalty(beta, T)
        is_coherent = all((col >= 0).all() or (col <= 0).all() for col in B.T)
        bad_order += g3 < g2 * (1 - 1e-15)
        equal = abs(g3 - g2) <= 1e-12 * max(g2, 1e-300)
        bad_eq += equal != is_coherent
    for _ in range(2000):
        beta = rng.standard_normal(T * m)
        c = rng.uniform(0, 50)
        for pen in (l1_penalty, group_penalty, coop_penalty):
            lhs, rhs = pen(c * beta, T), c * pen(beta, T)
            bad_homog += abs(lhs - rhs) > HOMOGENEITY_RTOL * max(abs(rhs), 1e-300)
    ok = bad_order == bad_eq == bad_homog == 0
    assert report(4, ok, f"{n_vec} vectors: g3 < g2 in {bad_order}, equality/coherence "
                         f"mismatch in {bad_eq}; homogeneity (rtol {HOMOGENEITY_RTOL:g}) "
                         f"violated in {bad_homog} of 6000 checks")


# -- 5 ------------------------------------------------------------------------

def test_c5_pseudo_likelihood_identity(report):
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(100):
        p, n = int(rng.integers(2, 7)), int(rng.integers(3, 15))
        A = rng.standard_normal((p, p))
        K = A @ A.T + rng.uniform(0.5, p) * np.eye(p)
        X = rng.standard_normal((n, p)) * rng.uniform(0.5, 2)
        ref = pseudo_loglik_conditional(K, X)
        got = pseudo_loglik(K, X.T @ X / n, n)
        worst = max(worst, abs(got - ref) / max(1.0, abs(ref)))
    assert report(5, worst <= PLL_RTOL,
                  f"100 instances, worst relative gap {worst:.1e} (<= {PLL_RTOL:g})")


# -- 6 ------------------------------------------------------------------------

def test_c6_simulator_fidelity(report):
    rng = np.random.default_rng(6)
    start = time.perf_counter()
    bad = {"diagonal dominance": 0, "definiteness": 0, "support": 0, "perturbation": 0}
    for seed in range(1000):
        delta = int(rng.integers(0, 6))
        truth = make_ground_truth(20, 20, 4, delta, 0.9, seed)
        for t, K in enumerate(truth.concentrations):
            diag = np.diag(K)
            bad["diagonal dominance"] += not (diag > np.abs(K).sum(axis=1) - diag).all()
            bad["definiteness"] += int(np.linalg.eigvalsh(K)[0] <= 0)
            iu = np.triu_indices(20, 1)
            support = {(int(i), int(j)) for i, j in zip(*iu) if K[i, j] != 0}
            bad["support"] += support != set(truth.children[t])
            bad["perturbation"] += len(truth.children[t] ^ truth.ancestor) != 2 * delta
    seconds = time.perf_counter() - start
    ok = not any(bad.values()) and seconds < C6_BUDGET_S
    assert report(6, ok, f"1000 instances x 4 tasks, failures {bad}; {seconds:.1f}s "
                         f"(budget {C6_BUDGET_S:.0f}s)")


# -- 7 ------------------------------------------------------------------------

def _check_order(result, order, strict):
    """Adjacent paired AUC differences; '>' needs +1 SE, '>=' tolerates -1 SE."""
    verdicts = []
    for (a, b, diff, se), gt in zip(ordering_margins(result, order), strict):
        ok = diff >= se if gt else diff >= -se
        verdicts.append((ok, f"{a} {'>' if gt else '>='} {b}: {diff:+.3f} (SE {se:.3f})"))
    return verdicts


def _c7_workers():
    return max(1, min(8, os.cpu_count() or 1))


def test_c7_ordinal_reproduction(report):
    start = time.perf_counter()
    runs = {}
    # OR symmetrization is run for information; the verdict uses the AND default
    for sym in ("AND", "OR"):
        runs[sym] = (
            sweep(SweepConfig(n_per_task=25, delta=1, replicates=20, seed=2024,
                              symmetrization=sym), n_jobs=_c7_workers()),
            sweep(SweepConfig(n_per_task=100, delta=5, replicates=20, seed=2025,
                              symmetrization=sym), n_jobs=_c7_workers()))
    seconds = time.perf_counter() - start
    small, large = runs["AND"]

    a = _check_order(small, ["coop", "group", "intertwined", "pooled", "independent"],
                     [False, False, True, True])
    b = [(ok, text) for m in ("intertwined", "group", "coop")
         for ok, text in _check_order(large, ["independent", m], [False])]
    b += _check_order(large, ["independent", "pooled"], [True])
    means = lambda r: " ".join(f"{m} {r.auc_mean(m):.3f}" for m in METHODS)  # noqa: E731
    ok = all(v for v, _ in a + b) and seconds < C7_BUDGET_S
    bad = [t for v, t in a + b if not v]
    detail = (f"(a) n=25 d=1 means: {means(small)}; (b) n=100 d=5 means: {means(large)}; "
              f"{seconds:.0f}s for AND and OR (budget {C7_BUDGET_S:.0f}s)")
    if bad:
        detail += "; violated: " + "; ".join(bad)
    unconverged = sum(sum(r.n_unconverged.values()) for pair in runs.values() for r in pair)
    detail += f"; unconverged sub-problems {unconverged}"
    detail += f"; [info, OR] (a) {means(runs['OR'][0])}; (b) {means(runs['OR'][1])}"
    assert report(7, ok, detail)


# -- 8 ------------------------------------------------------------------------

def test_c8_gradient_checks(report):
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(100):
        prob = random_instance(rng, int(rng.integers(1, 5)), int(rng.integers(3, 9)))
        beta = rng.standard_normal(prob.size)
        fd = central_difference(lambda b: quad_objective(prob, b), beta)
        g = quad_gradient(prob, beta)
        worst = max(worst, np.abs(g - fd).max() / max(1.0, np.abs(g).max()))
    assert report(8, worst <= FD_RTOL,
                  f"100 instances, worst relative gap {worst:.1e} (<= {FD_RTOL:g})")


# -- 9 ------------------------------------------------------------------------

def _tree(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_c9_sweep_determinism(report, tmp_path):
    args = ["sweep", "--p", "10", "--k", "10", "--tasks", "3", "--n", "20", "--replicates", "4",
            "--grid-size", "8", "--seed", "9"]
    rc1 = cli_main(args + ["--workers", "1", "--out", str(tmp_path / "w1")])
    rc8 = cli_main(args + ["--workers", "8", "--out", str(tmp_path / "w8")])
    a, b = _tree(tmp_path / "w1"), _tree(tmp_path / "w8")
    ok = rc1 == rc8 == 0 and a == b
    assert report(9, ok, f"sweep at workers 1 and 8: {len(a)} files, "
                         f"{'byte-identical' if a == b else 'DIFFERENT'} (exit {rc1}, {rc8})")


# -- 10 -----------------------------------------------------------------------

PROTEINS = ("praf", "pmek", "plcg", "PIP2", "PIP3", "p44/42", "pakts473", "PKA", "PKC", "P38",
            "pjnk")


def _first_false_positive(points):
    """True positives detected before the first false positive along the path."""
    best = 0
    for pt in points:
        if pt.selected > pt.true_positives:
            break
        best = pt.true_positives
    return best


def test_c10_user_csv_pipeline(report, tmp_path):
    # synthetic stand-in: 4 conditions, 11 named variables, 20 true interactions
    truth, data = simulate(11, 20, 4, 2, [850, 900, 910, 720], seed=10)
    data_dir = tmp_path / "user"
    data_dir.mkdir()
    files = []
    for t, X in enumerate(data.tasks):
        f = data_dir / f"condition{t + 1}.csv"
        f.write_text(",".join(PROTEINS) + "\n" + "\n".join(
            ",".join(repr(float(v)) for v in row) for row in X) + "\n")
        files.append(str(f))
    tdir = tmp_path / "truth"
    index = []
    for t in range(4):
        name = f"condition{t + 1}"
        io.write_edges(tdir / f"{name}.tsv",
                       [(name, i, j, s, w) for i, j, s, w in truth.signed_edges(t)])
        index.append((name, f"{name}.tsv"))
    io.write_table(tdir / "index.tsv", ("task", "file"), index)

    codes, summary = {}, []
    for m in METHODS:
        out = tmp_path / m
        codes[m] = cli_main(["infer", "--data", *files, "--method", m, "--grid-size", "25",
                             "--grid-ratio", "0.02", "--out", str(out)])
        codes[m] = codes[m] or cli_main(["eval", str(out), str(tdir)])
        if codes[m] == 0:
            pts = io.read_pr_table(out / "pr.tsv")
            summary.append(f"{m} {_first_false_positive(pts)}/{pts[0].total_true}")
    ok = all(c == 0 for c in codes.values()) and len(summary) == len(METHODS)
    assert report(10, ok, "4 CSVs x 11 named variables through infer+eval for all methods, "
                          "true edges found before the first false positive: "
                          + ", ".join(summary))


if __name__ == "__main__":
    sys.exit(pytest.main([str(Path(__file__)), "-v"]))
