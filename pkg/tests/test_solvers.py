import numpy as np
import pytest

from jointggm.covariance import BlockCovariance
from jointggm.penalties import coop_penalty, group_penalty
from jointggm.solvers import (coop_lambda_max, group_lambda_max, lambda_max, solve_coop,
                              solve_group, solve_lasso)
from jointggm.solvers._master import carry_curvature
from oracles import coop_objective, coop_split_apg, dense, group_bcd, lasso_cd, random_problem

SOLVERS = {"lasso": solve_lasso, "group": solve_group, "coop": solve_coop}


def make(rng, T, m, n=None):
    quads, lins = random_problem(rng, T, m, n)
    return BlockCovariance(0, quads, lins), dense(quads), lins


def _objective(prob, kind, lam, beta):
    T = prob.n_tasks
    pen = {"lasso": np.abs(beta).sum(), "group": group_penalty(beta, T),
           "coop": coop_penalty(beta, T)}[kind]
    return prob.objective(beta) + lam * pen


@pytest.mark.parametrize("seed", range(8))
def test_lasso_matches_coordinate_descent(seed):
    rng = np.random.default_rng(seed)
    prob, C, c = make(rng, 3, 6)
    lam = rng.uniform(0.05, 0.6) * lambda_max(prob)
    res = solve_lasso(prob, lam)
    assert res.converged
    ref = lasso_cd(C, c, lam, np.ones(len(c)))
    np.testing.assert_allclose(res.beta, ref, atol=1e-7)


@pytest.mark.parametrize("seed", range(8))
def test_group_matches_block_coordinate_descent(seed):
    rng = np.random.default_rng(100 + seed)
    T, m = 3, 5
    # diagonal blocks keep the oracle's exact block update valid
    quads = np.stack([np.diag(rng.uniform(0.5, 2.0, m)) for _ in range(T)])
    quads += 0.2 * np.stack([np.ones((m, m)) for _ in range(T)])
    c = rng.standard_normal(T * m)
    prob = BlockCovariance(0, quads, c)
    lam = rng.uniform(0.1, 0.8) * group_lambda_max(prob)
    res = solve_group(prob, lam)
    assert res.converged
    ref = group_bcd(dense(quads), c, lam, T, m)
    np.testing.assert_allclose(res.beta, ref, atol=1e-6)


@pytest.mark.parametrize("seed", range(8))
def test_coop_matches_split_apg(seed):
    rng = np.random.default_rng(200 + seed)
    T, m = 3, 5
    prob, C, c = make(rng, T, m)
    lam = rng.uniform(0.1, 0.7) * coop_lambda_max(prob)
    res = solve_coop(prob, lam)
    assert res.converged
    ref = coop_split_apg(C, c, lam, T, m)
    f_res = coop_objective(C, c, lam, res.beta, T, m)
    f_ref = coop_objective(C, c, lam, ref, T, m)
    assert f_res <= f_ref + 1e-10
    np.testing.assert_allclose(res.beta, ref, atol=1e-5)


@pytest.mark.parametrize("kind", SOLVERS)
def test_zero_at_and_above_lambda_max(kind):
    rng = np.random.default_rng(1)
    prob, _, _ = make(rng, 2, 4)
    lmax = {"lasso": lambda_max, "group": group_lambda_max, "coop": coop_lambda_max}[kind](prob)
    for lam in (lmax, 2 * lmax):
        assert not SOLVERS[kind](prob, lam).beta.any()
    assert SOLVERS[kind](prob, 0.95 * lmax).beta.any()


@pytest.mark.parametrize("kind", SOLVERS)
def test_warm_and_cold_starts_agree(kind):
    rng = np.random.default_rng(2)
    prob, _, _ = make(rng, 3, 8)
    lmax = {"lasso": lambda_max, "group": group_lambda_max, "coop": coop_lambda_max}[kind](prob)
    warm = None
    for frac in (0.8, 0.5, 0.3, 0.15):
        hot = SOLVERS[kind](prob, frac * lmax, warm_start=warm)
        cold = SOLVERS[kind](prob, frac * lmax)
        assert hot.converged and cold.converged
        np.testing.assert_allclose(hot.beta, cold.beta, atol=1e-6)
        warm = hot.beta


def test_single_task_solvers_coincide():
    rng = np.random.default_rng(3)
    for _ in range(5):
        prob, _, _ = make(rng, 1, 7)
        lam = 0.3 * lambda_max(prob)
        betas = [SOLVERS[k](prob, lam).beta for k in SOLVERS]
        for b in betas[1:]:
            np.testing.assert_allclose(b, betas[0], atol=1e-7)


def test_coop_equals_group_when_solution_is_sign_coherent():
    # tasks share the same problem up to tiny noise, so groups are sign-coherent
    rng = np.random.default_rng(4)
    quads, lins = random_problem(rng, 1, 6)
    quads = np.repeat(quads, 3, axis=0)
    lins = np.tile(lins, 3) + 1e-3 * rng.standard_normal(18)
    prob = BlockCovariance(0, quads, lins)
    lam = 0.3 * group_lambda_max(prob)
    g, c = solve_group(prob, lam), solve_coop(prob, lam)
    B = g.beta.reshape(3, 6)
    assert all((col >= 0).all() or (col <= 0).all() for col in B.T)
    np.testing.assert_allclose(c.beta, g.beta, atol=1e-7)


@pytest.mark.parametrize("kind", SOLVERS)
def test_solution_is_local_minimum(kind):
    rng = np.random.default_rng(5)
    prob, _, _ = make(rng, 2, 5)
    lam = 0.3 * {"lasso": lambda_max, "group": group_lambda_max,
                 "coop": coop_lambda_max}[kind](prob)
    beta = SOLVERS[kind](prob, lam).beta
    f0 = _objective(prob, kind, lam, beta)
    for j in range(beta.size):
        for h in (1e-4, -1e-4):
            b = beta.copy()
            b[j] += h
            assert _objective(prob, kind, lam, b) >= f0 - 1e-12
    for _ in range(50):
        d = rng.standard_normal(beta.size)
        assert _objective(prob, kind, lam, beta + 1e-4 * d / np.linalg.norm(d)) >= f0 - 1e-12


@pytest.mark.parametrize("kind", SOLVERS)
def test_negative_lambda_and_bad_warm_start(kind):
    rng = np.random.default_rng(6)
    prob, _, _ = make(rng, 2, 3)
    with pytest.raises(ValueError):
        SOLVERS[kind](prob, -1.0)
    with pytest.raises(ValueError):
        SOLVERS[kind](prob, 0.1, warm_start=np.zeros(5))


def test_lasso_task_weights():
    rng = np.random.default_rng(7)
    prob, C, c = make(rng, 2, 4)
    w = np.array([1.0, 3.0])
    lam = 0.2 * lambda_max(prob, w)
    res = solve_lasso(prob, lam, weights=w)
    ref = lasso_cd(C, c, lam, np.repeat(w, 4))
    np.testing.assert_allclose(res.beta, ref, atol=1e-7)
    assert lambda_max(prob, w) == pytest.approx(np.max(np.abs(c) / np.repeat(w, 4)))


def test_certificate_within_tolerance():
    rng = np.random.default_rng(8)
    prob, _, _ = make(rng, 4, 10, n=8)  # rank-deficient blocks
    for kind, fn in SOLVERS.items():
        res = fn(prob, 0.05 * group_lambda_max(prob))
        assert res.converged, kind
        assert res.residual <= res.tol


def test_carry_curvature_embeds_shared_keys():
    H = np.array([[2.0, 0.5], [0.5, 3.0]])
    out = carry_curvature(H, ["a", "b"], ["b", "c", "a"])
    np.testing.assert_array_equal(out, [[3.0, 0, 0.5], [0, 1, 0], [0.5, 0, 2.0]])
    np.testing.assert_array_equal(carry_curvature(None, [], ["x"]), np.eye(1))
    np.testing.assert_array_equal(carry_curvature(H, ["a", "b"], ["z"]), np.eye(1))


def test_scalar_soft_threshold():
    prob = BlockCovariance(0, np.ones((1, 1, 1)), np.array([-2.0]))
    assert solve_lasso(prob, 0.5).beta[0] == pytest.approx(1.5)
    assert lambda_max(BlockCovariance(0, np.eye(2)[None], np.array([-3.0, 1.0]))) == 3.0


@pytest.mark.parametrize("kind", SOLVERS)
def test_scaling_equivariance(kind):
    rng = np.random.default_rng(9)
    prob, _, _ = make(rng, 3, 6)
    lam = 0.3 * group_lambda_max(prob)
    a = SOLVERS[kind](prob, lam).beta
    b = SOLVERS[kind](prob.scaled(7.5), 7.5 * lam).beta
    np.testing.assert_allclose(a, b, atol=1e-8)


@pytest.mark.parametrize("kind", ["group", "coop"])
def test_objective_trace_non_increasing(kind):
    rng = np.random.default_rng(10)
    for _ in range(5):
        prob, _, _ = make(rng, 3, 8)
        res = SOLVERS[kind](prob, 0.2 * group_lambda_max(prob))
        trace = np.asarray(res.objective_trace)
        assert trace.size > 0
        assert np.all(np.diff(trace) <= 1e-12 * (1 + np.abs(trace[:-1])))


def test_group_solutions_are_all_or_nothing():
    rng = np.random.default_rng(11)
    for _ in range(10):
        prob, _, _ = make(rng, 3, 6)
        B = solve_group(prob, 0.3 * group_lambda_max(prob)).beta.reshape(3, 6)
        for col in B.T:
            assert (col == 0).all() or (col != 0).all()


def test_coop_can_zero_one_task_of_a_group():
    # feature 0 pulls positive in tasks 1 and 2 and weakly negative in task 3;
    # the lone negative side is penalized like a LASSO term and stays at zero
    quads = np.stack([np.eye(2)] * 3)
    c = np.array([-2.0, 0.0, -2.0, 0.0, 0.3, 0.0])
    prob = BlockCovariance(0, quads, c)
    beta = solve_coop(prob, 1.0).beta.reshape(3, 2)
    assert beta[0, 0] > 0 and beta[1, 0] > 0 and beta[2, 0] == 0
    assert (solve_group(prob, 1.0).beta.reshape(3, 2)[:, 0] != 0).all()
