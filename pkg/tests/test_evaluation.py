import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from jointggm.evaluation import PRCurve, PRPoint, aggregate_curves, auc_pr, auc_summary, score_edges

pairs = st.tuples(st.integers(0, 6), st.integers(0, 6)).filter(lambda e: e[0] != e[1])
edge_lists = st.lists(pairs, max_size=12)


def test_hand_example_single_task():
    pt = score_edges([[(1, 2)]], [[(1, 2), (2, 3)]])
    assert (pt.precision, pt.recall, pt.true_positives, pt.selected, pt.total_true) == \
        (1.0, 0.5, 1, 1, 2)
    assert not pt.empty_selection


def test_empty_prediction_is_flagged():
    pt = score_edges([[]], [[(0, 1)]])
    assert (pt.precision, pt.recall) == (1.0, 0.0)
    assert pt.empty_selection


def test_task_count_mismatch():
    with pytest.raises(ValueError):
        score_edges([[], []], [[]])


def _brute(pred, true):
    tp = sel = tot = 0
    for P, E in zip(pred, true):
        Pu = {frozenset(e) for e in P}
        Eu = {frozenset(e) for e in E}
        tp += sum(1 for a in Pu for b in Eu if a == b)
        sel += len(Pu)
        tot += len(Eu)
    return tp, sel, tot


@given(st.lists(st.tuples(edge_lists, edge_lists), min_size=4, max_size=4))
def test_four_tasks_match_set_arithmetic(tasks):
    pred = [p for p, _ in tasks]
    true = [t for _, t in tasks]
    pt = score_edges(pred, true)
    assert (pt.true_positives, pt.selected, pt.total_true) == _brute(pred, true)
    assert 0 <= pt.precision <= 1 and 0 <= pt.recall <= 1
    assert pt.true_positives <= min(pt.selected, pt.total_true)


@given(edge_lists, edge_lists, st.randoms())
def test_order_and_orientation_invariance(pred, true, rnd):
    flipped = [(j, i) if rnd.random() < 0.5 else (i, j) for i, j in pred]
    rnd.shuffle(flipped)
    assert score_edges([pred], [true]) == score_edges([flipped], [true])


def test_signed_detection():
    truth = [[(0, 1, -1, -0.3), (1, 2, 1, 0.2)]]
    pred = [[(0, 1, 1, 0.5), (1, 2, 1, 0.1)]]
    assert score_edges(pred, truth).true_positives == 2
    assert score_edges(pred, truth, signed=True).true_positives == 1


def _pts(precs, recs, lams=None):
    lams = lams if lams is not None else range(len(precs))
    return [PRPoint(float(l), p, r, 0, 1, 1) for l, p, r in zip(lams, precs, recs)]


def test_single_replicate_aggregate_equals_points():
    reps = [_pts([1.0, 0.7], [0.0, 0.4])]
    curve = aggregate_curves(reps, "coop")
    assert curve.points == reps[0] and curve.n_replicates == 1


def test_two_replicate_mean():
    curve = aggregate_curves([_pts([0.4], [0.1]), _pts([0.6], [0.3])])
    assert curve.precision[0] == pytest.approx(0.5)
    assert curve.recall[0] == pytest.approx(0.2)
    assert curve.precision_se[0] == pytest.approx(0.1)


def test_ragged_grid_rejected():
    with pytest.raises(ValueError):
        aggregate_curves([_pts([0.4, 1], [0.1, 0]), _pts([0.6], [0.3])])
    with pytest.raises(ValueError):
        aggregate_curves([_pts([0.4], [0.1], [1.0]), _pts([0.6], [0.3], [2.0])])


def test_hundred_replicates_streaming_mean_and_permutation():
    rng = np.random.default_rng(0)
    reps = [_pts(rng.random(5), rng.random(5)) for _ in range(100)]
    curve = aggregate_curves(reps)
    mean = np.zeros(5)
    for k, r in enumerate(reps, start=1):  # running mean
        mean += (np.array([pt.precision for pt in r]) - mean) / k
    np.testing.assert_allclose(curve.precision, mean, atol=1e-12)
    perm = [reps[i] for i in rng.permutation(100)]
    np.testing.assert_allclose(aggregate_curves(perm).precision, curve.precision, atol=1e-15)


def test_auc_examples():
    assert auc_pr(_pts([1.0, 1.0], [0.0, 1.0])) == pytest.approx(1.0)
    assert auc_pr(_pts([1.0, 0.0], [0.0, 1.0])) == pytest.approx(0.5)
    assert auc_pr(PRCurve("x", _pts([1.0, 1.0], [0.0, 1.0]))) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        auc_pr(_pts([1.0], [0.0]))


def _riemann(prec, rec, n=2_000_000):
    order = np.lexsort((-prec, rec))
    x = np.linspace(rec.min(), rec.max(), n + 1)
    mid = 0.5 * (x[1:] + x[:-1])
    y = np.interp(mid, rec[order], prec[order])
    return float(np.sum(y * np.diff(x)))


@pytest.mark.parametrize("seed", range(10))
def test_auc_matches_rectangle_sum(seed):
    rng = np.random.default_rng(seed)
    rec = np.sort(rng.random(12))
    prec = rng.random(12)
    assert auc_pr(_pts(prec, rec)) == pytest.approx(_riemann(prec, rec), abs=1e-6)


def test_auc_summary():
    reps = [_pts([1.0, 1.0], [0.0, 1.0]), _pts([1.0, 0.0], [0.0, 1.0])]
    mean, se, aucs = auc_summary(reps)
    assert mean == pytest.approx(0.75) and se == pytest.approx(0.25)
    np.testing.assert_allclose(aucs, [1.0, 0.5])
