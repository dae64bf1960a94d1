import numpy as np
import pytest

from jointggm.benchmark import SweepConfig, ordering_margins, sweep
from jointggm.evaluation import auc_pr

SMALL = dict(p=6, k=5, n_tasks=2, n_per_task=15, replicates=3, grid_size=5)


def test_config_validation():
    with pytest.raises(ValueError):
        SweepConfig(methods=("ridge",))
    with pytest.raises(ValueError):
        SweepConfig(replicates=0)
    assert SweepConfig().to_dict()["methods"][0] == "independent"


def test_sweep_structure_and_job_independence():
    cfg = SweepConfig(methods=("pooled", "group"), **SMALL)
    a = sweep(cfg)
    b = sweep(cfg, n_jobs=2)
    for m in cfg.methods:
        assert a.lambdas[m][0] > a.lambdas[m][-1]
        assert a.curves[m].n_replicates == 3
        # the grid top is the largest replicate lambda_max: that replicate is empty
        assert any(r[0].selected == 0 for r in a.curves[m].replicate_points)
        np.testing.assert_array_equal(a.aucs[m], b.aucs[m])
        np.testing.assert_array_equal(
            a.aucs[m], [auc_pr(pts) for pts in a.curves[m].replicate_points])
        assert a.n_unconverged[m] == 0
    assert a.auc_se("group") >= 0


def test_ordering_margins_paired():
    cfg = SweepConfig(methods=("independent", "coop"), **SMALL)
    res = sweep(cfg)
    (a, b, diff, se), = ordering_margins(res, ["coop", "independent"])
    assert (a, b) == ("coop", "independent")
    d = res.aucs["coop"] - res.aucs["independent"]
    assert diff == pytest.approx(d.mean())
    assert se == pytest.approx(d.std(ddof=1) / np.sqrt(3))
