import math

import pytest

from convex_pricing.config import ExperimentConfig, parse_config
from convex_pricing.experiment import (RESULT_COLUMNS, RESULTS_SCHEMA, SUMMARY_SCHEMA, mix64, run_experiment,
                                       run_replication, summarize, write_results, write_summary)

TINY = dict(n_grid=(60, 120), replications=2, base_seed=3, eval_n_mc=2000, eval_test_size=500,
            oracle_n=10_000, max_iters=100, multistarts=0)


def test_mix64_documented_fold():
    assert mix64() == 0
    assert mix64(1, 2) != mix64(2, 1)
    assert 0 <= mix64(2 ** 70, -1) < 2 ** 64
    assert mix64(5, 0, 1, 300, 2) == mix64(5, 0, 1, 300, 2)


def test_grid_rows_and_order():
    cfg = ExperimentConfig(learners=("hinge", "quantile"), **TINY)
    rows = run_experiment(cfg)
    assert len(rows) == 2 * 2 * 2
    assert [(r.learner, r.n, r.rep) for r in rows[:4]] == [("hinge", 60, 0), ("hinge", 60, 1),
                                                          ("hinge", 120, 0), ("hinge", 120, 1)]
    assert all(r.status == "ok" and math.isfinite(r.distance) for r in rows)
    assert all(math.isnan(r.fit_seconds) for r in rows)


def test_subset_reproduces_exactly():
    cfg = ExperimentConfig(learners=("hinge", "quantile"), **TINY)
    full = {(r.learner, r.n, r.rep): r for r in run_experiment(cfg)}
    for r in run_replication(cfg, 0, 120, 1):
        assert r == full[(r.learner, r.n, r.rep)]


def test_learners_share_data_and_oracle():
    cfg = ExperimentConfig(learners=("hinge", "quantile"), **TINY)
    a, b = run_replication(cfg, 0, 60, 0)
    assert a.oracle_revenue == b.oracle_revenue and a.seed != b.seed


def test_failed_learner_is_a_row(tmp_path):
    cfg = ExperimentConfig(learners=("hinge", "dm_kernel"), **{**TINY, "n_grid": (30,), "replications": 1})
    rows = run_experiment(cfg)
    assert [r.status for r in rows][0] == "ok"
    bad = rows[1]
    assert bad.status.startswith("error:ValueError:") and math.isnan(bad.distance)
    summary = summarize(rows)
    assert summary[1][3:5] == [0, 1]
    write_results(rows, cfg, tmp_path / "r.csv")
    text = (tmp_path / "r.csv").read_text()
    assert text.splitlines()[0] == f"# schema: {RESULTS_SCHEMA}"
    assert text.splitlines()[2] == ",".join(RESULT_COLUMNS)


def test_outputs_byte_identical(tmp_path):
    cfg = parse_config("learners = hinge_cv, dm_logistic\nn_grid = 80\nreplications = 2\nbase_seed = 1\n"
                       "eval.n_mc = 1000\neval.test_size = 200\noracle.n = 10000\noracle.method = conditional\n"
                       "solver.max_iters = 50\nsolver.multistarts = 0\ncv.refine = 1\n")
    outs = []
    for k in range(2):
        rows = run_experiment(cfg)
        write_results(rows, cfg, tmp_path / f"r{k}.csv")
        write_summary(rows, cfg, tmp_path / f"s{k}.csv")
        outs.append(((tmp_path / f"r{k}.csv").read_bytes(), (tmp_path / f"s{k}.csv").read_bytes()))
    assert outs[0] == outs[1]
    assert outs[0][1].decode().startswith(f"# schema: {SUMMARY_SCHEMA}")


def test_timing_opt_in():
    cfg = ExperimentConfig(learners=("hinge",), record_timing=True, **{**TINY, "n_grid": (60,), "replications": 1})
    assert run_experiment(cfg)[0].fit_seconds >= 0.0


def test_step_scenario_runs():
    cfg = ExperimentConfig(g_kind="step", learners=("quantile",), **{**TINY, "n_grid": (60,), "replications": 1})
    assert run_experiment(cfg)[0].status == "ok"
