"""Replicated synthetic experiments: fit every learner, score it against the oracle, write CSVs.

Seeding. Every random quantity comes from :func:`mix64`, a SplitMix64 fold of
``(base_seed, scenario_index, slot, n, rep)``. ``slot`` is the learner index for
the solver seed reported in the ``seed`` column; the training data, test
features, oracle and Monte-Carlo revenue use fixed reserved slots so that all
learners in one replication share the same dataset. Any subset of the grid
therefore reproduces exactly.
"""
from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import ExperimentConfig, format_price_law
from .evaluation import true_expected_revenue
from .losses import LossSpec
from .policies import (cross_validate, direct_method_policy, fit_kernel_demand, fit_logistic_demand,
                       kernel_ipw_policy, model_free_policy)
from .solver import SolverConfig, fit_convex
from .synthetic import Scenario, distance_to_oracle, generate, oracle_policy, sample_features

__all__ = ["mix64", "ResultRow", "run_experiment", "write_results", "write_summary", "summarize",
           "RESULTS_SCHEMA", "SUMMARY_SCHEMA", "RESULT_COLUMNS", "SUMMARY_COLUMNS"]

RESULTS_SCHEMA = "convex_pricing.results/1"
SUMMARY_SCHEMA = "convex_pricing.summary/1"
RESULT_COLUMNS = ("scenario", "learner", "n", "rep", "seed", "distance", "revenue", "revenue_se",
                  "fit_seconds", "oracle_revenue", "status")
SUMMARY_COLUMNS = ("scenario", "learner", "n", "reps_ok", "reps_failed", "distance_mean", "distance_se",
                   "revenue_mean", "revenue_se", "oracle_revenue_mean")

MASK64 = (1 << 64) - 1
SLOT_DATA, SLOT_TEST, SLOT_EVAL, SLOT_ORACLE = (1 << 32) + 1, (1 << 32) + 2, (1 << 32) + 3, (1 << 32) + 4


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix64(*values: int) -> int:
    """``h = splitmix64(h ^ v)`` folded over the values, starting from ``h = 0``."""
    h = 0
    for v in values:
        h = _splitmix64(h ^ (int(v) & MASK64))
    return h


@dataclass(frozen=True)
class ResultRow:
    scenario: str
    learner: str
    n: int
    rep: int
    seed: int
    distance: float
    revenue: float
    revenue_se: float
    fit_seconds: float
    oracle_revenue: float
    status: str

    def sort_key(self, learner_order: Dict[str, int]):
        return (self.scenario, learner_order[self.learner], self.n, self.rep)


# ---------------------------------------------------------------------------
# one replication


@lru_cache(maxsize=64)
def _cached_oracle(scenario: Scenario, n_oracle: int, method: str):
    return oracle_policy(scenario, n_oracle, method=method)


def _solver_cfg(cfg: ExperimentConfig, seed: int) -> SolverConfig:
    return SolverConfig(max_iters=cfg.max_iters, multistarts=cfg.multistarts, seed=seed)


class _Demand:
    """Lazily fitted demand models shared by the learners of one replication."""

    def __init__(self, data, seed):
        self.data, self.seed, self._cache = data, seed, {}

    def get(self, kind):
        if kind not in self._cache:
            if kind == "logistic":
                self._cache[kind] = fit_logistic_demand(self.data)
            else:
                self._cache[kind] = fit_kernel_demand(self.data, seed=self.seed % (1 << 32))
        return self._cache[kind]


def _fit_learner(name: str, cfg: ExperimentConfig, data, demand: _Demand, solver: SolverConfig):
    if name in ("hinge_cv", "quantile_cv", "eps_cv"):
        kind = {"hinge_cv": "hinge", "quantile_cv": "quantile", "eps_cv": "eps_insensitive"}[name]
        refine = cfg.cv_refine if kind != "eps_insensitive" else 0
        return cross_validate(kind, data, demand.get(cfg.cv_demand), cfg=solver, refine=refine).chosen_policy
    if name == "hinge":
        return fit_convex(LossSpec.hinge(cfg.hinge_c), data, solver).policy
    if name == "quantile":
        return fit_convex(LossSpec.quantile(cfg.quantile_tau), data, solver).policy
    if name == "eps_insensitive":
        return fit_convex(LossSpec.eps_insensitive(cfg.eps_c1, cfg.eps_c2), data, solver).policy
    if name == "dm_logistic":
        return direct_method_policy(demand.get("logistic"), data, solver).policy
    if name == "dm_kernel":
        return direct_method_policy(demand.get("kernel_smoother"), data, solver).policy
    if name == "kernel_ipw":
        return kernel_ipw_policy(data, cfg.ipw_bandwidth, solver).policy
    if name == "model_free":
        return model_free_policy(data, solver).policy
    raise ValueError(f"unknown learner {name!r}")


def _status(exc: BaseException) -> str:
    msg = " ".join(str(exc).split())
    return f"error:{type(exc).__name__}:{msg}"


def run_replication(cfg: ExperimentConfig, scenario_index: int, n: int, rep: int) -> List[ResultRow]:
    base = cfg.base_seed
    scenario = cfg.scenario(n, mix64(base, scenario_index, SLOT_DATA, n, rep)).resolved()
    data, _ = generate(scenario)
    oracle_sc = replace(scenario, seed=mix64(base, scenario_index, SLOT_ORACLE, 0, 0))
    oracle = _cached_oracle(oracle_sc, cfg.oracle_n, cfg.oracle_method)
    test_x = sample_features(scenario, cfg.eval_test_size,
                             np.random.default_rng(mix64(base, scenario_index, SLOT_TEST, n, rep)))
    eval_seed = mix64(base, scenario_index, SLOT_EVAL, n, rep)
    oracle_rev = true_expected_revenue(oracle.policy, scenario, cfg.eval_n_mc, np.random.default_rng(eval_seed))
    demand = _Demand(data, mix64(base, scenario_index, SLOT_DATA, n, rep))

    rows = []
    for li, name in enumerate(cfg.learners):
        seed = mix64(base, scenario_index, li, n, rep)
        t0 = time.perf_counter()
        try:
            policy = _fit_learner(name, cfg, data, demand, _solver_cfg(cfg, seed))
            elapsed = time.perf_counter() - t0
            dist = distance_to_oracle(policy, oracle, test_x)
            # same MC draws for every learner: revenue differences are paired
            rev = true_expected_revenue(policy, scenario, cfg.eval_n_mc, np.random.default_rng(eval_seed))
            if not (math.isfinite(dist) and math.isfinite(rev.mean)):
                raise FloatingPointError("non-finite distance or revenue")
            rows.append(ResultRow(cfg.scenario_name, name, n, rep, seed, dist, rev.mean, rev.se,
                                  elapsed if cfg.record_timing else math.nan, oracle_rev.mean, "ok"))
        except Exception as exc:  # noqa: BLE001 - a failed learner is a recorded outcome
            elapsed = time.perf_counter() - t0
            rows.append(ResultRow(cfg.scenario_name, name, n, rep, seed, math.nan, math.nan, math.nan,
                                  elapsed if cfg.record_timing else math.nan, oracle_rev.mean, _status(exc)))
    return rows


def _run_task(args):
    return run_replication(*args)


def run_experiment(cfg: ExperimentConfig, workers: Optional[int] = None, progress=None) -> List[ResultRow]:
    """All (learner, n, rep) rows in canonical order, independent of ``workers``."""
    tasks = [(cfg, 0, n, rep) for n in cfg.n_grid for rep in range(cfg.replications)]
    workers = cfg.workers if workers is None else workers
    rows: List[ResultRow] = []
    if workers <= 1:
        for t in tasks:
            rows.extend(run_replication(*t))
            if progress:
                progress(t[2], t[3])
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for (_, _, n, rep), out in zip(tasks, pool.map(_run_task, tasks)):
                rows.extend(out)
                if progress:
                    progress(n, rep)
    order = {name: i for i, name in enumerate(cfg.learners)}
    return sorted(rows, key=lambda r: r.sort_key(order))


# ---------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def _header_lines(schema: str, cfg: ExperimentConfig) -> List[str]:
    return [f"# schema: {schema}",
            f"# scenario: {cfg.scenario_name} family={cfg.family} g={cfg.g_kind} "
            f"price_law={format_price_law(cfg.price_law)} base_seed={cfg.base_seed}"]


def _write(path: Path, header: Sequence[str], columns: Sequence[str], rows: Sequence[Sequence]) -> None:
    buf = io.StringIO()
    for line in header:
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue(), encoding="utf-8")


def write_results(rows: Sequence[ResultRow], cfg: ExperimentConfig, path) -> None:
    _write(Path(path), _header_lines(RESULTS_SCHEMA, cfg), RESULT_COLUMNS,
           [[getattr(r, c) for c in RESULT_COLUMNS] for r in rows])


def _mean_se(values: List[float]) -> Tuple[float, float]:
    if not values:
        return math.nan, math.nan
    a = np.asarray(values, dtype=float)
    se = float(np.std(a, ddof=1) / math.sqrt(a.size)) if a.size > 1 else math.nan
    return float(a.mean()), se


def summarize(rows: Sequence[ResultRow]) -> List[list]:
    """One row per (scenario, learner, n), in first-appearance order of ``rows``."""
    groups: Dict[tuple, List[ResultRow]] = {}
    for r in rows:
        groups.setdefault((r.scenario, r.learner, r.n), []).append(r)
    out = []
    for (sc, learner, n), rs in groups.items():
        ok = [r for r in rs if r.status == "ok"]
        dm, dse = _mean_se([r.distance for r in ok])
        rm, rse = _mean_se([r.revenue for r in ok])
        om, _ = _mean_se([r.oracle_revenue for r in rs])
        out.append([sc, learner, n, len(ok), len(rs) - len(ok), dm, dse, rm, rse, om])
    return out


def write_summary(rows: Sequence[ResultRow], cfg: ExperimentConfig, path) -> None:
    _write(Path(path), _header_lines(SUMMARY_SCHEMA, cfg), SUMMARY_COLUMNS, summarize(rows))
