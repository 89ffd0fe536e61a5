"""Acceptance criteria. Each test prints one ``PASS``/``FAIL`` line with the measured numbers."""
import math
import subprocess
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from convex_pricing import bounds as B
from convex_pricing.config import load_config
from convex_pricing.core import Dataset, Sample
from convex_pricing.experiment import run_experiment, summarize
from convex_pricing.losses import LossSpec, subgradient
from convex_pricing.solver import SolverConfig, fit_convex

ROOT = Path(__file__).resolve().parents[1]


def report(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
    assert ok, detail


def test_criterion_1_robust_constants(capsys):
    t0 = time.perf_counter()
    c, vc = B.robust_parameter("hinge")
    t1 = time.perf_counter()
    tau, vt = B.robust_parameter("quantile")
    t2 = time.perf_counter()
    ok = (abs(c - 0.8234) <= 0.002 and abs(vc - 0.7715) <= 5e-4 and abs(tau - 0.209) <= 0.005
          and abs(vt - 0.749) <= 1e-3 and t1 - t0 < 1 and t2 - t1 < 1)
    report(capsys, 1, ok, f"hinge c*={c:.5f} ratio={vc:.5f} ({t1 - t0:.2f}s); "
                          f"quantile tau*={tau:.5f} ratio={vt:.5f} ({t2 - t1:.2f}s)")


def test_criterion_2_closed_forms(capsys):
    errs = [abs(B.hinge_bound(1.0).value - math.exp(-1)) / 1e-3]
    errs += [abs(B.hinge_bound(c).value - c) / 1e-6 for c in np.arange(0.1, 0.51, 0.1)]
    errs += [abs(B.quantile_bound(t).value - (1 - t)) / 1e-6 for t in np.arange(0.5, 0.951, 0.05)]
    errs += [abs(B.hinge_z_closed_form(c) - B._hinge_z_numeric(c)[1]) / 1e-6 for c in np.arange(0.55, 0.951, 0.05)]
    worst = max(errs)
    report(capsys, 2, worst <= 1.0, f"worst error / tolerance = {worst:.3g} over {len(errs)} checks")


def test_criterion_3_tightness(capsys):
    t0 = time.perf_counter()
    cases = [("hinge_above", c) for c in (0.6, 0.8, 0.95)] + [("hinge_below", c) for c in (0.2, 0.4)] + \
            [("quantile_below", t) for t in (0.5, 0.7, 0.9)] + [("quantile_above", t) for t in (0.25, 0.4, 0.5)]
    gaps = [B.verify_tightness(k, p).gap for k, p in cases]
    open_gap = B.verify_tightness("quantile_below", 0.3).gap
    elapsed = time.perf_counter() - t0
    ok = max(abs(g) for g in gaps) <= 1e-4 and open_gap <= 0.027 and elapsed < 10
    report(capsys, 3, ok, f"max |gap| = {max(abs(g) for g in gaps):.2e} over {len(cases)} cases; "
                          f"quantile_below tau=0.3 gap = {open_gap:.5f}; {elapsed:.2f}s")


def test_criterion_4_population_minimizers(capsys):
    r = np.random.default_rng(4)
    n = 200_000
    t0 = time.perf_counter()
    v, p = r.uniform(0, 2, n), r.uniform(0, 3, n)
    d = Dataset(np.ones((n, 1)), p, (p <= v).astype(float), np.full(n, 1 / 3))
    th_h = fit_convex(LossSpec.hinge(1.0), d).policy.theta[0]
    t1 = time.perf_counter()
    v, p = r.uniform(0, 1, n), r.uniform(0, 1.5, n)
    d = Dataset(np.ones((n, 1)), p, (p <= v).astype(float), np.full(n, 1 / 1.5))
    th_q = fit_convex(LossSpec.quantile(0.5), d).policy.theta[0]
    t2 = time.perf_counter()
    ok = abs(th_h - 1.0) <= 0.02 and abs(th_q - 0.29289) <= 0.02 and t1 - t0 < 30 and t2 - t1 < 30
    report(capsys, 4, ok, f"hinge theta={th_h:.5f} ({t1 - t0:.1f}s); quantile theta={th_q:.5f} ({t2 - t1:.1f}s)")


def test_criterion_5_eps_hinge_equivalence(capsys):
    r = np.random.default_rng(5)
    n, k = 10_000, 0.5
    d = Dataset(r.uniform(1, 2, (n, 2)), r.uniform(1, 3, n), r.integers(0, 2, n), np.full(n, k))
    pi = r.uniform(0, 6, n)
    pointwise = float(np.max(np.abs(LossSpec.eps_insensitive().value(pi, d) - k * LossSpec.hinge(1.0).value(pi, d))))
    cfg = SolverConfig(max_iters=20_000)
    a = fit_convex(LossSpec.eps_insensitive(), d, cfg).policy.theta
    b = fit_convex(LossSpec.hinge(1.0), d, cfg).policy.theta
    fit_gap = float(np.max(np.abs(a - b)))
    report(capsys, 5, pointwise <= 1e-12 and fit_gap <= 1e-3,
           f"pointwise max diff = {pointwise:.1e}; fitted theta max diff = {fit_gap:.1e}")


def test_criterion_6_convexity_and_subgradients(capsys):
    r = np.random.default_rng(6)
    n = 100_000
    d = Dataset(np.ones((n, 1)), r.uniform(0.05, 20, n), r.integers(0, 2, n), r.uniform(0.05, 2, n))
    a, b = r.uniform(-5, 30, n), r.uniform(-5, 30, n)
    specs = [LossSpec.hinge(0.7), LossSpec.quantile(0.3), LossSpec.eps_insensitive(1.5, 0.5),
             LossSpec.eps_insensitive()]
    worst_convex = max(float(np.max(s.value((a + b) / 2, d) - 0.5 * (s.value(a, d) + s.value(b, d))))
                       for s in specs)
    worst_grad, checked = 0.0, 0
    for s in specs:
        for i in range(2000):
            smp = Sample(d.features[i], float(d.price[i]), float(d.sold[i]), float(d.propensity[i]))
            kinks = [smp.price] + [c * smp.price for c in (s.c1, s.c2) if s.kind == "eps_insensitive" and c is not None]
            x = a[i]
            if min(abs(x - kk) for kk in kinks) <= 1e-3 * smp.price:
                continue
            fd = (s.value(x + 1e-6, smp) - s.value(x - 1e-6, smp)) / 2e-6
            worst_grad = max(worst_grad, abs(subgradient(s, x, smp) - fd))
            checked += 1
    ok = worst_convex <= 1e-12 and worst_grad <= 1e-5
    report(capsys, 6, ok, f"worst midpoint excess = {worst_convex:.1e} on {n} triples x {len(specs)} losses; "
                          f"worst subgradient error = {worst_grad:.1e} on {checked} points")


def _means(rows):
    return {(s[1], s[2]): (s[5], s[6]) for s in summarize(rows)}


def test_criterion_7_experiment_trend(capsys):
    cfg = load_config(ROOT / "configs" / "uniform_band_linear.cfg")
    t0 = time.perf_counter()
    rows = run_experiment(cfg)
    elapsed = time.perf_counter() - t0
    m = _means(rows)
    lo, hi = cfg.n_grid[0], cfg.n_grid[-1]
    dm, dm_se = m[("dm_logistic", hi)]
    threshold = dm + dm_se
    parts, ok = [], elapsed < 600
    for learner in ("hinge_cv", "quantile_cv"):
        small, big = m[(learner, lo)][0], m[(learner, hi)][0]
        trend, order = big < small, big <= threshold
        ok &= trend and order
        parts.append(f"{learner} n={lo}:{small:.4f} n={hi}:{big:.4f} "
                     f"trend={'ok' if trend else 'no'} order={'ok' if order else 'no'}")
    report(capsys, 7, ok, "; ".join(parts) + f"; dm_logistic n={hi}: {dm:.4f} + se {dm_se:.4f} = {threshold:.4f}; "
                                             f"{elapsed:.0f}s")


def test_criterion_8_skewed_logging(capsys):
    cfg = load_config(ROOT / "configs" / "skewed_logging.cfg")
    cfg = replace(cfg, learners=("hinge", "eps_insensitive"))
    m = _means(run_experiment(cfg))
    n = cfg.n_grid[-1]
    (h, hse), (e, ese) = m[("hinge", n)], m[("eps_insensitive", n)]
    se = math.hypot(hse, ese)
    report(capsys, 8, e - h >= 2 * se, f"eps-insensitive {e:.4f} vs hinge {h:.4f} at n={n}: "
                                       f"difference {e - h:.4f} = {(e - h) / se:.1f} combined SE")


def _cli(*args):
    out = subprocess.run([sys.executable, "-m", "convex_pricing.cli", *args], capture_output=True, check=True)
    return out.stdout


def test_criterion_9_determinism(capsys, tmp_path):
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text("learners = hinge_cv, quantile, dm_logistic, model_free\nn_grid = 100, 200\nreplications = 2\n"
                   "base_seed = 9\neval.n_mc = 2000\neval.test_size = 500\noracle.n = 10000\n"
                   "solver.max_iters = 200\nsolver.multistarts = 1\n")
    data = tmp_path / "d.csv"
    commands = {
        "bounds": ["bounds", "--kind", "hinge", "--min", "0.1", "--max", "1", "--steps", "10"],
        "tightness": ["tightness", "--kind", "hinge_above", "--params", "0.6,0.8"],
        "simulate": ["simulate", "--n", "300", "--seed", "2", "--out", str(data)],
        "fit": ["fit", "--data", str(data), "--loss", "kernel_ipw", "--multistarts", "2", "--seed", "3"],
        "crossval": ["crossval", "--data", str(data), "--loss", "quantile", "--max-iters", "300"],
    }
    same = {}
    for name, argv in commands.items():
        first = _cli(*argv) + (data.read_bytes() if name == "simulate" else b"")
        second = _cli(*argv) + (data.read_bytes() if name == "simulate" else b"")
        same[name] = first == second
    outs = []
    for d in ("a", "b"):
        _cli("experiment", "--config", str(cfg), "--out-dir", str(tmp_path / d), "--quiet")
        outs.append(b"".join((tmp_path / d / f).read_bytes() for f in ("results.csv", "summary.csv")))
    same["experiment"] = outs[0] == outs[1]
    report(capsys, 9, all(same.values()), ", ".join(f"{k}={'identical' if v else 'DIFFERENT'}"
                                                    for k, v in same.items()))
