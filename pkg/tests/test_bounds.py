import math
import time

import numpy as np
import pytest

from convex_pricing import bounds as B


def test_robust_parameters():
    t0 = time.perf_counter()
    c, v = B.robust_parameter("hinge")
    assert time.perf_counter() - t0 < 1.0
    assert c == pytest.approx(0.8234, abs=0.002) and v == pytest.approx(0.7715, abs=5e-4)
    tau, v = B.robust_parameter("quantile")
    assert tau == pytest.approx(0.209, abs=0.005) and v == pytest.approx(0.749, abs=1e-3)


def test_closed_forms():
    assert B.hinge_bound(1.0).value == pytest.approx(math.exp(-1), abs=1e-3)
    for c in np.arange(0.1, 0.51, 0.1):
        assert B.hinge_bound(c).value == pytest.approx(c, abs=1e-6)
    for tau in np.arange(0.5, 0.951, 0.05):
        assert B.quantile_bound(tau).value == pytest.approx(1 - tau, abs=1e-6)
    for c in np.arange(0.55, 0.951, 0.05):
        _, z = B._hinge_z_numeric(c)
        assert B.hinge_z_closed_form(c) == pytest.approx(z, abs=1e-6)


def test_continuity():
    # slope grows like 1/sqrt(1 - c) near c = 1, so the fixed-step check stops at 0.99
    cs = np.arange(0.001, 0.9905, 0.001)
    vals = B.bound_curve("hinge", cs).values
    assert np.max(np.abs(np.diff(vals))) < 1e-2
    assert B.hinge_bound(1 - 1e-10).value == pytest.approx(math.exp(-1), abs=1e-3)


def test_branch_crossover():
    diff = [B.f_branch(c)[0] - B.hinge_z_branch(c)[0] for c in (0.80, 0.85)]
    assert diff[0] < 0 < diff[1]
    assert B.hinge_bound(0.80).branch == B.BELOW and B.hinge_bound(0.85).branch == B.ABOVE


def test_tail_candidate_never_active():
    for c in np.linspace(0.01, 1.0, 100):
        assert B.hinge_tail_candidate(c) > B.hinge_bound(c).value


CASES = [("hinge_above", c) for c in (0.6, 0.8, 0.95)] + [("hinge_below", c) for c in (0.2, 0.4)] + \
        [("quantile_below", t) for t in (0.5, 0.7, 0.9)] + [("quantile_above", t) for t in (0.25, 0.4, 0.5)]


@pytest.mark.parametrize("kind,param", CASES)
def test_tightness(kind, param):
    rep = B.verify_tightness(kind, param)
    assert abs(rep.gap) <= 1e-4


def test_quantile_below_gap_in_open_range():
    rep = B.verify_tightness("quantile_below", 0.3)
    assert 0.0 <= rep.gap <= 0.027


VALID = {"hinge_below": (0.05, 0.55), "hinge_above": (0.5, 0.99), "quantile_below": (0.05, 0.95),
         "quantile_above": (0.05, 0.5)}


@pytest.mark.parametrize("kind", sorted(VALID))
def test_lower_bound_validity(kind):
    lo, hi = VALID[kind]
    for p in np.linspace(lo, hi, 20):
        try:
            rep = B.verify_tightness(kind, float(p))
        except ValueError:
            continue
        assert rep.achieved_ratio >= rep.bound_value - 1e-4


def test_invalid_kinds_and_params():
    with pytest.raises(ValueError):
        B.worst_case_distribution("quantile_above", 0.6)
    with pytest.raises(ValueError):
        B.worst_case_distribution("nope", 0.5)
    with pytest.raises(ValueError):
        B.hinge_bound(0.0)
    with pytest.raises(ValueError):
        B.quantile_bound(1.0)


def test_curve_rows():
    curve = B.bound_curve("quantile", [0.2, 0.6])
    rows = list(curve.rows())
    assert len(rows) == 2 and rows[1][1] == pytest.approx(0.4, abs=1e-6)
