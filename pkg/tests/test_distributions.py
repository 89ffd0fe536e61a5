import math

import numpy as np
import pytest

from convex_pricing import distributions as D
from convex_pricing.numerics import adaptive_simpson

BUILTINS = {
    "uniform": D.uniform(1.0, 4.0),
    "shifted_exponential": D.shifted_exponential(5.0, 2.0),
    "step": D.step_at(2.0),
    "flat_then_exponential": D.PiecewiseExponential(knee=1.0, rate=0.7, kind="flat_then_exponential"),
}


def test_uniform_closed_forms():
    d = D.uniform(0.0, 2.0)
    assert D.mean_valuation(d) == pytest.approx(1.0, abs=1e-10)
    assert D.optimal_price(d)[0] == pytest.approx(1.0, abs=1e-8)
    assert D.optimal_price(d)[1] == pytest.approx(0.5, abs=1e-10)
    assert D.quantile_price(D.uniform(0, 1), 0.5) == pytest.approx(1 - math.sqrt(0.5), abs=1e-9)


def test_shifted_exponential_closed_forms():
    d = D.shifted_exponential(5.0, 2.0)
    assert D.mean_valuation(d) == pytest.approx(7.0, abs=1e-8)
    p, r = D.optimal_price(d)
    assert p == pytest.approx(5.0, abs=1e-6) and r == pytest.approx(5.0, abs=1e-6)
    assert D.optimal_price(D.shifted_exponential(1.0, 3.0))[0] == pytest.approx(3.0, abs=1e-6)
    assert isinstance(D.shifted_exponential(2.0, 0.0), D.PiecewiseExponential)


def test_step_supremum_convention():
    d = D.step_at(2.0)
    p, r = D.optimal_price(d)
    assert p == pytest.approx(2.0) and r == pytest.approx(2.0)
    assert D.mean_valuation(d) == pytest.approx(2.0, abs=1e-10)


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_hinge_one_is_mean(name):
    d = BUILTINS[name]
    assert D.hinge_price(d, 1.0) == D.mean_valuation(d)
    assert D.hinge_price(d, 0.5) == pytest.approx(0.5 * D.mean_valuation(d), rel=1e-15)


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_quantile_strictly_decreasing(name):
    d = BUILTINS[name]
    ps = [D.quantile_price(d, t) for t in np.linspace(0.05, 0.95, 19)]
    assert all(b < a for a, b in zip(ps, ps[1:]))


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_optimal_price_is_global_max(name):
    d = BUILTINS[name]
    _, r = D.optimal_price(d)
    prices = np.random.default_rng(3).uniform(0, d.effective_upper(), 1000)
    assert np.all(np.asarray(D.expected_revenue(d, prices)) <= r + 1e-12)


@pytest.mark.parametrize("name", ["uniform", "shifted_exponential", "flat_then_exponential"])
def test_total_mass_from_survival_drop(name):
    d = BUILTINS[name]
    hi = d.effective_upper()
    # mass = F(0) - F(hi) computed by integrating -dF/dp numerically
    h = 1e-6
    dens = lambda t: -(float(d.survival(t + h)) - float(d.survival(max(t - h, 0.0)))) / (t + h - max(t - h, 0.0))  # noqa: E731
    nodes = sorted({0.0, hi, *[b for b in d.breakpoints if 0 < b < hi]})
    mass = sum(adaptive_simpson(dens, a + 2 * h, b - 2 * h, tol=1e-10) for a, b in zip(nodes, nodes[1:]))
    assert mass + float(d.survival(hi)) == pytest.approx(1.0, abs=1e-5)


def test_logconcavity_check():
    for name, d in BUILTINS.items():
        assert D.survival_logconcavity_check(d).ok, name
    mixture = D.CustomSurvival(lambda p: 0.5 * np.exp(-p) + 0.5 * np.exp(-10 * p), upper=10.0)
    rep = D.survival_logconcavity_check(mixture)
    assert not rep.ok and rep.violations[0][3] > 0
    with pytest.raises(ValueError):
        D.survival_logconcavity_check(BUILTINS["uniform"], grid_size=2)


def test_bad_arguments():
    with pytest.raises(ValueError):
        D.hinge_price(BUILTINS["uniform"], 1.5)
    with pytest.raises(ValueError):
        D.quantile_price(BUILTINS["uniform"], 1.0)
    with pytest.raises(ValueError):
        D.expected_revenue(BUILTINS["uniform"], -1.0)
    with pytest.raises(ValueError):
        D.step_at(0.0)
    with pytest.raises(ValueError):
        D.shifted_exponential(1.0, -1.0)
