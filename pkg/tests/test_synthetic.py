import numpy as np
import pytest

from convex_pricing.core import LinearPolicy, PropensityModel
from convex_pricing.synthetic import (Scenario, conditional_survival, distance_to_oracle, generate, g_step,
                                      oracle_policy, pointwise_optimal_price, shifted_exponential,
                                      uniform_band)


def test_price_law_does_not_touch_features_or_valuations():
    a, va = generate(uniform_band(n=500, seed=7))
    b, vb = generate(uniform_band(price_law=PropensityModel.triangular(1, 2, 3), n=500, seed=7))
    assert np.array_equal(a.features, b.features) and np.array_equal(va, vb)
    assert not np.array_equal(a.price, b.price)


def test_uniform_band_demand_matches_frequency():
    sc = uniform_band(n=100_000, seed=11)
    data, _ = generate(sc)
    edges = np.linspace(1, 3, 9)
    idx = np.digitize(data.price, edges) - 1
    for k in range(8):
        m = idx == k
        q = conditional_survival(sc, data.features[m], data.price[m]).mean()
        se = np.sqrt(q * (1 - q) / m.sum())
        assert abs(data.sold[m].mean() - q) <= 3 * se + 1e-3


def test_step_means_frozen():
    sc = uniform_band("step", n=300, seed=3)
    r = sc.resolved()
    assert r.feature_means is not None and r.resolved() is r
    data, _ = generate(sc)
    assert np.allclose(r.feature_means, data.features.mean(axis=0))
    assert g_step(np.array([2.0, 0.0]), [1.0, 1.0]) == 0.5
    with pytest.raises(ValueError):
        sc.g(np.ones((1, 2)))


def test_pointwise_optimal_price():
    sc = uniform_band(n=10)
    assert pointwise_optimal_price(sc, np.array([1.0, 1.0])) == pytest.approx(2.0)
    assert pointwise_optimal_price(shifted_exponential(n=10), np.array([1.0, 3.0])) == pytest.approx(5.0)


@pytest.mark.parametrize("method", ["valuations", "conditional"])
def test_oracle_reproducible_and_beats_ls_start(method):
    sc = uniform_band(n=100, seed=5)
    a = oracle_policy(sc, 20_000, method=method)
    b = oracle_policy(sc, 20_000, method=method)
    assert np.array_equal(a.policy.theta, b.policy.theta)
    assert a.valuation_objective >= a.ls_start_objective
    # the objective is flat along theta0 - theta1, so only the sum is sharply identified
    assert a.policy.theta.sum() == pytest.approx(1.4818, abs=0.02)


def test_oracle_rejects_small_sample():
    with pytest.raises(ValueError):
        oracle_policy(uniform_band(n=10), 100)


def test_distance_is_a_metric():
    x = np.random.default_rng(0).uniform(1, 2, (100, 2))
    r = np.random.default_rng(1)
    for _ in range(50):
        a, b, c = (LinearPolicy(r.uniform(0, 2, 2)) for _ in range(3))
        assert distance_to_oracle(a, c, x) <= distance_to_oracle(a, b, x) + distance_to_oracle(b, c, x) + 1e-12
        assert distance_to_oracle(a, a, x) == 0.0


def test_constant_family():
    sc = Scenario("constant", n=50, value=4.0)
    data, v = generate(sc)
    assert np.all(v == 4.0)
    assert np.array_equal(data.sold, (data.price <= 4.0).astype(float))
    with pytest.raises(ValueError):
        Scenario("bogus")
