"""Synthetic pricing scenarios with known valuation laws, plus oracle reference policies.

Valuations depend on the features through ``g(x)``:

* ``uniform_band``: ``V = g(x) + Uniform(0, band)``;
* ``shifted_exponential``: ``V = location + Exponential(scale=g(x))``;
* ``constant``: ``V = value`` regardless of ``x`` (a degenerate check case).

Features, valuations and logged prices come from three independent RNG
substreams spawned from the scenario seed (``SeedSequence(seed).spawn(3)``, in
that order), so swapping the logging policy leaves features and valuations
untouched.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from . import distributions as dist_mod
from .core import Dataset, LinearPolicy, PropensityModel
from .solver import SolverConfig, fit_nonconvex

__all__ = [
    "Scenario",
    "OraclePolicy",
    "g_linear",
    "g_step",
    "uniform_band",
    "shifted_exponential",
    "generate",
    "sample_features",
    "conditional_survival",
    "conditional_distribution",
    "pointwise_optimal_price",
    "oracle_policy",
    "distance_to_oracle",
    "VALUATION_FAMILIES",
    "ORACLE_METHODS",
    "G_KINDS",
]

VALUATION_FAMILIES = ("uniform_band", "shifted_exponential", "constant")
G_KINDS = ("linear", "step")
ORACLE_TAG = 0x5EED0AC1
ORACLE_CFG = SolverConfig(multistarts=4, max_evals=5_000)


def g_linear(x):
    """Feature average: ``(x1 + x2) / 2`` for two features."""
    x = np.asarray(x, dtype=float)
    return float(x.mean()) if x.ndim == 1 else x.mean(axis=1)


def g_step(x, feature_means):
    """Average of the indicators ``x_j >= mean_j``; in ``{0, 1/2, 1}`` for two features."""
    x = np.asarray(x, dtype=float)
    means = np.asarray(feature_means, dtype=float)
    if means.shape != (x.shape[-1],):
        raise ValueError(f"need {x.shape[-1]} feature means, got shape {means.shape}")
    out = (x >= means).mean(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class Scenario:
    """Data-generating process for one synthetic experiment.

    ``feature_means`` feeds the step function. Leave it ``None`` to take the
    column means of the scenario's own training features (see :meth:`resolved`).
    """

    valuation_family: str = "uniform_band"
    g_kind: str = "linear"
    feature_low: float = 1.0
    feature_high: float = 2.0
    feature_dim: int = 2
    price_law: PropensityModel = field(default_factory=lambda: PropensityModel.uniform(1.0, 3.0))
    n: int = 1000
    seed: int = 0
    band: float = 3.0
    location: float = 5.0
    value: float = 7.0
    feature_means: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.valuation_family not in VALUATION_FAMILIES:
            raise ValueError(f"unknown valuation family {self.valuation_family!r}")
        if self.g_kind not in G_KINDS:
            raise ValueError(f"unknown g kind {self.g_kind!r}")
        if self.feature_low > self.feature_high or self.feature_dim < 1:
            raise ValueError("need feature_low <= feature_high and feature_dim >= 1")
        if self.n < 1 or self.band <= 0:
            raise ValueError("need n >= 1 and band > 0")
        if self.feature_means is not None:
            object.__setattr__(self, "feature_means", tuple(float(v) for v in self.feature_means))

    def streams(self):
        """Independent generators for features, valuations and prices."""
        return [np.random.default_rng(s) for s in np.random.SeedSequence(self.seed).spawn(3)]

    def resolved(self) -> "Scenario":
        """Copy with ``feature_means`` frozen (step scenarios only)."""
        if self.g_kind != "step" or self.feature_means is not None:
            return self
        x = sample_features(self, self.n, self.streams()[0])
        return replace(self, feature_means=tuple(float(v) for v in x.mean(axis=0)))

    def g(self, features):
        if self.g_kind == "linear":
            return g_linear(features)
        if self.feature_means is None:
            raise ValueError("step scenario has no feature means; call resolved() first")
        return g_step(features, self.feature_means)


def uniform_band(g_kind: str = "linear", price_law: Optional[PropensityModel] = None, **kw) -> Scenario:
    """``X ~ U(1,2)^2``, ``V ~ U(g, g+3)``, logged price ``U(1,3)`` unless overridden."""
    return Scenario("uniform_band", g_kind, 1.0, 2.0, 2,
                    price_law or PropensityModel.uniform(1.0, 3.0), **kw)


def shifted_exponential(g_kind: str = "linear", price_law: Optional[PropensityModel] = None, **kw) -> Scenario:
    """``X ~ U(1,5)^2``, ``V = 5 + Exp(scale g)``, logged price ``U(0,15)`` unless overridden."""
    return Scenario("shifted_exponential", g_kind, 1.0, 5.0, 2,
                    price_law or PropensityModel.uniform(0.0, 15.0), **kw)


def sample_features(scenario: Scenario, size: int, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(scenario.feature_low, scenario.feature_high, (size, scenario.feature_dim))


def _draw_valuations(scenario: Scenario, g: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = g.shape[0]
    if scenario.valuation_family == "uniform_band":
        return g + rng.uniform(0.0, scenario.band, n)
    if scenario.valuation_family == "shifted_exponential":
        return scenario.location + g * rng.exponential(1.0, n)
    return np.full(n, scenario.value)


def generate(scenario: Scenario) -> Tuple[Dataset, np.ndarray]:
    """Observed dataset ``(X, P, Y, propensity)`` and the hidden valuations ``V``."""
    sc = scenario.resolved()
    fx, fv, fp = sc.streams()
    x = sample_features(sc, sc.n, fx)
    v = _draw_valuations(sc, np.asarray(sc.g(x), dtype=float).reshape(-1), fv)
    p = sc.price_law.sample(fp, sc.n)
    y = (p <= v).astype(float)
    return Dataset(x, p, y, sc.price_law.density(p)), v


def conditional_survival(scenario: Scenario, features, prices):
    """``P(V >= p | x)`` in closed form, vectorized over matching rows."""
    g = np.asarray(scenario.g(features), dtype=float)
    p = np.asarray(prices, dtype=float)
    fam = scenario.valuation_family
    if fam == "uniform_band":
        out = np.clip((g + scenario.band - p) / scenario.band, 0.0, 1.0)
    elif fam == "shifted_exponential":
        excess = np.maximum(p - scenario.location, 0.0)
        safe_g = np.where(g > 0, g, 1.0)
        out = np.where(excess == 0, 1.0, np.where(g > 0, np.exp(-excess / safe_g), 0.0))
    else:
        out = (p <= scenario.value).astype(float)
    return float(out) if np.ndim(out) == 0 else out


def conditional_distribution(scenario: Scenario, x) -> dist_mod.ValuationDistribution:
    """Valuation law at a single feature vector."""
    g = float(scenario.g(np.asarray(x, dtype=float)))
    if scenario.valuation_family == "uniform_band":
        return dist_mod.uniform(g, g + scenario.band)
    if scenario.valuation_family == "shifted_exponential":
        return dist_mod.shifted_exponential(scenario.location, g)
    return dist_mod.step_at(scenario.value)


def pointwise_optimal_price(scenario: Scenario, features):
    """Revenue-maximizing price at each feature row, from the closed-form survival."""
    g = np.asarray(scenario.g(features), dtype=float)
    fam = scenario.valuation_family
    if fam == "uniform_band":
        # interior stationary point of p (g + band - p) / band unless it falls below g
        out = np.maximum((g + scenario.band) / 2.0, g)
    elif fam == "shifted_exponential":
        out = np.maximum(scenario.location, g)
    else:
        out = np.full_like(g, scenario.value)
    return float(out) if np.ndim(out) == 0 else out


ORACLE_METHODS = ("valuations", "conditional")


@dataclass(frozen=True, eq=False)
class OraclePolicy:
    policy: LinearPolicy
    valuation_objective: float
    ls_start_objective: float = float("nan")
    method: str = "valuations"


def oracle_policy(scenario: Scenario, n_oracle: int = 100_000,
                  cfg: SolverConfig = ORACLE_CFG, method: str = "valuations") -> OraclePolicy:
    """Best linear no-intercept policy on ``n_oracle`` fresh draws.

    ``valuations`` maximizes ``mean(pi(x) * 1{pi(x) <= V})`` over valuation
    draws. ``conditional`` replaces the indicator by its conditional mean
    ``P(V >= pi(x) | x)``: same population target, but a smooth objective
    without valuation noise. Both use :func:`fit_nonconvex` from the
    least-squares fit to the pointwise optimal prices, from ``0.5`` in every
    coordinate, and from ``cfg.multistarts`` random points. The draws use a
    stream separate from the scenario's training data.
    """
    if n_oracle < 10_000:
        raise ValueError("n_oracle must be at least 10^4")
    if method not in ORACLE_METHODS:
        raise ValueError(f"unknown oracle method {method!r}; expected one of {ORACLE_METHODS}")
    sc = scenario.resolved()
    fx, fv = [np.random.default_rng(s) for s in np.random.SeedSequence([sc.seed, ORACLE_TAG]).spawn(2)]
    x = sample_features(sc, n_oracle, fx)
    if method == "conditional":
        def objective(theta):
            pi = x @ theta
            return float(np.mean(pi * conditional_survival(sc, x, pi)))
    else:
        v = _draw_valuations(sc, np.asarray(sc.g(x), dtype=float).reshape(-1), fv)

        def objective(theta):
            pi = x @ theta
            return float(np.mean(pi * (pi <= v)))

    ls_theta = np.linalg.lstsq(x, pointwise_optimal_price(sc, x), rcond=None)[0]
    res = fit_nonconvex(objective, None, cfg.with_(intercept=False),
                        starts=[ls_theta, np.full(sc.feature_dim, 0.5)], dim=sc.feature_dim)
    return OraclePolicy(res.policy, res.objective, objective(ls_theta), method)


def distance_to_oracle(candidate: LinearPolicy, oracle, test_features) -> float:
    """Mean absolute price difference ``|pi*(x) - pi(x)|`` over the test features."""
    ref = oracle.policy if isinstance(oracle, OraclePolicy) else oracle
    x = np.atleast_2d(np.asarray(test_features, dtype=float))
    return float(np.mean(np.abs(ref.price(x) - candidate.price(x))))
