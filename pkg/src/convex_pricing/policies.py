"""Benchmark pricing learners, demand estimation, and cross-validated parameter choice.

Direct-method learners fit a purchase-probability model ``f(x, p)`` and then
maximize the plug-in revenue ``mean(pi(x) f(x, pi(x)))``. The convex learners
(hinge, quantile, eps-insensitive) pick their parameter by fitting one policy
per grid value and scoring it with the same plug-in revenue.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.special import expit

from .core import Dataset, LinearPolicy, validate_dataset
from .losses import LossSpec, kernel_ipw_reward, model_free_objective
from .solver import FitResult, SolverConfig, fit_convex, fit_nonconvex

__all__ = [
    "DemandModel",
    "CvResult",
    "fit_logistic_demand",
    "fit_kernel_demand",
    "direct_method_policy",
    "kernel_ipw_policy",
    "model_free_policy",
    "eps_insensitive_policy",
    "cross_validate",
    "plug_in_revenue",
    "default_grid",
    "ROBUST_DEFAULTS",
]

ROBUST_DEFAULTS = {"hinge": 0.8234, "quantile": 0.209}
SEPARATION_NORM = 1e3
KERNEL_CHUNK = 2_000_000  # query-reference pairs per block


def default_grid(kind: str) -> list:
    if kind == "hinge":
        return [round(0.1 * k, 10) for k in range(1, 11)]
    if kind == "quantile":
        return [round(0.05 + 0.1 * k, 10) for k in range(10)]
    if kind == "eps_insensitive":
        return [(c1, c2) for c1 in (1.1, 1.3, 1.6, 2.0) for c2 in (0.9, 0.7, 0.4, 0.0)]
    raise ValueError(f"no default grid for {kind!r}")


# ---------------------------------------------------------------------------
# demand models


@dataclass(frozen=True, eq=False)
class DemandModel:
    """Estimated purchase probability ``f(x, p)``; predictions are clipped to ``[0, 1]``.

    ``logistic`` stores weights over ``[x, p, 1]``; ``kernel_smoother`` stores
    per-dimension bandwidths over ``(x, p)`` and its reference rows;
    ``function`` wraps any vectorized callable ``fn(features, prices)``.
    Prices above ``price_ceiling`` get probability 0 (the kernel smoother sets
    it to the largest logged price, since it would otherwise extrapolate a flat
    positive demand and make plug-in revenue unbounded).
    """

    kind: str
    weights: Optional[np.ndarray] = None
    bandwidths: Optional[np.ndarray] = None
    reference: Optional[np.ndarray] = None
    reference_sold: Optional[np.ndarray] = None
    fallback: float = 0.0
    fn: Optional[Callable] = None
    separation_warning: bool = False
    iterations: int = 0
    converged: bool = True
    price_ceiling: float = math.inf

    @classmethod
    def constant(cls, q: float) -> "DemandModel":
        return cls("function", fn=lambda x, p: np.full(np.shape(p), float(q)))

    @classmethod
    def from_function(cls, fn: Callable) -> "DemandModel":
        return cls("function", fn=fn)

    def predict(self, features, prices) -> np.ndarray:
        x = np.atleast_2d(np.asarray(features, dtype=float))
        p = np.asarray(prices, dtype=float).reshape(-1)
        if self.kind == "logistic":
            out = expit(x @ self.weights[:-2] + p * self.weights[-2] + self.weights[-1])
        elif self.kind == "kernel_smoother":
            out = self._kernel_predict(np.column_stack([x, p]))
        elif self.kind == "function":
            out = np.asarray(self.fn(x, p), dtype=float).reshape(-1)
        else:
            raise ValueError(f"unknown demand kind {self.kind!r}")
        out = np.where(p > self.price_ceiling, 0.0, out)
        return np.clip(out, 0.0, 1.0)

    def _kernel_predict(self, q: np.ndarray) -> np.ndarray:
        h = self.bandwidths
        ref = self.reference / h
        ref_sq = np.einsum("ij,ij->i", ref, ref)
        q = q / h
        out = np.empty(q.shape[0])
        step = max(1, KERNEL_CHUNK // ref.shape[0])
        for lo in range(0, q.shape[0], step):
            blk = q[lo:lo + step]
            d2 = np.einsum("ij,ij->i", blk, blk)[:, None] + ref_sq[None, :] - 2.0 * blk @ ref.T
            w = np.exp(-0.5 * np.maximum(d2, 0.0))
            tot = w.sum(axis=1)
            num = w @ self.reference_sold
            ok = tot >= 1e-300
            out[lo:lo + step] = np.where(ok, num / np.where(ok, tot, 1.0), self.fallback)
        return out


def _design_logistic(data: Dataset) -> np.ndarray:
    return np.column_stack([data.features, data.price, np.ones(data.n)])


def _mean_loglik(z, y):
    return float(-np.mean(y * np.logaddexp(0.0, -z) + (1.0 - y) * np.logaddexp(0.0, z)))


def fit_logistic_demand(data: Dataset, max_iter: int = 10_000, grad_tol: float = 1e-8) -> DemandModel:
    """Maximum-likelihood logistic regression of ``sold`` on ``[x, p, 1]``.

    Newton steps with backtracking. ``separation_warning`` is set when the
    weights pass ``1e3`` or the fit reproduces the labels almost exactly
    (mean log-likelihood above ``-1e-6``), which is what perfect separation
    looks like before the weights have had time to blow up.
    """
    bad = [v for v in validate_dataset(data) if "propensity" not in v.message]
    if bad:
        raise ValueError(f"invalid dataset: {bad[0].message} (row {bad[0].index})")
    z_mat = _design_logistic(data)
    y = data.sold
    k = z_mat.shape[1]
    w = np.zeros(k)
    ll = _mean_loglik(z_mat @ w, y)
    separated = False
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        s = expit(z_mat @ w)
        grad = z_mat.T @ (y - s) / data.n
        if np.max(np.abs(grad)) < grad_tol:
            converged = True
            break
        hess = (z_mat * (s * (1.0 - s))[:, None]).T @ z_mat / data.n + 1e-12 * np.eye(k)
        direction = np.linalg.solve(hess, grad)
        slope = float(grad @ direction)
        t = 1.0
        while True:
            cand = w + t * direction
            new_ll = _mean_loglik(z_mat @ cand, y)
            if new_ll >= ll + 1e-4 * t * slope or t < 1e-12:
                break
            t *= 0.5
        w, ll = cand, new_ll
        if np.max(np.abs(w)) > SEPARATION_NORM:
            separated = True
            break
    separated = separated or ll > -1e-6
    if not np.all(np.isfinite(w)):
        raise FloatingPointError("logistic weights became non-finite")
    return DemandModel("logistic", weights=w, separation_warning=separated, iterations=it,
                       converged=converged, fallback=float(np.mean(y)))


def fit_kernel_demand(data: Dataset, bandwidths: Optional[Sequence[float]] = None,
                      max_reference: Optional[int] = 3000, seed: int = 0) -> DemandModel:
    """Nadaraya-Watson smoother of ``sold`` with a Gaussian product kernel over ``(x, p)``.

    Default bandwidths follow ``1.06 sigma n^(-1/5)`` per dimension, with ``n``
    the number of reference rows. Above ``max_reference`` rows a seeded random
    subset serves as the reference set. Constant columns get bandwidth 1.
    Demand above the largest logged price is 0.
    """
    if data.n < 50:
        raise ValueError("kernel demand needs at least 50 samples")
    pts = np.column_stack([data.features, data.price])
    y = np.asarray(data.sold, dtype=float)
    if max_reference is not None and data.n > max_reference:
        idx = np.sort(np.random.default_rng(seed).choice(data.n, max_reference, replace=False))
        pts, y = pts[idx], y[idx]
    if bandwidths is None:
        sd = pts.std(axis=0, ddof=1)
        h = 1.06 * sd * pts.shape[0] ** (-0.2)
        h = np.where(sd > 0, h, 1.0)
    else:
        h = np.asarray(bandwidths, dtype=float).reshape(-1)
        if h.shape != (pts.shape[1],) or np.any(h <= 0):
            raise ValueError(f"need {pts.shape[1]} positive bandwidths")
    return DemandModel("kernel_smoother", bandwidths=h, reference=pts, reference_sold=y,
                       fallback=float(np.mean(data.sold)), price_ceiling=float(np.max(data.price)))


# ---------------------------------------------------------------------------
# learners


def plug_in_revenue(policy: LinearPolicy, features, demand: DemandModel) -> float:
    """``mean(pi(x) f(x, pi(x)))`` over the given feature rows."""
    x = np.atleast_2d(np.asarray(features, dtype=float))
    pi = policy.price(x)
    return float(np.mean(pi * demand.predict(x, pi)))


def _dim(data: Dataset, cfg: SolverConfig) -> int:
    return data.feature_dim + (1 if cfg.intercept else 0)


def _starts(data: Dataset, cfg: SolverConfig, starts):
    if starts is not None:
        return list(starts)
    return [np.full(_dim(data, cfg), 0.5)]


def direct_method_policy(demand: DemandModel, data: Dataset, cfg: SolverConfig = SolverConfig(),
                         starts=None) -> FitResult:
    """Maximize the plug-in revenue of ``demand`` on the training features."""
    x = LinearPolicy(np.zeros(_dim(data, cfg)), cfg.intercept).design(data.features)

    def objective(theta):
        pi = x @ theta
        return float(np.mean(pi * demand.predict(data.features, pi)))

    return fit_nonconvex(objective, data, cfg, starts=_starts(data, cfg, starts), dim=x.shape[1])


def kernel_ipw_policy(data: Dataset, bandwidth: float = 0.2, cfg: SolverConfig = SolverConfig(),
                      starts=None) -> FitResult:
    """Maximize the Gaussian-kernel inverse-propensity revenue estimate."""
    if data.propensity is None:
        raise ValueError("dataset propensities are unset")
    x = LinearPolicy(np.zeros(_dim(data, cfg)), cfg.intercept).design(data.features)

    def objective(theta):
        return float(np.mean(kernel_ipw_reward(x @ theta, data, bandwidth, cfg.weight_cap)))

    return fit_nonconvex(objective, data, cfg, starts=_starts(data, cfg, starts), dim=x.shape[1])


def model_free_policy(data: Dataset, cfg: SolverConfig = SolverConfig(), starts=None) -> FitResult:
    """Maximize revenue counted only on sales whose logged price is above the policy price."""
    x = LinearPolicy(np.zeros(_dim(data, cfg)), cfg.intercept).design(data.features)

    def objective(theta):
        return float(np.mean(model_free_objective(x @ theta, data)))

    return fit_nonconvex(objective, data, cfg, starts=_starts(data, cfg, starts), dim=x.shape[1])


def eps_insensitive_policy(data: Dataset, c1: Optional[float] = None, c2: Optional[float] = None,
                           cfg: SolverConfig = SolverConfig(), theta0=None) -> FitResult:
    return fit_convex(LossSpec.eps_insensitive(c1, c2), data, cfg, theta0)


# ---------------------------------------------------------------------------
# cross-validation


@dataclass
class CvResult:
    grid: list
    policies: List[LinearPolicy]
    estimated_revenues: List[float]
    chosen_index: int
    fits: List[FitResult] = field(default_factory=list, repr=False)

    @property
    def chosen_parameter(self):
        return self.grid[self.chosen_index]

    @property
    def chosen_policy(self) -> LinearPolicy:
        return self.policies[self.chosen_index]


def _spec(kind: str, param) -> LossSpec:
    if kind == "hinge":
        return LossSpec.hinge(float(param))
    if kind == "quantile":
        return LossSpec.quantile(float(param))
    if kind == "eps_insensitive":
        c1, c2 = param
        return LossSpec.eps_insensitive(c1, c2)
    raise ValueError(f"cross-validation supports hinge, quantile, eps_insensitive; got {kind!r}")


def _tie_key(kind: str, param):
    if kind in ROBUST_DEFAULTS:
        return (abs(float(param) - ROBUST_DEFAULTS[kind]), float(param))
    c1, c2 = param
    return (math.inf if c1 is None else c1, -math.inf if c2 is None else c2)


def _refined_grid(kind: str, grid: list, center: float) -> list:
    """``center +- k * spacing / 5`` for ``k = 1..4`` inside the loss's parameter domain."""
    vals = sorted(set(float(g) for g in grid))
    gaps = [b - a for a, b in zip(vals, vals[1:]) if b > a]
    if not gaps:
        return []
    step = min(gaps) / 5.0
    upper_ok = (lambda v: v <= 1.0) if kind == "hinge" else (lambda v: v < 1.0)
    out = []
    for k in (-4, -3, -2, -1, 1, 2, 3, 4):
        v = round(center + k * step, 12)
        if v > 0.0 and upper_ok(v) and v not in vals:
            out.append(v)
    return out


def cross_validate(loss_kind: str, data: Dataset, demand: DemandModel, grid: Optional[Sequence] = None,
                   cfg: SolverConfig = SolverConfig(), theta0=None,
                   eval_features: Optional[np.ndarray] = None, refine: int = 0) -> CvResult:
    """Fit one convex policy per grid value and keep the one with the highest plug-in revenue.

    Revenue is scored on the training features unless ``eval_features`` is
    given. Exact ties go to the parameter nearest the robust default (hinge
    0.8234, quantile 0.209), so the choice does not depend on grid order.
    ``refine`` extra rounds (hinge and quantile only) each add the current
    winner +- 1..4 fifths of the grid spacing and pick again over all fits.
    """
    grid = list(default_grid(loss_kind) if grid is None else grid)
    if not grid:
        raise ValueError("grid must be nonempty")
    if refine < 0:
        raise ValueError("refine must be >= 0")
    if refine and loss_kind not in ROBUST_DEFAULTS:
        raise ValueError("refinement applies to hinge and quantile grids only")
    feats = data.features if eval_features is None else eval_features
    fits, revs = [], []

    def run(params):
        for param in params:
            res = fit_convex(_spec(loss_kind, param), data, cfg, theta0)
            fits.append(res)
            revs.append(plug_in_revenue(res.policy, feats, demand))

    def pick():
        best = max(revs)
        tied = [i for i, r in enumerate(revs) if r == best]
        return min(tied, key=lambda i: _tie_key(loss_kind, grid[i]))

    run(grid)
    chosen = pick()
    for _ in range(refine):
        extra = _refined_grid(loss_kind, grid, float(grid[chosen]))
        if not extra:
            break
        grid.extend(extra)
        run(extra)
        chosen = pick()
    return CvResult(grid, [f.policy for f in fits], revs, chosen, fits)
