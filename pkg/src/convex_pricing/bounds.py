"""Worst-case revenue ratios for the hinge and quantile pricing rules.

The ratio ``R(p_rule) / R(p*)`` over log-concave valuations is bounded below by
the smaller of two one-dimensional minima, one for each side of the optimal
price:

* ``below_opt`` (rule prices under ``p*``):
  ``min_{0<f<1} k (f - 1) exp(k (f - 1)) / (f ln f)`` with ``k = c`` (hinge) or
  ``k = 1 - tau`` (quantile);
* ``above_opt`` (rule prices over ``p*``): hinge
  ``min_{z <= -2c} c z exp(-z (1/c - 1) - 1) / (z + c)``, quantile
  ``min_{tau <= z <= 1} (z tau (ln z + 1) - z^2) / (tau - z)``.

All of this is quadrature-free. :func:`verify_tightness` is the independent
check: it builds the extremal distributions and measures the achieved ratio
through :mod:`convex_pricing.distributions`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Sequence, Tuple

import numpy as np

from . import distributions as dist_mod
from .numerics import golden_section_min, grid_golden_min

__all__ = [
    "BoundValue",
    "BoundCurve",
    "TightnessReport",
    "f_branch",
    "hinge_z_branch",
    "hinge_z_closed_form",
    "hinge_bound",
    "quantile_z_branch",
    "quantile_bound",
    "hinge_tail_candidate",
    "bound_curve",
    "robust_parameter",
    "worst_case_distribution",
    "verify_tightness",
    "WORST_CASE_KINDS",
]

BELOW, ABOVE = "below_opt", "above_opt"
F_LO, F_HI = 1e-6, 1.0 - 1e-6
INNER_GRID = 4001
WORST_CASE_KINDS = ("hinge_below", "hinge_above", "quantile_below", "quantile_above")


class BoundValue(NamedTuple):
    value: float
    branch: str
    argmin: float


# ---------------------------------------------------------------------------
# inner objectives


def _f_objective(k, f):
    """``k (f-1) e^{k(f-1)} / (f ln f)``; broadcasts over ``k`` and ``f``."""
    fm1 = f - 1.0
    return k * fm1 * np.exp(k * fm1) / (f * np.log1p(fm1))


def f_branch(k: float) -> Tuple[float, float]:
    """``(min, argmin)`` of the below-optimum objective over ``0 < f < 1``.

    The ``f -> 1`` limit equals ``k`` and is included as a candidate at ``f = 1``.
    """
    x, v = grid_golden_min(lambda f: _f_objective(k, f), F_LO, F_HI, n_grid=INNER_GRID)
    if k <= v:
        return float(k), 1.0
    return v, x


def _hinge_z_objective(c, z):
    return c * z * np.exp(-z * (1.0 / c - 1.0) - 1.0) / (z + c)


def hinge_z_closed_form(c: float) -> float:
    """Stationary point ``-(c/2)(sqrt((c-5)/(c-1)) + 1)`` of the hinge above-optimum objective."""
    if not 0.0 < c < 1.0:
        raise ValueError("closed form needs 0 < c < 1")
    return -0.5 * c * (math.sqrt((c - 5.0) / (c - 1.0)) + 1.0)


def hinge_z_branch(c: float) -> Tuple[float, float]:
    """``(min, argmin)`` over ``z <= -2c``; at ``c = 1`` the infimum ``1/e`` is approached as ``z -> -inf``."""
    if c == 1.0:
        return math.exp(-1.0), -math.inf
    z = hinge_z_closed_form(c)
    if z > -2.0 * c:
        z = -2.0 * c
    return float(_hinge_z_objective(c, z)), z


def _hinge_z_numeric(c: float) -> Tuple[float, float]:
    """Grid + golden minimization of the hinge above-optimum objective on ``[-1e3, -2c]``."""
    lo, hi = -1e3, -2.0 * c
    zs = np.linspace(lo, hi, 200_001)
    with np.errstate(over="ignore", invalid="ignore"):
        vals = _hinge_z_objective(c, zs)
    i = int(np.argmin(vals))
    a, b = zs[max(i - 1, 0)], zs[min(i + 1, zs.size - 1)]
    z, v = golden_section_min(lambda t: float(_hinge_z_objective(c, t)), a, b, tol=1e-15)
    return v, z


def _quantile_z_objective(tau, z):
    return (z * tau * (np.log(z) + 1.0) - z * z) / (tau - z)


def quantile_z_branch(tau: float) -> Tuple[float, float]:
    """``(min, argmin)`` over ``tau < z <= 1`` (the objective blows up as ``z -> tau``)."""
    span = 1.0 - tau
    u, v = grid_golden_min(lambda u: _quantile_z_objective(tau, tau + span * u), 1e-9, 1.0,
                           n_grid=INNER_GRID)
    return v, tau + span * u


def hinge_tail_candidate(c):
    """``(c + 1) e^{-c}``: the third candidate of the above-optimum hinge analysis (never active)."""
    return (np.asarray(c) + 1.0) * np.exp(-np.asarray(c))


def hinge_bound(c: float) -> BoundValue:
    if not 0.0 < c <= 1.0:
        raise ValueError("hinge bound defined for 0 < c <= 1")
    fv, fx = f_branch(c)
    zv, zx = hinge_z_branch(c)
    if fv <= zv:
        return BoundValue(fv, BELOW, fx)
    return BoundValue(zv, ABOVE, zx)


def quantile_bound(tau: float) -> BoundValue:
    if not 0.0 < tau < 1.0:
        raise ValueError("quantile bound defined for 0 < tau < 1")
    fv, fx = f_branch(1.0 - tau)
    zv, zx = quantile_z_branch(tau)
    if fv <= zv:
        return BoundValue(fv, BELOW, fx)
    return BoundValue(zv, ABOVE, zx)


# ---------------------------------------------------------------------------
# curves and robust parameters


@dataclass
class BoundCurve:
    kind: str
    parameter_grid: List[float]
    values: List[float]
    branch: List[str]

    def __post_init__(self):
        g = np.asarray(self.parameter_grid)
        if g.size > 1 and np.any(np.diff(g) <= 0):
            raise ValueError("parameter grid must be strictly increasing")

    def rows(self):
        return list(zip(self.parameter_grid, self.values, self.branch))


def bound_curve(kind: str, grid: Sequence[float]) -> BoundCurve:
    fn = _bound_fn(kind)
    vals = [fn(float(p)) for p in grid]
    return BoundCurve(kind, [float(p) for p in grid], [v.value for v in vals], [v.branch for v in vals])


def _bound_fn(kind: str):
    if kind == "hinge":
        return hinge_bound
    if kind == "quantile":
        return quantile_bound
    raise ValueError(f"unknown bound kind {kind!r}")


def _coarse_curve(kind: str, params: np.ndarray, n_inner: int = 513) -> np.ndarray:
    """Vectorized bound values on a parameter grid (coarser inner minimization)."""
    fs = np.linspace(F_LO, F_HI, n_inner)
    k = params if kind == "hinge" else 1.0 - params
    fvals = np.minimum(_f_objective(k[:, None], fs[None, :]).min(axis=1), k)
    if kind == "hinge":
        c = params
        inner = c < 1.0
        z = np.full_like(c, -np.inf)
        z[inner] = -0.5 * c[inner] * (np.sqrt((c[inner] - 5.0) / (c[inner] - 1.0)) + 1.0)
        z = np.minimum(z, -2.0 * c)
        zvals = np.where(inner, _hinge_z_objective(c, np.where(inner, z, -2.0)), math.exp(-1.0))
    else:
        u = np.linspace(1e-9, 1.0, n_inner)
        tau = params[:, None]
        zs = tau + (1.0 - tau) * u[None, :]
        zvals = _quantile_z_objective(tau, zs).min(axis=1)
    return np.minimum(fvals, zvals)


def robust_parameter(kind: str, resolution: float = 1e-4) -> Tuple[float, float]:
    """Parameter maximizing the worst-case ratio and the ratio it guarantees."""
    fn = _bound_fn(kind)
    if kind == "hinge":
        params = np.arange(resolution, 1.0 + 0.5 * resolution, resolution)
    else:
        params = np.arange(resolution, 1.0 - 0.5 * resolution, resolution)
    vals = _coarse_curve(kind, params)
    i = int(np.argmax(vals))
    lo, hi = params[max(i - 2, 0)], params[min(i + 2, params.size - 1)]
    x, negv = golden_section_min(lambda p: -fn(p).value, lo, hi, tol=1e-9)
    return float(x), fn(float(x)).value


# ---------------------------------------------------------------------------
# tightness


@dataclass
class TightnessReport:
    kind: str
    parameter: float
    bound_value: float
    achieved_ratio: float
    distribution_kind: str
    gap: float
    rule_price: float
    optimal_price: float
    two_sided_bound: float = field(default=math.nan)
    valid: bool = True
    message: str = ""


def _hinge_t(c: float) -> float:
    return 0.5 * (math.sqrt((c - 5.0) / (c - 1.0)) - 1.0)


def worst_case_distribution(kind: str, param: float) -> dist_mod.ValuationDistribution:
    """Extremal log-concave valuation for one side of the hinge/quantile bound.

    ``hinge_below``: ``F = g^p`` on ``[0, 1]`` with ``g`` the below-optimum
    argmin (a point mass at 1 when ``g = 1``); ``hinge_above``: flat to
    ``t(c)`` then ``exp(t - p)``; ``quantile_below``: point mass at 1;
    ``quantile_above``: flat to 1 then ``exp((p - 1)(1 - z/tau))``.
    """
    if kind == "hinge_below":
        if not 0.0 < param <= 1.0:
            raise ValueError("hinge_below needs 0 < c <= 1")
        _, g = f_branch(param)
        if g < math.exp(-1.0):
            raise ValueError(f"hinge_below needs g(c) >= 1/e, got g({param}) = {g}")
        if g >= 1.0:
            return dist_mod.step_at(1.0)
        return dist_mod.PiecewiseExponential(knee=1.0, rate=0.0, initial_rate=-math.log(g), cutoff=1.0,
                                             kind="truncated_log_linear")
    if kind == "hinge_above":
        if not 0.5 <= param < 1.0:
            raise ValueError("hinge_above needs 0.5 <= c < 1")
        return dist_mod.PiecewiseExponential(knee=_hinge_t(param), rate=1.0, kind="flat_then_exponential")
    if kind == "quantile_below":
        if not 0.0 < param < 1.0:
            raise ValueError("quantile_below needs 0 < tau < 1")
        return dist_mod.step_at(1.0)
    if kind == "quantile_above":
        if not 0.0 < param <= 0.5:
            raise ValueError("quantile_above needs 0 < tau <= 0.5")
        _, z = quantile_z_branch(param)
        return dist_mod.PiecewiseExponential(knee=1.0, rate=z / param - 1.0, kind="flat_then_exponential")
    raise ValueError(f"unknown worst-case kind {kind!r}; expected one of {WORST_CASE_KINDS}")


def verify_tightness(kind: str, param: float) -> TightnessReport:
    """Achieved ratio on the extremal distribution versus the bound for that side.

    ``bound_value`` is the one-sided minimum the construction targets;
    ``two_sided_bound`` is the two-sided minimum.
    """
    d = worst_case_distribution(kind, param)
    if kind.startswith("hinge"):
        rule_price = dist_mod.hinge_price(d, param)
        full = hinge_bound(param).value
        side = f_branch(param)[0] if kind == "hinge_below" else hinge_z_branch(param)[0]
    else:
        rule_price = dist_mod.quantile_price(d, param)
        full = quantile_bound(param).value
        side = f_branch(1.0 - param)[0] if kind == "quantile_below" else quantile_z_branch(param)[0]
    p_star, r_star = dist_mod.optimal_price(d)
    achieved = float(dist_mod.expected_revenue(d, rule_price)) / r_star
    return TightnessReport(kind, float(param), side, achieved, d.kind, achieved - side,
                           rule_price, p_star, full)
