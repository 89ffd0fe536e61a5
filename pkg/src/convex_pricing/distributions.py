"""Valuation distributions described by their survival function, and the prices they induce.

Survivals are right-closed at a terminal jump: a valuation point mass at ``v``
has ``survival(v) == 1``, matching the purchase rule ``Y = 1{P <= V}``.
Integrals of the survival use adaptive Simpson on each smooth piece plus a
closed-form exponential tail where one is declared.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .numerics import adaptive_simpson, golden_section_min

__all__ = [
    "ValuationDistribution",
    "Uniform",
    "PiecewiseExponential",
    "CustomSurvival",
    "uniform",
    "shifted_exponential",
    "step_at",
    "expected_revenue",
    "mean_valuation",
    "cumulative_survival",
    "optimal_price",
    "hinge_price",
    "quantile_price",
    "survival_logconcavity_check",
    "LogConcavityReport",
]

TRUNCATION = 1e-12
QUAD_TOL = 1e-13
GRID_POINTS = 10_000


class ValuationDistribution:
    """Interface: a non-increasing survival ``F(p) = P(V >= p)`` with ``F(0) = 1``.

    Subclasses provide :meth:`survival` (vectorized), ``upper`` (support end,
    possibly ``inf``), ``breakpoints`` (where the survival is not smooth) and
    ``tail`` = ``(start, rate)`` when ``F(p) = F(start) exp(-rate (p - start))``
    for every ``p >= start``.
    """

    kind: str = "custom"
    upper: float = math.inf
    breakpoints: Tuple[float, ...] = ()
    tail: Optional[Tuple[float, float]] = None

    def survival(self, p):  # pragma: no cover - interface
        raise NotImplementedError

    def __call__(self, p):
        return self.survival(p)

    def effective_upper(self) -> float:
        """Point beyond which the survival is below ``1e-12`` (or the support end)."""
        if math.isfinite(self.upper):
            return self.upper
        if self.tail is not None:
            start, rate = self.tail
            if rate <= 0:
                raise ValueError("declared tail has infinite mean")
            f0 = float(self.survival(start))
            if f0 <= TRUNCATION:
                return start
            return start + math.log(f0 / TRUNCATION) / rate
        hi = max(1.0, max(self.breakpoints, default=1.0))
        for _ in range(200):
            if float(self.survival(hi)) < TRUNCATION:
                return hi
            hi *= 2.0
        raise ValueError("survival does not decay; mean is infinite")


def _scalar(v):
    return float(v) if np.ndim(v) == 0 else v


@dataclass(frozen=True)
class Uniform(ValuationDistribution):
    a: float
    b: float
    kind: str = "uniform"

    def __post_init__(self):
        if not 0.0 <= self.a < self.b:
            raise ValueError("uniform valuation needs 0 <= a < b")

    @property
    def upper(self):
        return self.b

    @property
    def breakpoints(self):
        return (self.a, self.b) if self.a > 0 else (self.b,)

    def survival(self, p):
        p = np.asarray(p, dtype=float)
        return _scalar(np.clip((self.b - p) / (self.b - self.a), 0.0, 1.0))


@dataclass(frozen=True)
class PiecewiseExponential(ValuationDistribution):
    """``F(p) = exp(-initial_rate * min(p, knee) - rate * max(p - knee, 0))`` for ``p <= cutoff``, else 0.

    Covers shifted exponentials (``initial_rate = 0``), point masses
    (``rate = 0, cutoff = knee``) and truncated log-linear survivals.
    """

    knee: float
    rate: float
    initial_rate: float = 0.0
    cutoff: float = math.inf
    kind: str = "piecewise_exponential"

    def __post_init__(self):
        if self.knee < 0 or self.rate < 0 or self.initial_rate < 0:
            raise ValueError("knee and rates must be nonnegative")
        if self.cutoff < self.knee and self.cutoff != math.inf:
            raise ValueError("cutoff must not precede the knee")

    @property
    def upper(self):
        return self.cutoff

    @property
    def breakpoints(self):
        pts = [self.knee] if self.knee > 0 else []
        if math.isfinite(self.cutoff) and self.cutoff not in pts:
            pts.append(self.cutoff)
        return tuple(pts)

    @property
    def tail(self):
        if math.isfinite(self.cutoff):
            return None
        return (self.knee, self.rate)

    def survival(self, p):
        p = np.asarray(p, dtype=float)
        expo = -self.initial_rate * np.minimum(p, self.knee) - self.rate * np.maximum(p - self.knee, 0.0)
        out = np.where(p <= self.cutoff, np.exp(expo), 0.0)
        return _scalar(np.where(p < 0, 1.0, out))


@dataclass(frozen=True)
class CustomSurvival(ValuationDistribution):
    """User-supplied survival. Log-concavity is not enforced (see :func:`survival_logconcavity_check`)."""

    fn: Callable = field(compare=False)
    upper: float = math.inf
    breakpoints: Tuple[float, ...] = ()
    tail: Optional[Tuple[float, float]] = None
    kind: str = "custom"

    def survival(self, p):
        p = np.asarray(p, dtype=float)
        return _scalar(np.clip(self.fn(p), 0.0, 1.0))


def uniform(a: float, b: float) -> Uniform:
    return Uniform(a, b)


def shifted_exponential(location: float, scale: float) -> ValuationDistribution:
    """``V = location + Exponential(scale)``; ``scale = 0`` collapses to a point mass."""
    if scale < 0:
        raise ValueError("scale must be nonnegative")
    if scale == 0:
        return step_at(location)
    return PiecewiseExponential(knee=location, rate=1.0 / scale, kind="shifted_exponential")


def step_at(v: float) -> PiecewiseExponential:
    """Point-mass valuation at ``v``."""
    if v <= 0:
        raise ValueError("point mass must sit at a positive valuation")
    return PiecewiseExponential(knee=v, rate=0.0, cutoff=v, kind="step")


# ---------------------------------------------------------------------------


def expected_revenue(dist: ValuationDistribution, p):
    """``p * F(p)``."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise ValueError("price must be nonnegative")
    return _scalar(p * dist.survival(p))


def _nodes(dist: ValuationDistribution, end: float) -> List[float]:
    pts = sorted({0.0, end, *[b for b in dist.breakpoints if 0.0 < b < end]})
    return pts


def _integrate(dist: ValuationDistribution, a: float, b: float) -> float:
    f = lambda t: float(dist.survival(t))  # noqa: E731
    return adaptive_simpson(f, a, b, tol=QUAD_TOL * max(1.0, b - a))


class _Cumulative:
    """``p -> integral_0^p F`` with whole-piece integrals cached."""

    def __init__(self, dist: ValuationDistribution):
        self.dist = dist
        if dist.tail is not None and not math.isfinite(dist.upper):
            start, rate = dist.tail
            if rate <= 0:
                raise ValueError("declared tail has infinite mean")
            self.tail = (start, rate, float(dist.survival(start)))
            self.body_end = start
        else:
            self.tail = None
            self.body_end = dist.effective_upper()
        self.nodes = _nodes(dist, self.body_end)
        self.piece = [_integrate(dist, a, b) for a, b in zip(self.nodes[:-1], self.nodes[1:])]
        self.prefix = np.concatenate([[0.0], np.cumsum(self.piece)])

    def total(self) -> float:
        body = float(self.prefix[-1])
        if self.tail is None:
            return body
        _, rate, f0 = self.tail
        return body + f0 / rate

    def __call__(self, p: float) -> float:
        if p <= 0:
            return 0.0
        if p >= self.body_end:
            body = float(self.prefix[-1])
            if self.tail is None:
                return body
            start, rate, f0 = self.tail
            return body - f0 * math.expm1(-rate * (p - start)) / rate
        k = int(np.searchsorted(self.nodes, p, side="right")) - 1
        return float(self.prefix[k]) + _integrate(self.dist, self.nodes[k], p)


def cumulative_survival(dist: ValuationDistribution, p: float) -> float:
    return _Cumulative(dist)(p)


def mean_valuation(dist: ValuationDistribution) -> float:
    """``E[V] = integral_0^inf F``."""
    return _Cumulative(dist).total()


def hinge_price(dist: ValuationDistribution, c: float) -> float:
    """Population minimizer of the hinge pricing loss: ``c E[V]``."""
    if not 0.0 < c <= 1.0:
        raise ValueError("hinge parameter must lie in (0, 1]")
    return c * mean_valuation(dist)


def quantile_price(dist: ValuationDistribution, tau: float, tol: float = 1e-12) -> float:
    """Price ``p`` with ``integral_0^p F = (1 - tau) E[V]``, by bisection on the cumulative integral."""
    if not 0.0 < tau < 1.0:
        raise ValueError("quantile parameter must lie in (0, 1)")
    cum = _Cumulative(dist)
    total = cum.total()
    target = (1.0 - tau) * total
    lo, hi = 0.0, dist.effective_upper()
    while cum(hi) < target:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val = cum(mid)
        if abs(val - target) <= tol * total or hi - lo <= 1e-15 * max(1.0, hi):
            return mid
        if val < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def optimal_price(dist: ValuationDistribution, grid_points: int = GRID_POINTS) -> Tuple[float, float]:
    """Revenue-maximizing price ``p*`` and ``R(p*)``.

    Dense scan of ``[0, effective_upper]`` (breakpoints included exactly), then
    golden-section refinement in the cell around the best grid point. Ties go
    to the smaller price.
    """
    hi = dist.effective_upper()
    grid = np.union1d(np.linspace(0.0, hi, grid_points), [b for b in dist.breakpoints if 0 <= b <= hi])
    rev = grid * np.asarray(dist.survival(grid), dtype=float)
    # left limits at breakpoints (supremum convention at jumps)
    for b in dist.breakpoints:
        if 0 < b <= hi:
            left = b * float(dist.survival(b * (1.0 - 1e-13)))
            j = int(np.searchsorted(grid, b))
            if left > rev[j]:
                rev[j] = left
    i = int(np.argmax(rev))
    best_p, best_r = float(grid[i]), float(rev[i])
    lo, up = float(grid[max(i - 1, 0)]), float(grid[min(i + 1, grid.size - 1)])
    x, negr = golden_section_min(lambda t: -t * float(dist.survival(t)), lo, up, tol=1e-14)
    if -negr > best_r + 1e-15 * max(1.0, best_r):
        best_p, best_r = x, -negr
    return best_p, best_r


@dataclass
class LogConcavityReport:
    checked: int
    violations: List[Tuple[float, float, float, float]]

    @property
    def ok(self) -> bool:
        return not self.violations


def survival_logconcavity_check(dist: ValuationDistribution, grid_size: int = 201,
                                slack: float = 1e-9) -> LogConcavityReport:
    """Midpoint test ``log F(m) >= (log F(a) + log F(b)) / 2 - slack`` on grid triples.

    Only points with ``F > 1e-12`` take part. Each violation is reported as
    ``(a, midpoint, b, deficit)``.
    """
    if grid_size < 3:
        raise ValueError("grid_size must be at least 3")
    hi = dist.effective_upper()
    grid = np.linspace(0.0, hi, grid_size)
    f = np.asarray(dist.survival(grid), dtype=float)
    keep = f > TRUNCATION
    grid, logf = grid[keep], np.log(f[keep])
    n = grid.size
    out = []
    checked = 0
    for i in range(n):
        for k in range(i + 2, n, 2):
            j = (i + k) // 2
            checked += 1
            deficit = 0.5 * (logf[i] + logf[k]) - logf[j]
            if deficit > slack:
                out.append((float(grid[i]), float(grid[j]), float(grid[k]), float(deficit)))
    return LogConcavityReport(checked, out)
