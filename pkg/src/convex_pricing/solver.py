"""Optimizers for linear pricing policies.

``fit_convex`` runs full-batch projected subgradient descent on the
(optionally ridge-regularized) empirical risk of a convex pricing loss.
``fit_nonconvex`` is a multi-start compass search for the discontinuous or
non-concave revenue objectives used by the benchmark learners.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence

import numpy as np

from .core import Dataset, LinearPolicy
from .losses import LossSpec, _inv_weight

__all__ = [
    "SolverConfig",
    "FitResult",
    "SolverDivergence",
    "fit_convex",
    "fit_nonconvex",
    "theory_ridge_lambda",
    "lipschitz_constant",
    "sample_complexity",
]


class SolverDivergence(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    """Solver knobs.

    ``step_scale=None`` resolves to ``mean(price) / sqrt(m)`` at fit time.
    ``theory_lambda`` replaces ``reg_lambda`` by the generalization-bound
    choice :func:`theory_ridge_lambda` with ``d`` the smallest propensity in the data.
    """

    max_iters: int = 50_000
    tol: float = 1e-9
    window: int = 100
    norm_cap: float = 100.0
    reg_lambda: float = 0.0
    theory_lambda: bool = False
    step_scale: Optional[float] = None
    weight_cap: Optional[float] = None
    intercept: bool = False
    seed: int = 0
    multistarts: int = 10
    init_step_factor: float = 0.5
    init_step_floor: float = 0.1
    shrink: float = 0.5
    min_step: float = 1e-5
    max_evals: int = 20_000
    polish: bool = True
    polish_min_step: float = 1e-7

    def __post_init__(self):
        if self.tol <= 0 or self.norm_cap <= 0 or self.reg_lambda < 0:
            raise ValueError("need tol > 0, norm_cap > 0, reg_lambda >= 0")
        if self.max_iters < 1 or self.multistarts < 0 or self.window < 1:
            raise ValueError("max_iters and window must be positive, multistarts >= 0")

    def with_(self, **kw) -> "SolverConfig":
        return replace(self, **kw)


@dataclass
class FitResult:
    policy: LinearPolicy
    objective: float
    iterations: int
    converged: bool
    trace: List[float] = field(default_factory=list)


# ---------------------------------------------------------------------------
# convex path


class _PiecewiseLinearRisk:
    """Empirical risk written as a sum of two-slope terms ``a r`` (r < 0) / ``b r`` (r > 0).

    Each term has ``r = pi - kink`` and slopes ``a <= 0 <= b``; at ``r = 0`` the
    zero subgradient is taken, which is the element closest to zero.
    """

    def __init__(self, spec: LossSpec, data: Dataset, x: np.ndarray, weight_cap=None):
        p, y, n = data.price, data.sold, data.n
        self.n = n
        self.terms = []  # (rows, X_rows, kink, a, b)
        if spec.kind in ("hinge", "quantile"):
            w = _inv_weight(data.propensity, weight_cap)
            if spec.kind == "hinge":
                a, b = -w * spec.c * y, w * (1.0 - spec.c * y)
            else:
                a, b = -w * y * (1.0 - spec.tau), w * y * spec.tau
            self._add(x, p, a, b)
        elif spec.kind == "eps_insensitive":
            self._add(x, p, -y, 1.0 - y)
            if spec.c1 is not None:
                self._add(x, spec.c1 * p, np.zeros(n), y)
            if spec.c2 is not None:
                self._add(x, spec.c2 * p, -(1.0 - y), np.zeros(n))
        else:
            raise ValueError(f"{spec.kind} is not a convex loss")

    def _add(self, x, kink, a, b):
        keep = (a != 0) | (b != 0)
        if not np.any(keep):
            return
        if np.all(keep):
            self.terms.append((x, kink, a, b))
        else:
            self.terms.append((x[keep], kink[keep], a[keep], b[keep]))

    def value(self, theta) -> float:
        total = 0.0
        for x, k, a, b in self.terms:
            r = x @ theta - k
            total += float(np.sum(np.where(r < 0, a * r, b * r)))
        return total / self.n

    def value_grad(self, theta):
        total = 0.0
        grad = np.zeros_like(theta)
        for x, k, a, b in self.terms:
            r = x @ theta - k
            neg = r < 0
            total += float(np.sum(np.where(neg, a * r, b * r)))
            s = np.where(neg, a, np.where(r > 0, b, 0.0))
            grad += x.T @ s
        return total / self.n, grad / self.n


def _project(theta, cap):
    nrm = float(np.linalg.norm(theta))
    if nrm > cap:
        theta = theta * (cap / nrm)
    return theta


def _design(data: Dataset, intercept: bool) -> np.ndarray:
    x = data.features
    if intercept:
        x = np.hstack([x, np.ones((data.n, 1))])
    return x


def fit_convex(spec: LossSpec, data: Dataset, cfg: SolverConfig = SolverConfig(),
               theta0: Optional[np.ndarray] = None) -> FitResult:
    """Minimize ``risk(theta) + lambda ||theta||^2`` over ``||theta|| <= B``.

    Step sizes are ``1 / (lambda t)`` when ``lambda > 0`` (raw subgradient) and
    ``step_scale / sqrt(t)`` along the normalized subgradient otherwise. The
    running average of the iterates and the best iterate are both tracked; the
    better of the two is returned. Every ``cfg.window`` iterations the average
    is scored and the best-so-far objective appended to ``trace``; the run stops
    once that objective improves by less than ``tol`` (relative) over a window.
    """
    if not spec.is_convex():
        raise ValueError(f"{spec.kind} loss is not convex; use fit_nonconvex")
    if data.n == 0:
        raise ValueError("cannot fit on an empty dataset")
    if data.propensity is None and spec.kind != "eps_insensitive":
        raise ValueError("dataset propensities are unset")
    x = _design(data, cfg.intercept)
    m = x.shape[1]
    risk = _PiecewiseLinearRisk(spec, data, x, cfg.weight_cap)

    lam = cfg.reg_lambda
    if cfg.theory_lambda:
        param = spec.c if spec.kind == "hinge" else spec.tau
        if param is None:
            raise ValueError("theory_lambda applies to hinge and quantile losses only")
        lam = theory_ridge_lambda(param, float(np.min(data.propensity)), cfg.norm_cap, data.n)
    step_scale = cfg.step_scale or float(np.mean(data.price)) / math.sqrt(m)

    def objective(th):
        return risk.value(th) + lam * float(th @ th)

    theta = np.zeros(m) if theta0 is None else np.array(theta0, dtype=float).reshape(m)
    theta = _project(theta, cfg.norm_cap)
    avg = np.zeros(m)
    best_theta, best_f = theta.copy(), math.inf
    trace: List[float] = []
    converged = False
    last_checkpoint = math.inf
    t = 0
    for t in range(1, cfg.max_iters + 1):
        f, g = risk.value_grad(theta)
        f += lam * float(theta @ theta)
        if not math.isfinite(f):
            raise SolverDivergence(f"objective became {f} at iteration {t}")
        if f < best_f:
            best_f, best_theta = f, theta.copy()
        g = g + 2.0 * lam * theta
        gnorm = float(np.linalg.norm(g))
        if gnorm == 0.0:
            avg = theta.copy()
            converged = True
            break
        if lam > 0:
            theta = theta - g / (lam * t)
        else:
            theta = theta - (step_scale / math.sqrt(t)) * (g / gnorm)
        theta = _project(theta, cfg.norm_cap)
        avg += (theta - avg) / t
        if t % cfg.window == 0:
            fa = objective(avg)
            if fa < best_f:
                best_f, best_theta = fa, avg.copy()
            trace.append(best_f)
            if abs(last_checkpoint - best_f) <= cfg.tol * max(abs(best_f), 1e-12):
                converged = True
                break
            last_checkpoint = best_f
    fa = objective(avg)
    if fa < best_f:
        best_f, best_theta = fa, avg.copy()
    if cfg.polish:
        best_theta, best_f = _polish(objective, best_theta, best_f, cfg)
    return FitResult(LinearPolicy(best_theta, cfg.intercept), best_f, t, converged, trace)


def _polish(objective, theta, fval, cfg: SolverConfig):
    """Pattern search over axis and pairwise-diagonal moves, projected onto the ball.

    On a convex objective, ending with no improving axis move at the smallest
    step means no axis move of any larger length improves either.
    """
    m = theta.shape[0]
    dirs = [e for e in np.eye(m)]
    for i in range(m):
        for j in range(i + 1, m):
            for sgn in (1.0, -1.0):
                d = np.zeros(m)
                d[i], d[j] = 1.0, sgn
                dirs.append(d / math.sqrt(2.0))
    dirs = dirs + [-d for d in dirs]
    step = 1e-2 * max(1.0, float(np.max(np.abs(theta))))
    evals = 0
    while step >= cfg.polish_min_step and evals < cfg.max_evals:
        moved = False
        for d in dirs:
            cand = _project(theta + step * d, cfg.norm_cap)
            v = objective(cand)
            evals += 1
            if v < fval:
                theta, fval, moved = cand, v, True
                break
        if not moved:
            step *= 0.5
    return theta, fval


# ---------------------------------------------------------------------------
# derivative-free path


def _random_starts(rng: np.random.Generator, k: int, m: int, data: Optional[Dataset]) -> List[np.ndarray]:
    if k == 0:
        return []
    if data is not None and data.n > 0:
        scale = np.maximum(np.mean(np.abs(data.features), axis=0), 1e-12)
        hi = 2.0 * float(np.mean(data.price)) / (m * scale)
        return [rng.uniform(0.0, hi) for _ in range(k)]
    return [rng.uniform(-1.0, 1.0, m) for _ in range(k)]


def _compass(objective, theta0, cfg: SolverConfig, budget: int):
    theta = _project(np.array(theta0, dtype=float), cfg.norm_cap)
    m = theta.shape[0]
    fval = float(objective(theta))
    evals = 1
    step = max(cfg.init_step_factor * float(np.max(np.abs(theta))) if m else 0.0, cfg.init_step_floor)
    while step >= cfg.min_step and evals < budget:
        best_move, best_val = None, fval
        for j in range(m):
            for sgn in (1.0, -1.0):
                cand = theta.copy()
                cand[j] += sgn * step
                cand = _project(cand, cfg.norm_cap)
                v = float(objective(cand))
                evals += 1
                if v > best_val:
                    best_move, best_val = cand, v
        if best_move is None:
            step *= cfg.shrink
        else:
            theta, fval = best_move, best_val
    return theta, fval, evals, step < cfg.min_step


def fit_nonconvex(objective: Callable[[np.ndarray], float], data: Optional[Dataset],
                  cfg: SolverConfig = SolverConfig(), starts: Optional[Sequence] = None,
                  dim: Optional[int] = None) -> FitResult:
    """Maximize ``objective(theta)`` by compass search from several starts.

    Starts are the user-supplied ones followed by ``cfg.multistarts`` random
    draws (seeded by ``cfg.seed``). The best end point wins; on ties the
    earliest start is kept.
    """
    starts = [np.asarray(s, dtype=float).reshape(-1) for s in (starts or [])]
    if dim is None:
        if starts:
            dim = starts[0].shape[0]
        elif data is not None:
            dim = data.feature_dim + (1 if cfg.intercept else 0)
        else:
            raise ValueError("cannot infer the policy dimension")
    rng = np.random.default_rng(cfg.seed)
    starts = starts + _random_starts(rng, cfg.multistarts, dim, data)
    if not starts:
        raise ValueError("need at least one start")
    best = None
    total_evals = 0
    all_conv = True
    trace: List[float] = []
    for s in starts:
        th, val, evals, conv = _compass(objective, s, cfg, cfg.max_evals)
        total_evals += evals
        all_conv &= conv
        trace.append(val)
        if best is None or val > best[1]:
            best = (th, val)
    return FitResult(LinearPolicy(best[0], cfg.intercept), best[1], total_evals, all_conv, trace)


# ---------------------------------------------------------------------------
# generalization-bound constants


def _spread(tau_or_c: float) -> float:
    return max(tau_or_c, 1.0 - tau_or_c)


def lipschitz_constant(tau_or_c: float, d: float) -> float:
    """Lipschitz constant of the hinge/quantile loss when ``propensity >= d``."""
    if d <= 0:
        raise ValueError("d must be positive")
    return _spread(tau_or_c) / d


def theory_ridge_lambda(tau_or_c: float, d: float, B: float, n: int) -> float:
    """Ridge weight for which the regularized ERM generalizes at rate ``sqrt(8/n)``."""
    if d <= 0 or B <= 0 or n < 1:
        raise ValueError("need d > 0, B > 0, n >= 1")
    return math.sqrt(2.0 * _spread(tau_or_c) ** 2 / (d * d * B * B * n))


def sample_complexity(tau_or_c: float, d: float, B: float, eps: float) -> int:
    """Smallest ``n`` guaranteeing excess risk ``<= eps``."""
    if d <= 0 or eps <= 0:
        raise ValueError("need d > 0 and eps > 0")
    val = 8.0 * _spread(tau_or_c) ** 2 * B * B / (d * d * eps * eps)
    # guard against 8.000000001 style rounding before the ceiling
    return int(math.ceil(val - 1e-9 * val))
