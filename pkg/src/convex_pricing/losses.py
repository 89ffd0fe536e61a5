"""Pricing surrogate losses, their subgradients, and empirical risks.

Every pointwise function takes a price ``pi`` and an observation exposing
``price``, ``sold`` and ``propensity`` attributes. That is either a single
:class:`~convex_pricing.core.Sample` (scalars) or a whole
:class:`~convex_pricing.core.Dataset` (arrays, with ``pi`` of matching length),
so the same code evaluates one row or a batch.

Convex losses are minimized; ``model_free`` and ``kernel_ipw`` are rewards to
be maximized.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Dataset, LinearPolicy

__all__ = [
    "LossSpec",
    "hinge_loss",
    "quantile_loss",
    "eps_insensitive_loss",
    "model_free_objective",
    "kernel_ipw_reward",
    "subgradient",
    "empirical_risk",
    "empirical_risk_gradient",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)
CONVEX_KINDS = ("hinge", "quantile", "eps_insensitive")
REWARD_KINDS = ("model_free", "kernel_ipw")
WEIGHTED_KINDS = ("hinge", "quantile", "kernel_ipw")


def _pos(v):
    return np.maximum(v, 0.0)


def _inv_weight(propensity, weight_cap=None):
    w = 1.0 / np.asarray(propensity, dtype=float)
    if weight_cap is not None:
        w = np.minimum(w, weight_cap)
    return w


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


@dataclass(frozen=True)
class LossSpec:
    """Tagged loss choice. Build with the named constructors.

    For ``eps_insensitive`` a ``None`` value of ``c1``/``c2`` switches the
    corresponding outer arm off (the ``c1 = +inf`` / ``c2 = -inf`` limit);
    passing the infinities themselves is accepted and normalized to ``None``.
    """

    kind: str
    c: Optional[float] = None
    tau: Optional[float] = None
    c1: Optional[float] = None
    c2: Optional[float] = None
    bandwidth: Optional[float] = None

    def __post_init__(self):
        k = self.kind
        if k == "hinge":
            if self.c is None or not 0.0 < self.c <= 1.0:
                raise ValueError("hinge loss needs 0 < c <= 1")
        elif k == "quantile":
            if self.tau is None or not 0.0 < self.tau < 1.0:
                raise ValueError("quantile loss needs 0 < tau < 1")
        elif k == "eps_insensitive":
            c1 = None if self.c1 is None or self.c1 == math.inf else float(self.c1)
            c2 = None if self.c2 is None or self.c2 == -math.inf else float(self.c2)
            if c1 is not None and not c1 > 1.0:
                raise ValueError("eps-insensitive loss needs c1 > 1")
            if c2 is not None and not c2 < 1.0:
                raise ValueError("eps-insensitive loss needs c2 < 1")
            object.__setattr__(self, "c1", c1)
            object.__setattr__(self, "c2", c2)
        elif k == "kernel_ipw":
            if self.bandwidth is None or not self.bandwidth > 0:
                raise ValueError("kernel IPW needs bandwidth > 0")
        elif k != "model_free":
            raise ValueError(f"unknown loss kind {k!r}")

    @classmethod
    def hinge(cls, c: float = 1.0) -> "LossSpec":
        return cls("hinge", c=c)

    @classmethod
    def quantile(cls, tau: float) -> "LossSpec":
        return cls("quantile", tau=tau)

    @classmethod
    def eps_insensitive(cls, c1: Optional[float] = None, c2: Optional[float] = None) -> "LossSpec":
        return cls("eps_insensitive", c1=c1, c2=c2)

    @classmethod
    def model_free(cls) -> "LossSpec":
        return cls("model_free")

    @classmethod
    def kernel_ipw(cls, bandwidth: float = 0.2) -> "LossSpec":
        return cls("kernel_ipw", bandwidth=bandwidth)

    def is_convex(self) -> bool:
        return self.kind in CONVEX_KINDS

    @property
    def maximize(self) -> bool:
        return self.kind in REWARD_KINDS

    @property
    def parameter(self):
        """The tunable parameter (used for CV grids and reporting)."""
        return {"hinge": self.c, "quantile": self.tau, "eps_insensitive": (self.c1, self.c2),
                "kernel_ipw": self.bandwidth, "model_free": None}[self.kind]

    def value(self, pi, sample, weight_cap: Optional[float] = None):
        if self.kind == "hinge":
            return hinge_loss(pi, sample, self.c, weight_cap)
        if self.kind == "quantile":
            return quantile_loss(pi, sample, self.tau, weight_cap)
        if self.kind == "eps_insensitive":
            return eps_insensitive_loss(pi, sample, self.c1, self.c2)
        if self.kind == "model_free":
            return model_free_objective(pi, sample)
        return kernel_ipw_reward(pi, sample, self.bandwidth, weight_cap)


def hinge_loss(pi, sample, c: float, weight_cap: Optional[float] = None):
    """``(1/phi) [c y (p - pi)+ + (1 - c y)(pi - p)+]``."""
    p, y = sample.price, sample.sold
    w = _inv_weight(sample.propensity, weight_cap)
    return _out(w * (c * y * _pos(p - pi) + (1.0 - c * y) * _pos(pi - p)))


def quantile_loss(pi, sample, tau: float, weight_cap: Optional[float] = None):
    """``(y/phi) [(1 - tau)(p - pi)+ + tau (pi - p)+]``; unsold rows contribute nothing."""
    p, y = sample.price, sample.sold
    w = _inv_weight(sample.propensity, weight_cap)
    return _out(y * w * ((1.0 - tau) * _pos(p - pi) + tau * _pos(pi - p)))


def eps_insensitive_loss(pi, sample, c1: Optional[float], c2: Optional[float]):
    """U-shaped loss with a dead zone ``[p, c1 p]`` after a sale and ``[c2 p, p]`` otherwise.

    Not propensity weighted. ``None`` disables the outer arm.
    """
    if c1 == math.inf:
        c1 = None
    if c2 == -math.inf:
        c2 = None
    p, y = sample.price, sample.sold
    sold_part = _pos(p - pi) + (0.0 if c1 is None else _pos(pi - c1 * p))
    unsold_part = _pos(pi - p) + (0.0 if c2 is None else _pos(c2 * p - pi))
    return _out(y * sold_part + (1.0 - y) * unsold_part)


def model_free_objective(pi, sample):
    """Revenue credited only when the observed sale price exceeds ``pi`` (maximize)."""
    p, y = sample.price, sample.sold
    return _out(pi * y * (np.asarray(p) > pi))


def kernel_ipw_reward(pi, sample, bandwidth: float, weight_cap: Optional[float] = None):
    """Gaussian-kernel smoothed inverse-propensity revenue estimate (maximize)."""
    p, y = sample.price, sample.sold
    w = _inv_weight(sample.propensity, weight_cap)
    u = (np.asarray(pi) - p) / bandwidth
    k = np.exp(-0.5 * u * u) / _SQRT_2PI
    return _out(w * k * p * y / bandwidth)


def _one_sided_slopes(spec: LossSpec, pi, sample, weight_cap=None):
    """Left and right derivatives of a convex loss with respect to ``pi``."""
    p = np.asarray(sample.price, dtype=float)
    y = np.asarray(sample.sold, dtype=float)
    pi = np.asarray(pi, dtype=float)
    if spec.kind in ("hinge", "quantile"):
        w = _inv_weight(sample.propensity, weight_cap)
        if spec.kind == "hinge":
            below, above = w * spec.c * y, w * (1.0 - spec.c * y)
        else:
            below, above = w * y * (1.0 - spec.tau), w * y * spec.tau
        # slope is -below left of p and +above right of p
        left = np.where(pi <= p, -below, above)
        right = np.where(pi < p, -below, above)
        return left, right
    # eps-insensitive: sum of unit-slope hinges
    left = np.zeros(np.broadcast(pi, p).shape)
    right = np.zeros_like(left)

    def add(kink, slope_before, slope_after, mask):
        nonlocal left, right
        left = left + mask * np.where(pi <= kink, slope_before, slope_after)
        right = right + mask * np.where(pi < kink, slope_before, slope_after)

    add(p, -1.0, 0.0, y)                      # (p - pi)+ on sales
    add(p, 0.0, 1.0, 1.0 - y)                 # (pi - p)+ on non-sales
    if spec.c1 is not None:
        add(spec.c1 * p, 0.0, 1.0, y)
    if spec.c2 is not None:
        add(spec.c2 * p, -1.0, 0.0, 1.0 - y)
    return left, right


def subgradient(spec: LossSpec, pi, sample, weight_cap: Optional[float] = None):
    """An element of the subdifferential at ``pi``.

    At kinks the element closest to zero is returned, so rows sitting exactly
    at the policy price exert no pull.
    """
    if not spec.is_convex():
        raise ValueError(f"{spec.kind} loss is not convex; no subgradient")
    left, right = _one_sided_slopes(spec, pi, sample, weight_cap)
    return _out(np.clip(0.0, left, right))


def _check(spec: LossSpec, data: Dataset):
    if data.n == 0:
        raise ValueError("empirical risk of an empty dataset")
    if data.propensity is None and spec.kind in WEIGHTED_KINDS:
        raise ValueError("dataset propensities are unset")


def empirical_risk(spec: LossSpec, policy: LinearPolicy, data: Dataset,
                   weight_cap: Optional[float] = None) -> float:
    """Mean pointwise loss (or reward, for the maximized kinds) of ``policy`` on ``data``."""
    _check(spec, data)
    pi = policy.price(data.features)
    return float(np.mean(spec.value(pi, data, weight_cap)))


def empirical_risk_gradient(spec: LossSpec, policy: LinearPolicy, data: Dataset,
                            weight_cap: Optional[float] = None) -> np.ndarray:
    _check(spec, data)
    x = policy.design(data.features)
    g = subgradient(spec, x @ policy.theta, data, weight_cap)
    return x.T @ g / data.n
