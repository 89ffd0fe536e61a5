"""Revenue of a pricing policy: exact under a known scenario, or model-based on held-out data."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np

from .core import Dataset, LinearPolicy
from .policies import DemandModel, fit_kernel_demand, fit_logistic_demand, plug_in_revenue
from .synthetic import Scenario, conditional_survival, sample_features

__all__ = [
    "RevenueEstimate",
    "EvalProtocol",
    "true_expected_revenue",
    "model_based_revenue",
    "split_prescription_evaluation",
    "fit_evaluator",
]


class RevenueEstimate(NamedTuple):
    mean: float
    se: float


@dataclass(frozen=True)
class EvalProtocol:
    """How learned policies are scored.

    ``analytic`` integrates the scenario's closed-form demand over
    ``test_size`` fresh features. ``model_based`` splits the data into a
    prescription part (``split_fraction`` of rows) and an evaluation part on
    which an evaluator demand model of kind ``evaluator`` is trained.
    """

    kind: str = "analytic"
    split_fraction: float = 0.5
    evaluator: str = "kernel_smoother"
    test_size: int = 10_000

    def __post_init__(self):
        if self.kind not in ("analytic", "model_based"):
            raise ValueError(f"unknown protocol kind {self.kind!r}")
        if not 0.0 < self.split_fraction < 1.0:
            raise ValueError("split_fraction must lie in (0, 1)")
        if self.evaluator not in ("kernel_smoother", "logistic"):
            raise ValueError(f"unknown evaluator {self.evaluator!r}")
        if self.test_size < 1:
            raise ValueError("test_size must be positive")


def true_expected_revenue(policy: LinearPolicy, scenario: Scenario, n_mc: int = 100_000,
                          rng: Optional[np.random.Generator] = None) -> RevenueEstimate:
    """Monte-Carlo mean of ``pi(x) P(V >= pi(x) | x)`` over fresh features, with its standard error."""
    if n_mc < 2:
        raise ValueError("n_mc must be at least 2")
    sc = scenario.resolved()
    rng = np.random.default_rng(0) if rng is None else rng
    x = sample_features(sc, n_mc, rng)
    pi = policy.price(x)
    r = pi * conditional_survival(sc, x, pi)
    return RevenueEstimate(float(np.mean(r)), float(np.std(r, ddof=1) / math.sqrt(n_mc)))


def model_based_revenue(policy: LinearPolicy, eval_data: Dataset, evaluator: DemandModel) -> float:
    """``mean(pi(x) f_eval(x, pi(x)))`` over the evaluation features."""
    return plug_in_revenue(policy, eval_data.features, evaluator)


def split_prescription_evaluation(data: Dataset, protocol: EvalProtocol,
                                  rng: np.random.Generator) -> Tuple[Dataset, Dataset]:
    """Disjoint (prescription, evaluation) datasets."""
    return data.split(protocol.split_fraction, rng)


def fit_evaluator(eval_data: Dataset, protocol: EvalProtocol) -> DemandModel:
    if protocol.evaluator == "logistic":
        return fit_logistic_demand(eval_data)
    return fit_kernel_demand(eval_data)
