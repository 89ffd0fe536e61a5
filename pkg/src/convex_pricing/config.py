"""Flat ``key = value`` experiment configuration with dotted sections.

Example::

    # uniform valuations, linear dependence
    scenario.name = uniform_band_linear
    scenario.family = uniform_band
    scenario.g = linear
    scenario.price_law = uniform:1,3
    learners = hinge_cv, quantile_cv, dm_logistic
    n_grid = 300, 3000, 30000
    replications = 20
    base_seed = 2024

Blank lines and ``#`` comments are ignored. Unknown keys are an error so that
typos do not silently fall back to defaults.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

from .core import PropensityModel
from .synthetic import ORACLE_METHODS, Scenario

__all__ = ["ExperimentConfig", "ConfigError", "parse_config", "load_config", "parse_price_law",
           "format_price_law", "LEARNERS"]

LEARNERS = ("hinge_cv", "quantile_cv", "eps_cv", "hinge", "quantile", "eps_insensitive",
            "dm_logistic", "dm_kernel", "kernel_ipw", "model_free")


class ConfigError(ValueError):
    pass


def parse_price_law(text: str) -> PropensityModel:
    """``uniform:a,b`` | ``triangular:low,mode,high`` | ``exponential:rate=r`` or
    ``exponential:scale=s[,loc=l]`` | ``lognormal:mu,sigma``."""
    kind, _, rest = text.strip().partition(":")
    kind = kind.strip()
    try:
        if kind == "exponential":
            kw = dict(part.split("=") for part in rest.split(","))
            kw = {k.strip(): float(v) for k, v in kw.items()}
            unknown = set(kw) - {"rate", "scale", "loc"}
            if unknown:
                raise ConfigError(f"unknown exponential parameter(s) {sorted(unknown)}")
            return PropensityModel.exponential(scale=kw.get("scale"), rate=kw.get("rate"),
                                               location=kw.get("loc", 0.0))
        vals = [float(v) for v in rest.split(",")]
        if kind == "uniform":
            return PropensityModel.uniform(*vals)
        if kind == "triangular":
            return PropensityModel.triangular(*vals)
        if kind == "lognormal":
            return PropensityModel.lognormal(*vals)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad price law {text!r}: {exc}") from exc
    raise ConfigError(f"unknown price law kind {kind!r}")


def format_price_law(law: PropensityModel) -> str:
    if law.kind == "exponential":
        return f"exponential:scale={law.params[0]!r},loc={law.params[1]!r}"
    return f"{law.kind}:" + ",".join(repr(v) for v in law.params)


@dataclass(frozen=True)
class ExperimentConfig:
    scenario_name: str = "uniform_band_linear"
    family: str = "uniform_band"
    g_kind: str = "linear"
    price_law: PropensityModel = field(default_factory=lambda: PropensityModel.uniform(1.0, 3.0))
    feature_low: Optional[float] = None
    feature_high: Optional[float] = None
    learners: Tuple[str, ...] = ("hinge_cv", "quantile_cv", "dm_logistic")
    n_grid: Tuple[int, ...] = (300, 3000, 30000)
    replications: int = 20
    base_seed: int = 0
    output_dir: str = "results"
    workers: int = 1
    # evaluation
    eval_n_mc: int = 20_000
    eval_test_size: int = 10_000
    oracle_n: int = 100_000
    oracle_method: str = "valuations"
    # learners
    cv_demand: str = "logistic"
    cv_refine: int = 0
    hinge_c: float = 0.8234
    quantile_tau: float = 0.209
    eps_c1: Optional[float] = None
    eps_c2: Optional[float] = None
    ipw_bandwidth: float = 0.2
    # solver
    max_iters: int = 1000
    multistarts: int = 2
    record_timing: bool = False

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if not self.n_grid or any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ConfigError("n_grid must be nonempty and strictly increasing")
        bad = [name for name in self.learners if name not in LEARNERS]
        if bad:
            raise ConfigError(f"unknown learner(s) {bad}; choose from {LEARNERS}")
        if self.cv_demand not in ("logistic", "kernel_smoother"):
            raise ConfigError("cv.demand must be logistic or kernel_smoother")
        if self.oracle_method not in ORACLE_METHODS:
            raise ConfigError(f"oracle.method must be one of {ORACLE_METHODS}")
        if self.cv_refine < 0:
            raise ConfigError("cv.refine must be >= 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def scenario(self, n: int, seed: int) -> Scenario:
        kw = {}
        if self.feature_low is not None:
            kw["feature_low"] = self.feature_low
        if self.feature_high is not None:
            kw["feature_high"] = self.feature_high
        if self.family == "uniform_band":
            base = dict(feature_low=1.0, feature_high=2.0)
        elif self.family == "shifted_exponential":
            base = dict(feature_low=1.0, feature_high=5.0)
        else:
            base = {}
        base.update(kw)
        return Scenario(self.family, self.g_kind, price_law=self.price_law, n=n, seed=seed, **base)


def _opt_float(s):
    s = s.strip().lower()
    return None if s in ("none", "inf", "-inf", "") else float(s)


def _bool(s):
    s = s.strip().lower()
    if s in ("true", "yes", "1"):
        return True
    if s in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


# config key -> (field name, converter)
_KEYS: Dict[str, Tuple[str, object]] = {
    "scenario.name": ("scenario_name", str),
    "scenario.family": ("family", str),
    "scenario.g": ("g_kind", str),
    "scenario.price_law": ("price_law", parse_price_law),
    "scenario.feature_low": ("feature_low", float),
    "scenario.feature_high": ("feature_high", float),
    "learners": ("learners", lambda s: tuple(v.strip() for v in s.split(",") if v.strip())),
    "n_grid": ("n_grid", lambda s: tuple(int(v) for v in s.split(","))),
    "replications": ("replications", int),
    "base_seed": ("base_seed", int),
    "output_dir": ("output_dir", str),
    "workers": ("workers", int),
    "eval.n_mc": ("eval_n_mc", int),
    "eval.test_size": ("eval_test_size", int),
    "oracle.n": ("oracle_n", int),
    "oracle.method": ("oracle_method", str),
    "cv.demand": ("cv_demand", str),
    "cv.refine": ("cv_refine", int),
    "learner.hinge.c": ("hinge_c", float),
    "learner.quantile.tau": ("quantile_tau", float),
    "learner.eps.c1": ("eps_c1", _opt_float),
    "learner.eps.c2": ("eps_c2", _opt_float),
    "learner.kernel_ipw.bandwidth": ("ipw_bandwidth", float),
    "solver.max_iters": ("max_iters", int),
    "solver.multistarts": ("multistarts", int),
    "output.timing": ("record_timing", _bool),
}


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        if key not in _KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        name, conv = _KEYS[key]
        try:
            values[name] = conv(val)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from exc
    try:
        return ExperimentConfig(**values)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), str(path))
