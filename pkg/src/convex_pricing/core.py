"""Domain types shared by every other module.

A :class:`Dataset` holds posted-price observations ``(x, p, y)`` together with
the density of the logging policy at the observed price. Arrays are stored
column-wise and made read-only; :class:`Sample` is the row view.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, List, Optional, Sequence, Union

import numpy as np
from scipy import special

__all__ = [
    "Sample",
    "Dataset",
    "PropensityModel",
    "LinearPolicy",
    "Violation",
    "CsvFormatError",
    "validate_dataset",
    "fit_lognormal_propensity",
    "load_csv",
    "save_csv",
]


class CsvFormatError(ValueError):
    """Raised when a data file does not match the expected schema."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Sample:
    """One posted-price observation."""

    features: np.ndarray
    price: float
    sold: float
    propensity: Optional[float] = None


@dataclass(frozen=True, eq=False)
class Dataset:
    """Column-oriented collection of :class:`Sample` rows.

    Parameters
    ----------
    features : array, shape (n, m)
    price : array, shape (n,)
    sold : array, shape (n,)
        Sale indicators. Stored as floats so that losses can multiply by them.
    propensity : array, shape (n,), optional
        Logging-policy density at each observed price. ``None`` until filled
        by :meth:`with_propensity`.
    """

    features: np.ndarray
    price: np.ndarray
    sold: np.ndarray
    propensity: Optional[np.ndarray] = None

    def __post_init__(self):
        x = np.asarray(self.features, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2:
            raise ValueError("features must be a 2-D array")
        n = x.shape[0]
        object.__setattr__(self, "features", _frozen(x))
        for name in ("price", "sold"):
            col = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if col.shape[0] != n:
                raise ValueError(f"{name} has {col.shape[0]} entries, expected {n}")
            object.__setattr__(self, name, _frozen(col))
        if self.propensity is not None:
            prop = np.asarray(self.propensity, dtype=float).reshape(-1)
            if prop.shape[0] != n:
                raise ValueError(f"propensity has {prop.shape[0]} entries, expected {n}")
            object.__setattr__(self, "propensity", _frozen(prop))

    @classmethod
    def from_samples(cls, samples: Sequence[Sample]) -> "Dataset":
        samples = list(samples)
        if not samples:
            raise ValueError("cannot build a Dataset from zero samples")
        dims = {len(np.atleast_1d(s.features)) for s in samples}
        if len(dims) != 1:
            raise ValueError(f"samples disagree on feature dimension: {sorted(dims)}")
        props = [s.propensity for s in samples]
        prop = None if any(p is None for p in props) else props
        return cls(
            np.array([np.atleast_1d(s.features) for s in samples], dtype=float),
            [s.price for s in samples],
            [s.sold for s in samples],
            prop,
        )

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.n

    def __iter__(self) -> Iterator[Sample]:
        return iter(self.samples)

    @property
    def samples(self) -> List[Sample]:
        prop = self.propensity
        return [
            Sample(self.features[i], float(self.price[i]), float(self.sold[i]),
                   None if prop is None else float(prop[i]))
            for i in range(self.n)
        ]

    def with_propensity(self, model: Union["PropensityModel", np.ndarray]) -> "Dataset":
        """Return a copy whose propensities come from ``model`` (or an explicit array)."""
        if isinstance(model, PropensityModel):
            prop = model.density(self.price)
        else:
            prop = np.asarray(model, dtype=float)
        return Dataset(self.features, self.price, self.sold, prop)

    def subset(self, index) -> "Dataset":
        index = np.asarray(index)
        prop = None if self.propensity is None else self.propensity[index]
        return Dataset(self.features[index], self.price[index], self.sold[index], prop)

    def split(self, fraction: float, rng: np.random.Generator):
        """Random disjoint split; the first part holds ``round(fraction * n)`` rows."""
        if not 0.0 < fraction < 1.0:
            raise ValueError("split fraction must lie in (0, 1)")
        perm = rng.permutation(self.n)
        k = int(round(fraction * self.n))
        return self.subset(np.sort(perm[:k])), self.subset(np.sort(perm[k:]))

    def equals(self, other: "Dataset") -> bool:
        if (self.propensity is None) != (other.propensity is None):
            return False
        same = (
            self.features.shape == other.features.shape
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.price, other.price)
            and np.array_equal(self.sold, other.sold)
        )
        if self.propensity is not None:
            same = same and np.array_equal(self.propensity, other.propensity)
        return bool(same)


@dataclass(frozen=True)
class Violation:
    index: int
    message: str


def validate_dataset(
    data: Union[Dataset, Iterable[Sample]], feature_dim: Optional[int] = None
) -> List[Violation]:
    """List every row that would make a fit ill-posed.

    An empty list means the data are fit-ready. Accepts a :class:`Dataset` or
    a plain iterable of :class:`Sample` (the only form in which ragged feature
    vectors can occur).
    """
    samples = data.samples if isinstance(data, Dataset) else list(data)
    if feature_dim is None:
        feature_dim = data.feature_dim if isinstance(data, Dataset) else (
            len(np.atleast_1d(samples[0].features)) if samples else 0)
    out: List[Violation] = []
    if not samples:
        out.append(Violation(-1, "dataset is empty"))
    for i, s in enumerate(samples):
        if len(np.atleast_1d(s.features)) != feature_dim:
            out.append(Violation(i, f"feature dimension {len(np.atleast_1d(s.features))} != {feature_dim}"))
        if not np.all(np.isfinite(s.features)):
            out.append(Violation(i, "non-finite feature"))
        if not (s.price > 0):
            out.append(Violation(i, "price not positive"))
        if s.sold not in (0, 1):
            out.append(Violation(i, "sale indicator not binary"))
        if s.propensity is None:
            out.append(Violation(i, "propensity unset"))
        elif not (s.propensity > 0) or not math.isfinite(s.propensity):
            out.append(Violation(i, "overlap violated: propensity must be positive"))
    return out


# ---------------------------------------------------------------------------
# historical pricing policies


_KINDS = ("uniform", "triangular", "exponential", "lognormal")


@dataclass(frozen=True)
class PropensityModel:
    """Feature-independent density of the logging (historical) price.

    Use the named constructors; ``params`` holds floats in the order listed
    for each kind: uniform ``(a, b)``, triangular ``(low, mode, high)``,
    exponential ``(scale, location)``, lognormal ``(mu, sigma)``.
    """

    kind: str
    params: tuple

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(v) for v in self.params))
        k, p = self.kind, self.params
        if k not in _KINDS:
            raise ValueError(f"unknown propensity kind {k!r}")
        if k == "uniform" and not (len(p) == 2 and p[0] < p[1]):
            raise ValueError("uniform(a, b) needs a < b")
        if k == "triangular" and not (len(p) == 3 and p[0] <= p[1] <= p[2] and p[0] < p[2]):
            raise ValueError("triangular(low, mode, high) needs low <= mode <= high, low < high")
        if k == "exponential" and not (len(p) == 2 and p[0] > 0):
            raise ValueError("exponential needs scale > 0")
        if k == "lognormal" and not (len(p) == 2 and p[1] > 0):
            raise ValueError("lognormal needs sigma > 0")

    @classmethod
    def uniform(cls, a: float, b: float) -> "PropensityModel":
        return cls("uniform", (a, b))

    @classmethod
    def triangular(cls, low: float, mode: float, high: float) -> "PropensityModel":
        return cls("triangular", (low, mode, high))

    @classmethod
    def exponential(cls, scale: Optional[float] = None, location: float = 0.0,
                    rate: Optional[float] = None) -> "PropensityModel":
        """Shifted exponential; give exactly one of ``scale`` or ``rate``."""
        if (scale is None) == (rate is None):
            raise ValueError("give exactly one of scale or rate")
        if rate is not None:
            if rate <= 0:
                raise ValueError("exponential needs rate > 0")
            scale = 1.0 / rate
        return cls("exponential", (scale, location))

    @classmethod
    def lognormal(cls, mu: float, sigma: float) -> "PropensityModel":
        return cls("lognormal", (mu, sigma))

    @property
    def support(self):
        k, p = self.kind, self.params
        if k == "uniform":
            return p[0], p[1]
        if k == "triangular":
            return p[0], p[2]
        if k == "exponential":
            return p[1], math.inf
        return 0.0, math.inf

    def density(self, price):
        p = np.asarray(price, dtype=float)
        k, q = self.kind, self.params
        if k == "uniform":
            a, b = q
            out = np.where((p >= a) & (p <= b), 1.0 / (b - a), 0.0)
        elif k == "triangular":
            lo, mode, hi = q
            up = 2.0 * (p - lo) / ((hi - lo) * (mode - lo)) if mode > lo else np.zeros_like(p)
            down = 2.0 * (hi - p) / ((hi - lo) * (hi - mode)) if hi > mode else np.zeros_like(p)
            out = np.where(p < mode, up, down)
            if mode == hi:
                out = np.where(p == hi, 2.0 / (hi - lo), out)
            out = np.where((p >= lo) & (p <= hi), out, 0.0)
        elif k == "exponential":
            scale, loc = q
            z = (p - loc) / scale
            out = np.where(z >= 0, np.exp(-np.maximum(z, 0.0)) / scale, 0.0)
        else:
            mu, sigma = q
            safe = np.where(p > 0, p, 1.0)
            val = np.exp(-((np.log(safe) - mu) ** 2) / (2 * sigma**2)) / (safe * sigma * math.sqrt(2 * math.pi))
            out = np.where(p > 0, val, 0.0)
        return float(out) if out.ndim == 0 else out

    def cdf(self, price):
        p = np.asarray(price, dtype=float)
        k, q = self.kind, self.params
        if k == "uniform":
            a, b = q
            out = np.clip((p - a) / (b - a), 0.0, 1.0)
        elif k == "triangular":
            lo, mode, hi = q
            left = (p - lo) ** 2 / ((hi - lo) * (mode - lo)) if mode > lo else np.zeros_like(p)
            right = 1.0 - (hi - p) ** 2 / ((hi - lo) * (hi - mode)) if hi > mode else np.ones_like(p)
            out = np.where(p <= lo, 0.0, np.where(p >= hi, 1.0, np.where(p < mode, left, right)))
        elif k == "exponential":
            scale, loc = q
            out = np.where(p <= loc, 0.0, -np.expm1(-(p - loc) / scale))
        else:
            mu, sigma = q
            safe = np.where(p > 0, p, 1.0)
            out = np.where(p > 0, special.ndtr((np.log(safe) - mu) / sigma), 0.0)
        return float(out) if np.ndim(out) == 0 else out

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        k, q = self.kind, self.params
        if k == "uniform":
            return rng.uniform(q[0], q[1], size)
        if k == "triangular":
            return rng.triangular(q[0], q[1], q[2], size)
        if k == "exponential":
            return q[1] + rng.exponential(q[0], size)
        return rng.lognormal(q[0], q[1], size)


def fit_lognormal_propensity(prices: Iterable[float]) -> PropensityModel:
    """Maximum-likelihood lognormal fit (population standard deviation of log-prices)."""
    p = np.asarray(list(prices), dtype=float)
    if p.size < 2:
        raise ValueError("need at least two prices")
    if np.any(p <= 0):
        raise ValueError("prices must be positive to fit a lognormal")
    logs = np.log(p)
    sigma = float(np.std(logs))
    if sigma <= 1e-12:
        raise ValueError("degenerate price history: log-prices have zero variance")
    return PropensityModel.lognormal(float(np.mean(logs)), sigma)


# ---------------------------------------------------------------------------
# policies


@dataclass(frozen=True, eq=False)
class LinearPolicy:
    """Price ``<theta, x>``; with ``includes_intercept`` the last coefficient multiplies 1."""

    theta: np.ndarray
    includes_intercept: bool = False

    def __post_init__(self):
        object.__setattr__(self, "theta", _frozen(np.atleast_1d(self.theta)))

    @property
    def dim(self) -> int:
        return self.theta.shape[0] - (1 if self.includes_intercept else 0)

    def design(self, features) -> np.ndarray:
        x = np.atleast_2d(np.asarray(features, dtype=float))
        if self.includes_intercept:
            x = np.hstack([x, np.ones((x.shape[0], 1))])
        return x

    def price(self, features):
        """Vectorized over rows of ``features``; a 1-D input gives a scalar."""
        single = np.ndim(features) == 1
        out = self.design(features) @ self.theta
        return float(out[0]) if single else out

    def norm(self) -> float:
        return float(np.linalg.norm(self.theta))


# ---------------------------------------------------------------------------
# CSV


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def save_csv(data: Dataset, path: Union[str, Path]) -> None:
    """Write ``x0..x{m-1},price,sold[,propensity]`` with round-trip float formatting."""
    m = data.feature_dim
    header = [f"x{j}" for j in range(m)] + ["price", "sold"]
    if data.propensity is not None:
        header.append("propensity")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(data.n):
            row = [_fmt(v) for v in data.features[i]] + [_fmt(data.price[i]), str(int(data.sold[i]))]
            if data.propensity is not None:
                row.append(_fmt(data.propensity[i]))
            w.writerow(row)


def load_csv(path: Union[str, Path], has_propensity: Optional[bool] = None) -> Dataset:
    """Parse a posted-price CSV file.

    ``has_propensity=None`` auto-detects the optional column; ``True`` makes it
    required. Without the column the dataset's propensities stay unset.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CsvFormatError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    for col in ("price", "sold"):
        if col not in header:
            raise CsvFormatError(f"{path}: missing required column {col!r}")
    present = "propensity" in header
    if has_propensity and not present:
        raise CsvFormatError(f"{path}: missing required column 'propensity'")
    if has_propensity is False:
        present = False
    feat_cols = [h for h in header if h.startswith("x")]
    expected = [f"x{j}" for j in range(len(feat_cols))]
    if feat_cols != expected or not feat_cols:
        raise CsvFormatError(f"{path}: feature columns must be x0..x{{m-1}}, got {feat_cols}")
    fi = [header.index(c) for c in expected]
    pi, si = header.index("price"), header.index("sold")
    qi = header.index("propensity") if present else None

    feats, price, sold, prop = [], [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise CsvFormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            feats.append([float(row[j]) for j in fi])
            price.append(float(row[pi]))
            if qi is not None:
                prop.append(float(row[qi]))
        except ValueError as exc:
            raise CsvFormatError(f"{path}:{lineno}: {exc}") from None
        s = row[si].strip()
        if s not in ("0", "1"):
            raise CsvFormatError(f"{path}:{lineno}: sold must be 0 or 1, got {s!r}")
        sold.append(float(s))
    if not price:
        raise CsvFormatError(f"{path}: no data rows")
    return Dataset(np.array(feats), price, sold, prop if qi is not None else None)
