"""Mapping continuous features to bounded integer levels and back.

Two schemes are supported: splitting sorted values at large gaps
(``discretize_interval``) and cutting at quantile positions
(``discretize_quantile``). Both return a :class:`DiscretizedDataset` that
remembers, for every level, the smallest and largest training value mapped
to it. Level boundaries in the original space sit halfway between adjacent
levels; a value exactly on a boundary belongs to the lower level.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class DataError(ValueError):
    """Raised for malformed input data (non-finite values, bad shapes)."""


@dataclass(frozen=True)
class DiscretizationSpec:
    scheme: str  # "interval" or "quantile"
    param: float

    def __post_init__(self):
        if self.scheme == "interval":
            if not 0.0 <= self.param < 1.0:
                raise ValueError(f"interval delta must lie in [0, 1), got {self.param}")
        elif self.scheme == "quantile":
            if int(self.param) != self.param or self.param < 2:
                raise ValueError(f"quantile M must be an integer >= 2, got {self.param}")
        else:
            raise ValueError(f"unknown discretization scheme {self.scheme!r}")

    @classmethod
    def parse(cls, text: str) -> "DiscretizationSpec":
        """Parse ``quantile:M`` or ``interval:DELTA``."""
        scheme, _, value = text.partition(":")
        if not value:
            raise ValueError(f"expected SCHEME:VALUE, got {text!r}")
        if scheme == "quantile":
            return cls("quantile", int(value))
        return cls(scheme, float(value))

    def __str__(self):
        if self.scheme == "quantile":
            return f"quantile:{int(self.param)}"
        return f"interval:{self.param!r}"


@dataclass(frozen=True)
class OriginalInterval:
    """Per-feature bounds ``(lower, upper]`` in the original space."""

    lower: tuple
    upper: tuple

    def contains(self, x) -> bool:
        return all(lo < v <= hi for lo, v, hi in zip(self.lower, x, self.upper))


@dataclass(frozen=True)
class DiscretizedDataset:
    xbar: np.ndarray
    s: tuple
    zmin: tuple  # zmin[j][level]: smallest training value at that level
    zmax: tuple  # zmax[j][level]: largest training value at that level
    source_columns: tuple = ()
    spec: DiscretizationSpec | None = None
    thresholds: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        cuts = tuple(
            np.array([(hi[k] + lo[k + 1]) / 2.0 for k in range(len(lo) - 1)], dtype=float)
            for lo, hi in zip(self.zmin, self.zmax)
        )
        object.__setattr__(self, "thresholds", cuts)

    @property
    def n(self) -> int:
        return self.xbar.shape[0]

    @property
    def d(self) -> int:
        return self.xbar.shape[1]


def _check_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise DataError(f"expected a non-empty 2-D matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DataError("input contains NaN or infinite values")
    return X


def _from_cut_values(X, cut_values, columns, spec) -> DiscretizedDataset:
    n, d = X.shape
    xbar = np.empty((n, d), dtype=np.int64)
    s, zmin, zmax = [], [], []
    for j in range(d):
        cuts = np.unique(np.asarray(cut_values[j], dtype=float))
        # a cut value c separates c (low side) from anything larger
        levels = np.searchsorted(cuts, X[:, j], side="left")
        # drop levels no sample reached so levels stay consecutive
        used, levels = np.unique(levels, return_inverse=True)
        xbar[:, j] = levels
        s.append(len(used))
        zmin.append(tuple(float(X[levels == k, j].min()) for k in range(len(used))))
        zmax.append(tuple(float(X[levels == k, j].max()) for k in range(len(used))))
    if not columns:
        columns = tuple(f"x{j}" for j in range(d))
    return DiscretizedDataset(xbar, tuple(s), tuple(zmin), tuple(zmax), tuple(columns), spec)


def discretize_interval(X, delta: float, columns: Sequence[str] = ()) -> DiscretizedDataset:
    """Split each feature wherever consecutive sorted values are far apart.

    Adjacent sorted values receive different levels iff their gap exceeds
    ``delta * (max - min)`` of that feature. ``delta=0`` gives every distinct
    value its own level.
    """
    spec = DiscretizationSpec("interval", delta)
    X = _check_matrix(X)
    cut_values = []
    for j in range(X.shape[1]):
        v = np.sort(X[:, j])
        gaps = np.diff(v)
        width = v[-1] - v[0]
        cut_values.append(v[:-1][gaps > delta * width])
    return _from_cut_values(X, cut_values, columns, spec)


def quantile_cuts(values, M: int) -> list:
    """Cut positions for one feature under the quantile scheme.

    Returns 1-based positions ``p`` in the sorted column such that a level
    boundary falls between sorted entries ``p`` and ``p + 1``.
    """
    v = np.sort(np.asarray(values, dtype=float))
    n = len(v)

    def at(o):  # 1-based access
        return v[o - 1]

    cuts = set()
    for m in range(1, M):
        q = 1 + (n - 1) * m / M
        lo, hi = int(np.floor(q)), int(np.ceil(q))
        if at(lo) != at(hi):
            cuts.add(lo)
            continue
        x = at(lo)
        first = int(np.searchsorted(v, x, side="left")) + 1
        last = int(np.searchsorted(v, x, side="right"))
        if q <= (first + last) / 2:
            # boundary just below the run of x
            if first > 1:
                cuts.add(first - 1)
        elif last < n:
            cuts.add(last)
    return sorted(cuts)


def discretize_quantile(X, M: int, columns: Sequence[str] = ()) -> DiscretizedDataset:
    """Cut each feature near its ``M``-quantiles; yields at most ``M`` levels."""
    spec = DiscretizationSpec("quantile", M)
    X = _check_matrix(X)
    cut_values = []
    for j in range(X.shape[1]):
        v = np.sort(X[:, j])
        cut_values.append([v[p - 1] for p in quantile_cuts(v, M)])
    return _from_cut_values(X, cut_values, columns, spec)


def discretize(X, spec: DiscretizationSpec, columns: Sequence[str] = ()) -> DiscretizedDataset:
    if spec.scheme == "interval":
        return discretize_interval(X, spec.param, columns)
    return discretize_quantile(X, int(spec.param), columns)


def segment_to_original(seg, ds: DiscretizedDataset) -> OriginalInterval:
    lower, upper = [], []
    for j, (lo, hi) in enumerate(zip(seg.lo, seg.hi)):
        t = ds.thresholds[j]
        lower.append(-np.inf if lo == 0 else float(t[lo - 1]))
        upper.append(np.inf if hi == ds.s[j] - 1 else float(t[hi]))
    return OriginalInterval(tuple(lower), tuple(upper))


def discretize_apply(x, ds: DiscretizedDataset) -> np.ndarray:
    """Level vector of a single sample; out-of-range values clamp to the end levels."""
    x = np.asarray(x, dtype=float)
    if x.shape != (ds.d,):
        raise DataError(f"expected a vector of length {ds.d}, got shape {x.shape}")
    return discretize_apply_many(x[None, :], ds)[0]


def discretize_apply_many(X, ds: DiscretizedDataset) -> np.ndarray:
    X = _check_matrix(X)
    if X.shape[1] != ds.d:
        raise DataError(f"expected {ds.d} columns, got {X.shape[1]}")
    out = np.empty(X.shape, dtype=np.int64)
    for j in range(ds.d):
        out[:, j] = np.searchsorted(ds.thresholds[j], X[:, j], side="left")
    return out
