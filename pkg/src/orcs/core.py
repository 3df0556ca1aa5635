"""Shared data model: sequences, weights, segmentations, outliers and the joint objective.

A sequence is an ``(n, d)`` float array.  Indices are 0-based throughout; a
boundary "after sample i" (1-based) is the 0-based segment start ``i``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence as Seq, Union

import numpy as np


def as_sequence(x) -> np.ndarray:
    """Validate ``x`` and return it as a 2-D ``(n, d)`` float64 array.

    1-D input is read as ``n`` scalar samples.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"sequence must be 1-D or 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("sequence needs at least one sample of dimension >= 1")
    if not np.all(np.isfinite(arr)):
        raise ValueError("sequence contains non-finite entries")
    return arr


@dataclass(frozen=True)
class Weights:
    """Fusion weight scheme.

    ``uniform``: w_i = 1.  ``sqrt``: w_i = sqrt(i (n - i) / n), which makes the
    binary split rule coincide with the least-squares two-segment split.
    ``power``: w_i = (i (n - i)) ** alpha with alpha in [0, 1].
    Positions i run over 1..n-1 (boundary after sample i).
    """

    scheme: str = "uniform"
    alpha: float = 0.5

    def __post_init__(self):
        if self.scheme not in ("uniform", "sqrt", "power"):
            raise ValueError(f"unknown weight scheme {self.scheme!r}")
        if self.scheme == "power" and not 0.0 <= self.alpha <= 1.0:
            raise ValueError("power weights need alpha in [0, 1]")

    def values(self, n: int) -> np.ndarray:
        i = np.arange(1, n, dtype=float)
        if self.scheme == "uniform":
            return np.ones(n - 1)
        if self.scheme == "sqrt":
            return np.sqrt(i * (n - i) / n)
        return (i * (n - i)) ** self.alpha


WeightsLike = Union[Weights, str, Seq[float], np.ndarray, None]


def resolve_weights(w: WeightsLike, n: int) -> np.ndarray:
    """Return the ``n - 1`` weight values for ``w`` (scheme, name or explicit array)."""
    if w is None:
        w = Weights()
    if isinstance(w, str):
        w = Weights(w)
    if isinstance(w, Weights):
        return w.values(n)
    arr = np.asarray(w, dtype=float).ravel()
    if arr.shape != (n - 1,):
        raise ValueError(f"expected {n - 1} weights, got {arr.shape[0]}")
    if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
        raise ValueError("weights must be finite and positive")
    return arr


@dataclass(frozen=True)
class Segmentation:
    starts: tuple
    centroids: np.ndarray = field(repr=False)

    def __post_init__(self):
        starts = tuple(int(s) for s in self.starts)
        if not starts or starts[0] != 0:
            raise ValueError("segmentation starts must begin with 0")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("segmentation starts must be strictly increasing")
        cents = np.atleast_2d(np.asarray(self.centroids, dtype=float))
        if cents.shape[0] != len(starts):
            raise ValueError("need one centroid per segment")
        object.__setattr__(self, "starts", starts)
        object.__setattr__(self, "centroids", cents)

    @property
    def n_segments(self) -> int:
        return len(self.starts)

    @property
    def boundaries(self) -> list:
        """Boundaries in the 1-based "after sample i" convention."""
        return list(self.starts[1:])

    def labels(self, n: int) -> np.ndarray:
        if self.starts[-1] >= n:
            raise ValueError("segment start beyond sequence length")
        lab = np.zeros(n, dtype=int)
        lab[list(self.starts[1:])] = 1
        return np.cumsum(lab)

    def expand(self, n: int) -> np.ndarray:
        """Per-sample centroids, shape ``(n, d)``."""
        return self.centroids[self.labels(n)]

    @classmethod
    def from_mu(cls, mu: np.ndarray, jump_tol: float = 0.0) -> "Segmentation":
        """Read segments off per-sample centroids; jumps of norm <= jump_tol are merged."""
        mu = as_sequence(mu)
        jumps = np.linalg.norm(np.diff(mu, axis=0), axis=1)
        starts = [0] + [int(i) + 1 for i in np.flatnonzero(jumps > jump_tol)]
        return cls(tuple(starts), mu[starts])

    @classmethod
    def from_starts(cls, x: np.ndarray, starts) -> "Segmentation":
        """Segmentation with segment means of ``x`` as centroids."""
        x = as_sequence(x)
        starts = tuple(int(s) for s in starts)
        ends = starts[1:] + (x.shape[0],)
        cents = np.array([x[a:b].mean(axis=0) for a, b in zip(starts, ends)])
        return cls(starts, cents)


@dataclass(frozen=True)
class OutlierAssignment:
    entries: Mapping[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for i, v in self.entries.items():
            v = np.asarray(v, dtype=float).ravel()
            if int(i) < 0:
                raise ValueError("outlier index must be non-negative")
            if not np.any(v != 0):
                raise ValueError(f"outlier vector at {i} is zero")
            clean[int(i)] = v
        object.__setattr__(self, "entries", dict(sorted(clean.items())))

    @property
    def indices(self) -> list:
        return list(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def dense(self, n: int, d: int) -> np.ndarray:
        z = np.zeros((n, d))
        for i, v in self.entries.items():
            if i >= n or v.shape[0] != d:
                raise ValueError("outlier entry inconsistent with sequence shape")
            z[i] = v
        return z

    @classmethod
    def from_dense(cls, z: np.ndarray) -> "OutlierAssignment":
        z = np.atleast_2d(np.asarray(z, dtype=float))
        nz = np.flatnonzero(np.any(z != 0, axis=1))
        return cls({int(i): z[i].copy() for i in nz})


@dataclass(frozen=True)
class SolverConfig:
    lam: float
    gamma: float = np.inf
    q: int = 2
    weights: Weights = Weights()
    tol: float = 1e-8
    max_iter: int = 10000
    alt_max_iter: int = 500

    def __post_init__(self):
        if self.lam < 0 or not np.isfinite(self.lam):
            raise ValueError("lambda must be finite and non-negative")
        if not self.gamma >= 0:
            raise ValueError("gamma must be non-negative (inf allowed)")
        if self.q not in (1, 2):
            raise ValueError("q must be 1 or 2")
        if self.tol <= 0 or self.max_iter < 1 or self.alt_max_iter < 1:
            raise ValueError("tol must be positive and iteration caps >= 1")


def objective_dense(x, mu, z, lam, gamma, w, q=2) -> float:
    """Joint objective for per-sample arrays ``mu`` and ``z`` (both ``(n, d)``)."""
    x = as_sequence(x)
    if mu.shape != x.shape or z.shape != x.shape:
        raise ValueError("x, mu and z must share shape")
    n = x.shape[0]
    loss = 0.5 * float(np.sum((x - z - mu) ** 2))
    fuse = 0.0
    if n > 1 and lam > 0:
        w = resolve_weights(w, n)
        fuse = lam * float(np.dot(w, np.linalg.norm(np.diff(mu, axis=0), axis=1)))
    pen = 0.0
    if np.any(z != 0):
        if not np.isfinite(gamma):
            return np.inf
        zn = np.abs(z).sum(axis=1) if q == 1 else np.linalg.norm(z, axis=1)
        pen = gamma * float(zn.sum())
    return loss + fuse + pen


def objective(x, seg: Segmentation, z: OutlierAssignment, cfg: SolverConfig) -> float:
    x = as_sequence(x)
    n, d = x.shape
    if seg.centroids.shape[1] != d:
        raise ValueError("centroid dimension does not match the sequence")
    return objective_dense(x, seg.expand(n), z.dense(n, d), cfg.lam, cfg.gamma,
                           cfg.weights, cfg.q)


class PrefixStats:
    """Prefix sums of x and ||x||^2 for O(d) segment means and SSE queries.

    Accumulation is in ``np.longdouble`` to limit cancellation.
    """

    def __init__(self, x):
        x = as_sequence(x)
        self.n, self.d = x.shape
        xl = x.astype(np.longdouble)
        self._s = np.zeros((self.n + 1, self.d), dtype=np.longdouble)
        self._s[1:] = np.cumsum(xl, axis=0)
        self._q = np.zeros(self.n + 1, dtype=np.longdouble)
        self._q[1:] = np.cumsum(np.sum(xl * xl, axis=1))

    def _check(self, a, b):
        if not 0 <= a < b <= self.n:
            raise ValueError(f"invalid range [{a}, {b}) for n={self.n}")

    def mean(self, a: int, b: int) -> np.ndarray:
        self._check(a, b)
        return np.asarray((self._s[b] - self._s[a]) / (b - a), dtype=float)

    def sse(self, a: int, b: int) -> float:
        self._check(a, b)
        tot = self._s[b] - self._s[a]
        val = (self._q[b] - self._q[a]) - np.sum(tot * tot) / (b - a)
        return max(float(val), 0.0)


def segment_sse(x, a: int, b: int) -> float:
    """Sum of squared deviations from the mean over samples ``[a, b)``."""
    return PrefixStats(x).sse(a, b)
