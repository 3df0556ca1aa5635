"""Analytic optimal binary split and the brute-force least-squares split."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import PrefixStats, WeightsLike, as_sequence, resolve_weights


@dataclass(frozen=True)
class SplitResult:
    """Binary split of a sequence.

    ``index`` is the 1-based split position: samples ``1..index`` form the
    first segment (equivalently, the 0-based start of the second segment).
    For :func:`best_split`, ``lambda_star`` is the critical fusion penalty
    g(index); for :func:`l0_best_split` it holds the minimal two-segment SSE.
    """

    index: int
    lambda_star: float
    g_values: Optional[np.ndarray] = None


def split_scores(x, w: WeightsLike = None) -> np.ndarray:
    """g(i, x) = i (n - i) / (w_i n) * ||mean(x[i:]) - mean(x[:i])|| for i = 1..n-1."""
    x = as_sequence(x)
    n = x.shape[0]
    if n < 2:
        raise ValueError("need at least two samples to split")
    w = resolve_weights(w, n)
    # running prefix sums; centering first keeps the difference well conditioned
    xc = x - x.mean(axis=0)
    s = np.cumsum(xc, axis=0)[:-1]
    # i (n - i) / n * (mean_right - mean_left) == -(prefix sum of centered data)
    norms = np.linalg.norm(s, axis=1)
    # rounding residue of a constant sequence is not a split
    norms[norms <= 64 * np.finfo(float).eps * n * np.abs(x).max()] = 0.0
    return norms / w


def best_split(x, w: WeightsLike = None) -> SplitResult:
    """Split maximizing g(i, x); ties go to the smallest index.

    With ``w="sqrt"`` the weights are sqrt(i (n - i) / n).  The un-normalized
    sqrt(i (n - i)) form gives the same index and lambda* scaled by 1/sqrt(n).
    """
    g = split_scores(x, w)
    i = int(np.argmax(g))
    return SplitResult(index=i + 1, lambda_star=float(g[i]), g_values=g)


def l0_best_split(x) -> SplitResult:
    """Exhaustive least-squares two-segment split (smallest index on ties)."""
    x = as_sequence(x)
    n = x.shape[0]
    if n < 2:
        raise ValueError("need at least two samples to split")
    stats = PrefixStats(x)
    costs = np.array([stats.sse(0, i) + stats.sse(i, n) for i in range(1, n)])
    i = int(np.argmin(costs))
    return SplitResult(index=i + 1, lambda_star=float(costs[i]), g_values=costs)
