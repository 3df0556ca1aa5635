"""Greedy top-down segmentation with per-segment outlier budgets, and the bottom-up baseline.

``td_orcs`` grows a segmentation one split at a time.  For every current
segment it alternates a binary split of the cleaned data ``x - z`` with an
outlier step that keeps exactly the segment's budget of largest residuals,
then splits the segment whose split reduces the squared loss the most.
WTD-ORCS is the same procedure with ``w="sqrt"``.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (OutlierAssignment, PrefixStats, Segmentation, Weights, as_sequence,
                   segment_sse)
from .prox import prox_l2
from .split import best_split

INNER_MAX_ITER = 50


@dataclass
class TopDownResult:
    segmentation: Segmentation
    outliers: OutlierAssignment
    split_history: list = field(default_factory=list)
    per_segment_budgets: list = field(default_factory=list)
    converged: bool = True

    @property
    def boundaries(self) -> list:
        return self.segmentation.boundaries


def robust_gamma(x_seg, mu, m: int, rule: str = "midpoint"):
    """Threshold that flags the ``m`` largest residuals ``x_i - mu_i``.

    Returns ``(gamma, indices)`` with 0-based indices of the top ``m`` residual
    norms (smaller index first on ties).  ``rule="midpoint"`` puts gamma
    halfway between the m-th and (m+1)-th largest norms; ``rule="lower"``
    puts it just above the (m+1)-th, which flags the same samples but shrinks
    them further.  ``m = 0`` gives ``(inf, set())``.  Detection is strict
    (``||r_i|| > gamma``), so a tie straddling the budget flags fewer than
    ``m`` samples.
    """
    x_seg = as_sequence(x_seg)
    n = x_seg.shape[0]
    if not 0 <= m < n:
        raise ValueError(f"outlier budget must lie in [0, {n}), got {m}")
    if rule not in ("midpoint", "lower"):
        raise ValueError(f"unknown gamma rule {rule!r}")
    if m == 0:
        return np.inf, set()
    mu = np.broadcast_to(np.asarray(mu, dtype=float).reshape(-1, x_seg.shape[1]), x_seg.shape)
    norms = np.linalg.norm(x_seg - mu, axis=1)
    order = np.lexsort((np.arange(n), -norms))
    hi, lo = norms[order[m - 1]], norms[order[m]]
    gamma = 0.5 * (hi + lo) if rule == "midpoint" else lo + 1e-9 * (hi - lo)
    return float(gamma), {int(i) for i in order[:m]}


def _piecewise_mean(y, cut):
    mu = np.empty_like(y)
    mu[:cut] = y[:cut].mean(axis=0)
    mu[cut:] = y[cut:].mean(axis=0)
    return mu


def _clean(xs, m, mu_of, rule="midpoint"):
    """Alternate mu <- mu_of(x - z) and z <- prox(x - mu) at budget ``m``.

    ``mu_of`` returns ``(mu, tag)``; the loop stops when ``(tag, outlier set)``
    repeats.  Returns ``(z, tag, converged)``.
    """
    z = np.zeros_like(xs)
    key = None
    tag = None
    for _ in range(INNER_MAX_ITER):
        mu, tag = mu_of(xs - z)
        gamma, _ = robust_gamma(xs, mu, m, rule)
        z = prox_l2(xs - mu, gamma)
        new_key = (tag, tuple(np.flatnonzero(np.any(z != 0, axis=1))))
        if new_key == key:
            return z, tag, True
        key = new_key
    return z, tag, False


@dataclass
class _Candidate:
    cut: int            # split position inside the segment (samples [0, cut) go left)
    gain: float         # squared-loss decrease L(j)
    z: np.ndarray
    converged: bool


def _evaluate(xs, m, weights: Weights, centroid: str, score: str, rule: str) -> _Candidate:
    n_s = xs.shape[0]
    if n_s < 2:
        return _Candidate(0, -np.inf, np.zeros_like(xs), True)
    w = weights.values(n_s)

    def mu_of(y):
        cut = best_split(y, w).index
        mu = _piecewise_mean(y, cut) if centroid == "piecewise" else np.broadcast_to(
            y.mean(axis=0), y.shape)
        return mu, cut

    z, cut, ok = _clean(xs, m, mu_of, rule)
    y = xs - z if score == "clean" else xs
    stats = PrefixStats(y)
    gain = stats.sse(0, n_s) - stats.sse(0, cut) - stats.sse(cut, n_s)
    return _Candidate(int(cut), float(max(gain, 0.0)), z, ok)


def _share_budget(m, count_l, count_r, n_l, n_r):
    """Children keep their detected counts; any deficit is split by length."""
    deficit = m - count_l - count_r
    extra_l = deficit * n_l // (n_l + n_r)
    m_l, m_r = count_l + extra_l, count_r + deficit - extra_l
    # a segment can hold at most len - 1 outliers; push overflow across
    for _ in range(2):
        if m_l > n_l - 1:
            m_r, m_l = m_r + m_l - (n_l - 1), n_l - 1
        if m_r > n_r - 1:
            m_l, m_r = m_l + m_r - (n_r - 1), n_r - 1
    return min(m_l, n_l - 1), min(m_r, n_r - 1)


def td_orcs(x, K: int, M: int = 0, w=None, centroid: str = "piecewise",
            score: str = "clean", gamma_rule: str = "midpoint") -> TopDownResult:
    """Top-down outlier-robust segmentation into ``K`` segments with ``M`` outliers.

    Parameters
    ----------
    x : array_like, shape (n,) or (n, d)
    K : number of segments, ``1 <= K <= n``.
    M : total outlier budget, ``0 <= M < n``.
    w : weight scheme (``Weights`` or its name), evaluated per segment length.
        ``"sqrt"`` gives WTD-ORCS.
    centroid : ``"piecewise"`` uses the mean of the candidate sub-segment as the
        reference for residuals; ``"segment"`` uses the whole-segment mean.
    score : ``"clean"`` scores a split by the squared-loss decrease on
        ``x - z``; ``"raw"`` scores it on ``x``.
    gamma_rule : placement of gamma inside the interval that flags exactly the
        budget, see ``robust_gamma``.
    """
    x = as_sequence(x)
    n = x.shape[0]
    if not 1 <= K <= n:
        raise ValueError(f"K must lie in [1, {n}]")
    if not 0 <= M < n:
        raise ValueError(f"M must lie in [0, {n})")
    if centroid not in ("piecewise", "segment") or score not in ("clean", "raw"):
        raise ValueError("unknown centroid or score option")
    if gamma_rule not in ("midpoint", "lower"):
        raise ValueError(f"unknown gamma rule {gamma_rule!r}")
    weights = Weights(w) if isinstance(w, str) else (w or Weights())
    if not isinstance(weights, Weights):
        raise TypeError("td_orcs takes a weight scheme, not explicit values")

    starts = [0]
    budgets = [M]
    cache = {}
    history = []
    converged = True
    while len(starts) < K:
        ends = starts[1:] + [n]
        best_j, best = -1, None
        for j, (a, b) in enumerate(zip(starts, ends)):
            key = (a, b, budgets[j])
            if key not in cache:
                cache[key] = _evaluate(x[a:b], budgets[j], weights, centroid, score, gamma_rule)
            cand = cache[key]
            if best is None or cand.gain > best.gain:
                best_j, best = j, cand
        a, b = starts[best_j], ends[best_j]
        cut = a + best.cut
        converged &= best.converged
        nz = np.any(best.z != 0, axis=1)
        m_l, m_r = _share_budget(budgets[best_j], int(nz[: best.cut].sum()),
                                 int(nz[best.cut:].sum()), cut - a, b - cut)
        starts.insert(best_j + 1, cut)
        budgets[best_j: best_j + 1] = [m_l, m_r]
        history.append((best_j, cut, best.gain))

    # final outlier step on each segment at its budget
    ends = starts[1:] + [n]
    z = np.zeros_like(x)
    for a, b, m in zip(starts, ends, budgets):
        zs, _, ok = _clean(x[a:b], m, lambda y: (np.broadcast_to(y.mean(axis=0), y.shape), 0),
                           gamma_rule)
        z[a:b] = zs
        converged &= ok
    seg = Segmentation.from_starts(x - z, starts)
    return TopDownResult(seg, OutlierAssignment.from_dense(z), history, budgets, converged)


def wtd_orcs(x, K: int, M: int = 0, **kw) -> TopDownResult:
    """``td_orcs`` with sqrt weights."""
    return td_orcs(x, K, M, w="sqrt", **kw)


def bottom_up(x, K: int) -> Segmentation:
    """Greedy bottom-up merging of adjacent segments by least SSE increase.

    Starts from singletons; ties go to the leftmost pair.
    """
    x = as_sequence(x)
    n = x.shape[0]
    if not 1 <= K <= n:
        raise ValueError(f"K must lie in [1, {n}]")
    stats = PrefixStats(x)
    end = list(range(1, n + 1))      # end[a]: exclusive end of segment starting at a
    nxt = list(range(1, n + 1))      # next segment start (n means none)
    prv = [-1] + list(range(n - 1))
    alive = [True] * n

    def cost(a, b):
        c = end[b]
        return stats.sse(a, c) - stats.sse(a, b) - stats.sse(b, c)

    heap = [(cost(a, a + 1), a, a + 1, end[a + 1]) for a in range(n - 1)]
    heapq.heapify(heap)
    k = n
    while k > K:
        c, a, b, eb = heapq.heappop(heap)
        if not (alive[a] and alive[b] and nxt[a] == b and end[b] == eb and end[a] == b):
            continue
        end[a] = eb
        alive[b] = False
        nxt[a] = nxt[b]
        if nxt[a] < n:
            prv[nxt[a]] = a
            heapq.heappush(heap, (cost(a, nxt[a]), a, nxt[a], end[nxt[a]]))
        p = prv[a]
        if p >= 0:
            heapq.heappush(heap, (cost(p, a), p, a, end[a]))
        k -= 1
    starts = [a for a in range(n) if alive[a]]
    return Segmentation.from_starts(x, starts)


def total_sse(x, starts) -> float:
    """Sum of within-segment squared errors for segment ``starts``."""
    x = as_sequence(x)
    ends = list(starts[1:]) + [x.shape[0]]
    return float(sum(segment_sse(x, a, b) for a, b in zip(starts, ends)))
