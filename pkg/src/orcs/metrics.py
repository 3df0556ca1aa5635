"""Boundary matching, precision/recall, F, the R measure and mean boundary error."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def _as_index_list(a) -> list:
    out = [int(v) for v in a]
    if any(b <= a for a, b in zip(out, out[1:])):
        raise ValueError("boundary lists must be sorted and free of duplicates")
    return out


@dataclass(frozen=True)
class MatchReport:
    true_positives: int
    false_positives: int
    false_negatives: int
    matched_pairs: list = field(default_factory=list)   # (detected, truth, distance)
    tolerance: int = 0

    @property
    def n_detected(self) -> int:
        return self.true_positives + self.false_positives

    @property
    def n_truth(self) -> int:
        return self.true_positives + self.false_negatives

    @property
    def precision(self) -> float:
        return self.true_positives / self.n_detected if self.n_detected else float("nan")

    @property
    def recall(self) -> float:
        return self.true_positives / self.n_truth if self.n_truth else float("nan")

    @property
    def f(self) -> float:
        return f_measure(self.precision, self.recall) if self.n_detected and self.n_truth else 0.0

    @property
    def r(self) -> float:
        return r_measure_counts(self.true_positives, self.n_detected, self.n_truth)


def match_boundaries(detected, truth, tol: int) -> MatchReport:
    """One-to-one matching of detections to true boundaries within ``tol`` samples.

    Pairs are taken greedily by increasing distance; ties go to the pair with
    the smaller positions.  The tie key does not depend on which list is
    which, so ``TP(a, b) == TP(b, a)``.
    """
    det, tru = _as_index_list(detected), _as_index_list(truth)
    if tol < 0:
        raise ValueError("tolerance must be non-negative")
    cands = []
    j0 = 0
    for a in det:
        while j0 < len(tru) and tru[j0] < a - tol:
            j0 += 1
        j = j0
        while j < len(tru) and tru[j] <= a + tol:
            b = tru[j]
            cands.append((abs(a - b), min(a, b), max(a, b), a, b))
            j += 1
    cands.sort()
    used_d, used_t, pairs = set(), set(), []
    for dist, _, _, a, b in cands:
        if a in used_d or b in used_t:
            continue
        used_d.add(a)
        used_t.add(b)
        pairs.append((a, b, dist))
    pairs.sort(key=lambda p: p[1])
    tp = len(pairs)
    return MatchReport(tp, len(det) - tp, len(tru) - tp, pairs, int(tol))


def r_measure(precision: float, recall: float) -> float:
    """R = 1 - (|s1| + |s2|) / 2 with s1 = sqrt((1-r)^2 + (r/p - 1)^2), s2 = (r - r/p)/sqrt(2).

    Undefined for zero precision (raises ``ValueError``).
    """
    p, r = float(precision), float(recall)
    if not 0 < p <= 1 or not 0 <= r <= 1:
        raise ValueError("R needs precision in (0, 1] and recall in [0, 1]")
    return _r_from(r, r / p)


def _r_from(r: float, os: float) -> float:
    # os = r / p = (#detections) / (#true boundaries)
    s1 = math.hypot(1.0 - r, os - 1.0)
    s2 = (r - os) / math.sqrt(2.0)
    return 1.0 - 0.5 * (abs(s1) + abs(s2))


def r_measure_counts(tp: int, n_detected: int, n_truth: int) -> float:
    """R from counts; uses r/p = n_detected / n_truth, so it stays defined when tp = 0."""
    if n_truth <= 0:
        return float("nan")
    return _r_from(tp / n_truth, n_detected / n_truth)


def f_measure(precision: float, recall: float) -> float:
    """2 p r / (p + r); 0 when p = r = 0."""
    p, r = float(precision), float(recall)
    if p + r == 0:
        return 0.0
    return 2.0 * p * r / (p + r)


def mean_boundary_error(detected, truth) -> float:
    """Mean over true boundaries of the distance to the nearest detection.

    ``inf`` when nothing was detected.
    """
    det = np.asarray(list(detected), dtype=float)
    tru = np.asarray(list(truth), dtype=float)
    if tru.size == 0:
        raise ValueError("need at least one true boundary")
    if det.size == 0:
        return float("inf")
    return float(np.mean(np.min(np.abs(tru[:, None] - det[None, :]), axis=1)))
