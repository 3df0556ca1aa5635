"""Synthetic data, detection-error bounds for the binary split, and their Monte Carlo check.

Bound notation: ``n`` samples split at ``n1`` (``n2 = n - n1``), mean gap
``delta_mu`` and data bound ``B`` (every sample's range has width ``B``).
With ``C = 2 delta_mu^2 n1^2 / (B^2 n^2)`` the probability that the split
score at ``n1 + m`` beats the one at ``n1`` is at most ``2 exp(-C m)``, and the
detected split lies ``m0 = log(2 n2 / delta) / C`` or more samples away with
probability at most ``delta``.
"""
from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import Segmentation, WeightsLike, resolve_weights
from .split import split_scores


def trial_rng(seed: int, trial: int = 0) -> np.random.Generator:
    """Counter-based generator for (seed, trial); independent of execution order."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(trial)])))


@dataclass(frozen=True)
class SynthSpec:
    """Piecewise-constant sequence with optional noise and outliers.

    noise: ``"none"``, ``"uniform"`` (each coordinate uniform on
    ``[-noise_scale, noise_scale]``) or ``"tgauss"`` (Gaussian with sd
    ``noise_scale`` clipped to ``[-noise_clip, noise_clip]``).
    outlier_model: ``"none"``, ``"spike"`` (adds ``outlier_amplitude`` times a
    random unit vector) or ``"replace"`` (sample replaced by a uniform draw on
    ``[-outlier_amplitude, outlier_amplitude]^d``).
    """

    segment_means: tuple
    segment_lengths: tuple
    noise: str = "none"
    noise_scale: float = 0.0
    noise_clip: Optional[float] = None
    outlier_model: str = "none"
    outlier_count: int = 0
    outlier_amplitude: float = 0.0
    seed: int = 0

    def __post_init__(self):
        means = np.atleast_2d(np.asarray(self.segment_means, dtype=float))
        if means.shape[0] != len(self.segment_lengths):
            raise ValueError("need one mean per segment")
        if any(int(l) < 1 for l in self.segment_lengths):
            raise ValueError("segment lengths must be positive")
        if self.noise not in ("none", "uniform", "tgauss"):
            raise ValueError(f"unknown noise model {self.noise!r}")
        if self.noise == "tgauss" and not (self.noise_clip and self.noise_clip > 0):
            raise ValueError("truncated Gaussian noise needs a positive clip")
        if self.outlier_model not in ("none", "spike", "replace"):
            raise ValueError(f"unknown outlier model {self.outlier_model!r}")
        if self.outlier_count < 0 or self.outlier_count >= self.n:
            raise ValueError("outlier count must lie in [0, n)")
        object.__setattr__(self, "segment_means", tuple(map(tuple, means)))
        object.__setattr__(self, "segment_lengths", tuple(int(l) for l in self.segment_lengths))

    @property
    def n(self) -> int:
        return int(sum(self.segment_lengths))

    @property
    def d(self) -> int:
        return len(self.segment_means[0])

    @property
    def starts(self) -> tuple:
        return tuple(int(s) for s in np.cumsum((0,) + self.segment_lengths[:-1]))


def generate(spec: SynthSpec, trial: int = 0):
    """Draw a sequence from ``spec``.

    Returns ``(x, truth, outliers)``: the contaminated ``(n, d)`` array, the
    clean segmentation (true means as centroids) and the sorted 0-based
    outlier indices.  Noise and outliers use separate streams, so changing the
    outlier settings leaves the noise unchanged.
    """
    means = np.asarray(spec.segment_means)
    n, d = spec.n, spec.d
    labels = np.repeat(np.arange(len(spec.segment_lengths)), spec.segment_lengths)
    x = means[labels].copy()
    noise_rng, out_rng = (np.random.Generator(np.random.Philox(s)) for s in
                          np.random.SeedSequence([int(spec.seed), int(trial)]).spawn(2))
    if spec.noise == "uniform":
        x += noise_rng.uniform(-spec.noise_scale, spec.noise_scale, size=(n, d))
    elif spec.noise == "tgauss":
        x += np.clip(noise_rng.normal(0.0, spec.noise_scale, size=(n, d)),
                     -spec.noise_clip, spec.noise_clip)
    idx = np.array([], dtype=int)
    if spec.outlier_model != "none" and spec.outlier_count > 0:
        idx = np.sort(out_rng.choice(n, size=spec.outlier_count, replace=False))
        if spec.outlier_model == "spike":
            u = out_rng.normal(size=(idx.size, d))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
            x[idx] += spec.outlier_amplitude * u
        else:
            x[idx] = out_rng.uniform(-spec.outlier_amplitude, spec.outlier_amplitude,
                                     size=(idx.size, d))
    truth = Segmentation(spec.starts, means)
    return x, truth, [int(i) for i in idx]


def random_spec(n: int, K: int, d: int, seed: int, jump: float = 3.0, noise_scale: float = 1.0,
                outlier_count: int = 0, outlier_amplitude: float = 10.0, min_length: int = 5,
                noise: str = "tgauss", clip: float = 3.0) -> SynthSpec:
    """Random K-segment spec: segment lengths at least ``min_length`` and
    consecutive means ``jump`` apart in a random direction."""
    rng = trial_rng(seed, 2**32 - 1)
    if K * min_length > n:
        raise ValueError("segments do not fit")
    slack = n - K * min_length
    cuts = np.sort(rng.integers(0, slack + 1, size=K - 1))
    lengths = np.diff(np.concatenate([[0], cuts, [slack]])) + min_length
    steps = rng.normal(size=(K, d))
    steps /= np.linalg.norm(steps, axis=1, keepdims=True)
    means = np.cumsum(jump * steps, axis=0)
    return SynthSpec(tuple(map(tuple, means)), tuple(int(l) for l in lengths),
                     noise=noise, noise_scale=noise_scale,
                     noise_clip=clip * noise_scale if noise == "tgauss" else None,
                     outlier_model="spike" if outlier_count else "none",
                     outlier_count=outlier_count, outlier_amplitude=outlier_amplitude, seed=seed)


# -- analytic bounds ----------------------------------------------------------

@dataclass(frozen=True)
class BoundParams:
    """``data_bound`` B: each sample ranges over an interval of width B."""

    n: int
    n1: int
    delta_mu: float
    data_bound: float
    delta: float = 0.05

    def __post_init__(self):
        if not 0 < self.n1 < self.n:
            raise ValueError("need 0 < n1 < n")
        if not self.data_bound > 0:
            raise ValueError("data bound must be positive")
        if not 0 < self.delta:
            raise ValueError("delta must be positive")

    @property
    def n2(self) -> int:
        return self.n - self.n1

    @property
    def C(self) -> float:
        return 2.0 * self.delta_mu ** 2 * self.n1 ** 2 / (self.data_bound ** 2 * self.n ** 2)


def _check_m(p: BoundParams, m):
    m = np.asarray(m, dtype=float)
    if np.any(m <= 0) or np.any(m >= p.n2):
        raise ValueError(f"m must lie in (0, {p.n2})")
    return m


def error_probability_bound(p: BoundParams, m, kind: str = "simple"):
    """Bound on P(g(n1) < g(n1 + m)).

    kind ``"simple"``: 2 exp(-C m).  ``"minus"`` and ``"plus"``: the two
    refined terms B-, B+ whose sum bounds the same probability.
    """
    m = _check_m(p, m)
    n, n1, n2 = p.n, p.n1, p.n2
    a = 2.0 * n1 ** 2 * p.delta_mu ** 2 / p.data_bound ** 2
    if kind == "simple":
        out = 2.0 * np.exp(-p.C * m)
    elif kind == "minus":
        out = np.exp(-a * m / (n * (n - m)))
    elif kind == "plus":
        out = np.exp(-a * (2 * n2 - m) ** 2 / (n * (m * (n - m - 4 * n1) + 4 * n1 * (n - n1))))
    else:
        raise ValueError(f"unknown bound kind {kind!r}")
    return float(out) if out.ndim == 0 else out


def m0(p: BoundParams) -> float:
    """Distance beyond which the detected split falls with probability <= delta."""
    if p.C == 0:
        return np.inf
    return float(np.log(2.0 * p.n2 / p.delta) / p.C)


# -- Monte Carlo --------------------------------------------------------------

@dataclass
class SplitErrorCurve:
    m: np.ndarray
    empirical_p: np.ndarray            # P(g(n1) < g(n1 + m))
    bound_simple: np.ndarray
    bound_minus: np.ndarray
    bound_plus: np.ndarray
    m_star: np.ndarray = field(repr=False)   # signed offset of the detected split per trial
    m0: float = np.inf
    p_far: float = 0.0                 # P(|m*| >= m0)
    trials: int = 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["m", "empirical_p", "bound_simple", "bound_Bminus", "bound_Bplus"])
        for row in zip(self.m, self.empirical_p, self.bound_simple, self.bound_minus,
                       self.bound_plus):
            wr.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])
        return buf.getvalue()


def _trial_block(args):
    spec, w, trials, n1, m_max = args
    n = spec.n
    wv = resolve_weights(w, n)
    beats = np.zeros(m_max, dtype=np.int64)
    m_star = np.empty(len(trials), dtype=np.int64)
    for k, t in enumerate(trials):
        x, _, _ = generate(spec, t)
        g = split_scores(x, wv)
        i = int(np.argmax(g)) + 1
        m_star[k] = i - n1
        # g index j corresponds to split position j + 1
        beats += g[n1: n1 + m_max] > g[n1 - 1]
    return beats, m_star


def empirical_split_error(spec: SynthSpec, w: WeightsLike = None, trials: int = 1000,
                          m_max: Optional[int] = None, bound: Optional[BoundParams] = None,
                          threads: int = 1, chunk: int = 500) -> SplitErrorCurve:
    """Monte Carlo estimate of split errors on a two-segment ``spec``.

    Trial ``t`` draws ``generate(spec, t)``; the spec seed fixes the stream.
    ``bound`` defaults to the uniform-noise parameters of ``spec`` (mean gap
    norm, data bound ``2 * noise_scale`` or 1 without noise, delta 0.05).
    """
    if len(spec.segment_lengths) != 2:
        raise ValueError("split error needs a two-segment spec")
    n, n1 = spec.n, spec.segment_lengths[0]
    m_max = m_max or spec.segment_lengths[1] - 1
    m_max = min(m_max, spec.segment_lengths[1] - 1)
    if bound is None:
        gap = float(np.linalg.norm(np.subtract(*spec.segment_means[::-1])))
        # noise-free samples fit inside any interval; B = 1 then
        bound = BoundParams(n, n1, gap, 2.0 * spec.noise_scale if spec.noise_scale > 0 else 1.0)
    blocks = [(spec, w, range(a, min(a + chunk, trials)), n1, m_max)
              for a in range(0, trials, chunk)]
    if threads > 1 and len(blocks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(_trial_block, blocks))
    else:
        parts = [_trial_block(b) for b in blocks]
    beats = sum(p[0] for p in parts)
    m_star = np.concatenate([p[1] for p in parts])
    ms = np.arange(1, m_max + 1)
    mz = m0(bound)
    return SplitErrorCurve(
        m=ms, empirical_p=beats / trials,
        bound_simple=error_probability_bound(bound, ms, "simple"),
        bound_minus=error_probability_bound(bound, ms, "minus"),
        bound_plus=error_probability_bound(bound, ms, "plus"),
        m_star=m_star, m0=mz, p_far=float(np.mean(np.abs(m_star) >= mz)), trials=trials)
