"""Critical parameters and the (gamma, lambda) solution-path grid."""
from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .core import SolverConfig, Weights, as_sequence
from .prox import prox
from .solver import solve_orcs
from .split import best_split

log = logging.getLogger(__name__)


def gamma_star(x):
    """Smallest gamma at which no sample is an outlier: max_i ||x_i - mean(x)||.

    Returns ``(gamma, index)`` with the 0-based argmax (smallest on ties).
    """
    x = as_sequence(x)
    dev = np.linalg.norm(x - x.mean(axis=0), axis=1)
    i = int(np.argmax(dev))
    return float(dev[i]), i


def _huber_parts(r, gamma, q):
    """Loss, psi = r - prox(r) and Hessian of the Huber loss at residual rows ``r``."""
    n, d = r.shape
    if q == 1:
        out = np.abs(r) > gamma
        loss = np.where(out, gamma * np.abs(r) - 0.5 * gamma ** 2, 0.5 * r * r).sum()
        return loss, np.clip(r, -gamma, gamma), np.diag((~out).sum(axis=0).astype(float))
    nr = np.linalg.norm(r, axis=1)
    out = nr > gamma
    loss = np.where(out, gamma * nr - 0.5 * gamma ** 2, 0.5 * nr * nr).sum()
    psi = r * np.where(out, gamma / np.maximum(nr, 1e-300), 1.0)[:, None]
    H = (~out).sum() * np.eye(d)
    if out.any():
        u = r[out] / nr[out, None]
        c = gamma / nr[out]
        H += c.sum() * np.eye(d) - (u * c[:, None]).T @ u
    return loss, psi, H


def huber_location(x, gamma: float, q: int = 2, tol: float = 1e-12, max_iter: int = 500):
    """Single-segment fixed point mu = mean(x - z), z = prox(x - mu).

    The fixed point minimizes the summed Huber loss of ``x - mu``.  Newton
    steps with backtracking replace the plain iteration, which is a gradient
    step of size 1/n and stalls when most samples lie beyond ``gamma``; the
    plain step is the fallback and the convergence test.

    Returns ``(mu, z, converged)``.
    """
    x = as_sequence(x)
    n, d = x.shape
    mu = x.mean(axis=0)
    scale = max(float(np.abs(x).max()), 1.0)
    for _ in range(max_iter):
        f, psi, H = _huber_parts(x - mu, gamma, q)
        g = psi.sum(axis=0)             # minus the gradient
        if float(np.abs(g).max()) / n <= tol * scale:
            return mu, prox(x - mu, gamma, q), True
        cand = [mu + g / n]
        try:
            delta = np.linalg.solve(H + 1e-12 * n * np.eye(d), g)
        except np.linalg.LinAlgError:
            delta = None
        if delta is not None:
            if float(np.abs(delta).max()) <= tol * scale:
                mu = mu + delta
                return mu, prox(x - mu, gamma, q), True
            cand.insert(0, mu + delta)
        slack = 8 * np.finfo(float).eps * abs(f)     # rounding in the loss near the optimum
        for step in cand:
            t = 1.0
            while t > 1e-10:
                new = mu + t * (step - mu)
                if _huber_parts(x - new, gamma, q)[0] <= f - 1e-4 * t * float(g @ (step - mu)) + slack:
                    break
                t *= 0.5
            else:
                continue
            break
        else:
            return mu, prox(x - mu, gamma, q), float(np.abs(g).max()) / n <= 1e-9 * scale
        mu = new
    return mu, prox(x - mu, gamma, q), False


def lambda_star_given_gamma(x, gamma: float, w=None, q: int = 2, full: bool = False):
    """Largest lambda giving two segments once outliers at level ``gamma`` are removed.

    With ``full=True`` returns ``(lambda_star, z, converged)``; otherwise a
    non-converged fixed point is logged and the value returned as is.
    """
    x = as_sequence(x)
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    _, z, ok = huber_location(x, gamma, q)
    if not ok:
        log.warning("lambda_star_given_gamma: fixed point not reached (gamma=%g)", gamma)
    lam = best_split(x - z, w).lambda_star if x.shape[0] > 1 else 0.0
    return (lam, z, ok) if full else lam


@dataclass
class PathGrid:
    """Solutions over a grid of gamma (rows) and per-gamma lambda values (columns)."""

    n: int
    gamma_values: np.ndarray
    lambda_values: np.ndarray          # (G, L), per-gamma
    segments: np.ndarray               # (G, L) int
    outliers: np.ndarray               # (G, L) int
    objective: np.ndarray              # (G, L)
    converged: np.ndarray              # (G, L) bool
    solutions: list = field(default_factory=list, repr=False)   # [g][l] -> (starts, outlier indices)

    @property
    def shape(self):
        return self.segments.shape

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["gamma", "lambda", "segments", "outliers", "objective", "status"])
        G, L = self.shape
        for g in range(G):
            for l in range(L):
                wr.writerow([repr(float(self.gamma_values[g])), repr(float(self.lambda_values[g, l])),
                             int(self.segments[g, l]), int(self.outliers[g, l]),
                             repr(float(self.objective[g, l])),
                             "ok" if self.converged[g, l] else "not_converged"])
        return buf.getvalue()

    def outlier_histogram(self) -> dict:
        vals, counts = np.unique(self.outliers, return_counts=True)
        return {int(v): int(c) for v, c in zip(vals, counts)}


def grid_values(x, grid_shape, w=None, q: int = 2):
    """Gamma values uniform in (0, gamma*) and log-spaced lambda values per gamma."""
    G, L = grid_shape
    if G < 1 or L < 1:
        raise ValueError("grid shape must be positive")
    gs, _ = gamma_star(x)
    gammas = gs * np.arange(1, G + 1) / (G + 1)
    lams = np.empty((G, L))
    for k, g in enumerate(gammas):
        ls = lambda_star_given_gamma(x, g, w, q) if g > 0 else best_split(x, w).lambda_star
        lams[k] = ls * (np.geomspace(1e-3, 1 - 1e-6, L) if L > 1 else np.array([0.5]))
    return gammas, lams


def _solve_column(args):
    x, gamma, lams, cfg, warm = args
    out = []
    mu = None
    # largest lambda first so each solve warm-starts from a coarser segmentation
    for lam in lams[::-1]:
        sol = solve_orcs(x, replace(cfg, lam=float(lam), gamma=float(gamma)),
                         init_mu=mu if warm else None)
        mu = sol.mu
        out.append((sol.segmentation.n_segments, len(sol.outliers), sol.objective,
                    sol.converged, sol.segmentation.starts, tuple(sol.outliers.indices)))
    return out[::-1]


def sweep(x, grid_shape=(35, 35), cfg: Optional[SolverConfig] = None, threads: int = 1,
          warm: bool = True) -> PathGrid:
    """Solve the joint problem on every cell of a (gamma, lambda) grid.

    ``cfg`` supplies weights, q and tolerances; its lambda and gamma are
    overwritten per cell.  Columns (fixed gamma) run in parallel over
    ``threads`` worker processes; results do not depend on ``threads``.
    """
    x = as_sequence(x)
    cfg = cfg or SolverConfig(lam=0.0)
    gammas, lams = grid_values(x, grid_shape, cfg.weights, cfg.q)
    jobs = [(x, g, lams[k], cfg, warm) for k, g in enumerate(gammas)]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            cols = list(ex.map(_solve_column, jobs))
    else:
        cols = [_solve_column(j) for j in jobs]
    G, L = lams.shape
    seg = np.array([[c[0] for c in col] for col in cols], dtype=int).reshape(G, L)
    out = np.array([[c[1] for c in col] for col in cols], dtype=int).reshape(G, L)
    obj = np.array([[c[2] for c in col] for col in cols], dtype=float).reshape(G, L)
    ok = np.array([[c[3] for c in col] for col in cols], dtype=bool).reshape(G, L)
    sols = [[(c[4], c[5]) for c in col] for col in cols]
    for k in range(G):
        bad = np.flatnonzero(np.diff(seg[k]) > 0)
        if bad.size:
            log.info("segment count increases with lambda at gamma=%g (%d places)",
                     gammas[k], bad.size)
    return PathGrid(x.shape[0], gammas, lams, seg, out, obj, ok, sols)


def estimate_outlier_count(grid: PathGrid) -> Optional[int]:
    """Mode of per-cell outlier counts, ignoring 0 and counts >= n/2.

    Ties go to the smaller count; ``None`` when no cell remains.
    """
    c = grid.outliers.ravel()
    c = c[(c > 0) & (c < grid.n / 2)]
    if c.size == 0:
        return None
    vals, counts = np.unique(c, return_counts=True)
    return int(vals[np.argmax(counts)])
