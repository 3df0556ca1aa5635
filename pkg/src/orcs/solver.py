"""Exact solvers for the fused group-lasso subproblem and the joint ORCS objective.

The mu-subproblem

    min_mu  1/2 sum ||xhat_i - mu_i||^2 + lam * sum w_i ||mu_{i+1} - mu_i||_2

is solved with an active-set method over segment centroids: for a fixed set
of boundaries the objective is smooth in the centroids (while all jumps are
nonzero) and Newton's method converges quadratically on a block-tridiagonal
system.  Boundaries whose jump collapses are merged; interior positions whose
cumulative residual s_i = sum_{j<=i} (xhat_j - mu_j) violates ||s_i|| <= lam w_i
are added.  At termination the s_i form the optimality certificate.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.linalg import solveh_banded

from .core import (OutlierAssignment, Segmentation, SolverConfig, WeightsLike,
                   as_sequence, objective_dense, resolve_weights)
from .prox import prox

log = logging.getLogger(__name__)

_EPS = np.finfo(float).eps


def data_scale(x: np.ndarray) -> float:
    """max_i ||x_i - mean(x)||; the unit for jump and residual tolerances."""
    return float(np.linalg.norm(x - x.mean(axis=0), axis=1).max())


@dataclass
class MuSolution:
    mu: np.ndarray
    dual: np.ndarray = field(repr=False)
    dual_norms: np.ndarray = field(repr=False)
    iterations: int
    converged: bool
    jump_tol: float = 0.0

    @property
    def segmentation(self) -> Segmentation:
        return Segmentation.from_mu(self.mu, self.jump_tol)

    @property
    def starts(self) -> tuple:
        return self.segmentation.starts


# -- Newton on segment centroids ---------------------------------------------

def _reduced_objective(c, counts, sums, pen):
    f = 0.5 * np.sum(counts[:, None] * c * c) - np.sum(sums * c)
    if len(pen):
        f += float(np.dot(pen, np.linalg.norm(np.diff(c, axis=0), axis=1)))
    return f


_STEPS = 0.5 ** np.arange(40)


def _reduced_objective_batch(c, step, ts, counts, sums, pen):
    """Reduced objective at ``c + t * step`` for every t in ``ts``."""
    cand = c[None] + ts[:, None, None] * step[None]
    f = np.einsum("tkd,tkd->t", cand, (0.5 * counts[:, None]) * cand - sums)
    if len(pen):
        jumps = np.diff(cand, axis=1)
        f = f + np.sqrt(np.einsum("tkd,tkd->tk", jumps, jumps)) @ pen
    return f


def _reduced_grad(c, counts, sums, pen):
    g = counts[:, None] * c - sums
    if len(pen):
        delta = np.diff(c, axis=0)
        e = delta / np.linalg.norm(delta, axis=1, keepdims=True)
        pe = pen[:, None] * e
        g[:-1] -= pe
        g[1:] += pe
    return g


def _banded_hessian(c, counts, pen, extra=None):
    """Upper banded storage of the block-tridiagonal Hessian (bandwidth 2d - 1).

    ``extra`` adds (K, d, d) blocks to the diagonal.
    """
    K, d = c.shape
    A = None
    diag = np.zeros((K, d, d)) if extra is None else extra.copy()
    diag[:, np.arange(d), np.arange(d)] += counts[:, None]
    if K > 1:
        delta = np.diff(c, axis=0)
        nrm = np.linalg.norm(delta, axis=1)
        e = delta / nrm[:, None]
        A = (pen / nrm)[:, None, None] * (np.eye(d)[None] - e[:, :, None] * e[:, None, :])
        diag[:-1] += A
        diag[1:] += A
    return _pack_banded(diag, A if K > 1 else None)


def _pack_banded(diag, A):
    """Upper banded storage from (K, d, d) diagonal blocks and (K-1, d, d) couplings."""
    K, d, _ = diag.shape
    ab = np.zeros((2 * d, K * d))
    rows, cols, a, b, rows2, cols2, a2, b2 = _band_pattern(K, d)
    ab[rows, cols] = diag[:, a, b].ravel()
    if A is not None:
        ab[rows2, cols2] = -A[:, a2, b2].ravel()
    return ab


@lru_cache(maxsize=64)
def _band_pattern(K, d):
    u = 2 * d - 1
    a, b = np.triu_indices(d)
    cols = (np.arange(K)[:, None] * d + b[None, :]).ravel()
    rows = np.tile(u + a - b, K)
    a2, b2 = (v.ravel() for v in np.indices((d, d)))
    cols2 = ((np.arange(K - 1)[:, None] + 1) * d + b2[None, :]).ravel()
    rows2 = np.tile(u - d + a2 - b2, max(K - 1, 0))
    return rows, cols, a, b, rows2, cols2, a2, b2


def _merge(starts, counts, sums, pen, c, k):
    """Remove boundary k (between segments k and k+1)."""
    nk = counts[k] + counts[k + 1]
    ck = (counts[k] * c[k] + counts[k + 1] * c[k + 1]) / nk
    starts = starts[: k + 1] + starts[k + 2:]
    counts = np.concatenate([counts[:k], [nk], counts[k + 2:]])
    sums = np.concatenate([sums[:k], (sums[k] + sums[k + 1])[None], sums[k + 2:]])
    c = np.concatenate([c[:k], ck[None], c[k + 2:]])
    pen = np.concatenate([pen[:k], pen[k + 1:]])
    return starts, counts, sums, pen, c


def _newton(starts, counts, sums, pen, c, merge_tol, gtol, max_iter, fscale, protected=()):
    iters = 0
    reopened = {}
    while True:
        # a collapsed jump is either fused, or reopened along the residual
        # when fusing would violate optimality at that boundary
        while len(pen):
            nrm = np.linalg.norm(np.diff(c, axis=0), axis=1)
            k = int(np.argmin(nrm))
            if nrm[k] > merge_tol:
                break
            sk, cm = _fused_residual(counts, sums, c, k)
            sn = np.linalg.norm(sk)
            pos = starts[k + 1]
            # positions that were fused once and came back get a looser test,
            # since the residual is read before the other centroids settle
            slack = 1e-2 if pos in protected else -1e-9
            if sn > pen[k] * (1 - slack) and reopened.get(pos, 0) < 50:
                reopened[pos] = reopened.get(pos, 0) + 1
                u = sk / sn
                excess = max(sn - pen[k], 1e3 * merge_tol)
                c = c.copy()
                c[k] = cm + (excess / counts[k]) * u
                c[k + 1] = cm - (excess / counts[k + 1]) * u
                continue
            starts, counts, sums, pen, c = _merge(starts, counts, sums, pen, c, k)
        g = _reduced_grad(c, counts, sums, pen)
        if np.abs(g).max() <= gtol:
            return starts, counts, sums, pen, c, iters, True
        if iters >= max_iter:
            return starts, counts, sums, pen, c, iters, False
        iters += 1
        K, d = c.shape
        if K == 1:
            step = -g / counts[:, None]
        else:
            try:
                step = -solveh_banded(_banded_hessian(c, counts, pen), g.ravel(),
                                      check_finite=False).reshape(K, d)
            except np.linalg.LinAlgError:
                step = -g / counts[:, None]
        k = _kink_merge(starts, counts, sums, pen, c, step, protected)
        if k is not None:
            starts, counts, sums, pen, c = _merge(starts, counts, sums, pen, c, k)
            continue
        f0 = _reduced_objective(c, counts, sums, pen)
        slope = float(np.sum(g * step))
        if -slope <= 10 * _EPS * fscale:
            # decrement below objective round-off: take the full step and stop
            c = c + step
            return starts, counts, sums, pen, c, iters, True
        # Armijo backtracking with all halvings evaluated in one pass
        ok = _reduced_objective_batch(c, step, _STEPS, counts, sums, pen) <= f0 + 1e-4 * _STEPS * slope
        if not ok.any():
            # no further progress possible in floating point
            return starts, counts, sums, pen, c, iters, np.abs(g).max() <= 1e3 * gtol
        c = c + _STEPS[int(np.argmax(ok))] * step


def _fused_residual(counts, sums, c, k):
    """Residual s at boundary k if segments k and k+1 were fused at their mean."""
    nk = counts[k] + counts[k + 1]
    cm = (counts[k] * c[k] + counts[k + 1] * c[k + 1]) / nk
    return np.sum(sums[:k] - counts[:k, None] * c[:k], axis=0) + sums[k] - counts[k] * cm, cm


def _kink_merge(starts, counts, sums, pen, c, step, protected):
    """Jump that the Newton step drives through zero and that may be fused.

    Newton crawls toward the kink of ||delta|| at zero; fusing such a jump
    directly is safe when the fused residual respects its bound (the outer
    active-set loop re-adds it otherwise).
    """
    if not len(pen):
        return None
    dc = np.diff(c, axis=0)
    ds = np.diff(step, axis=0)
    dd = np.einsum("kd,kd->k", ds, ds)
    with np.errstate(divide="ignore", invalid="ignore"):
        tk = -np.einsum("kd,kd->k", dc, ds) / dd
    tk = np.where(dd > 0, tk, np.inf)
    near = np.linalg.norm(dc + np.where(np.isfinite(tk), tk, 0.0)[:, None] * ds, axis=1)
    cand = np.flatnonzero((tk > 0) & (tk <= 1) & (near <= 0.1 * np.linalg.norm(dc, axis=1)))
    for k in cand[np.argsort(tk[cand], kind="stable")]:
        if starts[k + 1] in protected:
            continue
        sk, _ = _fused_residual(counts, sums, c, k)
        if np.linalg.norm(sk) <= pen[k]:
            return int(k)
    return None


def _seg_arrays(xc, starts):
    n = xc.shape[0]
    idx = np.asarray(starts)
    counts = np.diff(np.append(idx, n)).astype(float)
    sums = np.add.reduceat(xc, idx, axis=0)
    return counts, sums


def _smoothed_centroids(xc, pen_all, scale, max_iter=200):
    """Damped Newton on the objective with ||delta|| replaced by sqrt(||delta||^2 + eps^2).

    eps shrinks from 0.1 to 1e-8 (times ``scale``); each stage starts from the
    previous one.  The smooth problem has no kinks, so this converges where the
    active-set iteration can cycle.  Returns per-sample centroids (centered).
    """
    n, d = xc.shape
    mu = xc.copy()
    eye = np.eye(d)
    for eps in 10.0 ** -np.arange(1, 9):
        e2 = (eps * scale) ** 2

        def f(m):
            dd = np.diff(m, axis=0)
            return 0.5 * np.sum((m - xc) ** 2) + pen_all @ np.sqrt(np.einsum("kd,kd->k", dd, dd) + e2)

        for _ in range(max_iter):
            dd = np.diff(mu, axis=0)
            r = np.sqrt(np.einsum("kd,kd->k", dd, dd) + e2)
            e = dd / r[:, None]
            g = mu - xc
            pe = pen_all[:, None] * e
            g[:-1] -= pe
            g[1:] += pe
            if np.abs(g).max() <= 1e-12 * scale * n:
                break
            A = (pen_all / r)[:, None, None] * (eye[None] - e[:, :, None] * e[:, None, :])
            diag = np.broadcast_to(eye, (n, d, d)).copy()
            diag[:-1] += A
            diag[1:] += A
            step = -solveh_banded(_pack_banded(diag, A), g.ravel(),
                                  check_finite=False).reshape(n, d)
            f0, slope, t = f(mu), float(np.sum(g * step)), 1.0
            while f(mu + t * step) > f0 + 1e-4 * t * slope and t > 1e-12:
                t *= 0.5
            mu = mu + t * step
            if t * np.abs(step).max() <= 1e-14 * scale:
                break
    return mu


def kkt_residuals(xhat, mu):
    """Cumulative residuals s_i = sum_{j<=i}(xhat_j - mu_j), i = 1..n (rows)."""
    return np.cumsum(np.asarray(xhat, float) - np.asarray(mu, float), axis=0)


def solve_mu(xhat, lam: float, w: WeightsLike = None, tol: float = 1e-8,
             max_iter: int = 10000, init_starts=None, tol_kkt: float = 1e-6,
             init_mu=None) -> MuSolution:
    """Solve the mu-subproblem exactly and return it with its dual certificate.

    ``init_starts`` seeds the active boundary set and ``init_mu`` (an
    ``(n, d)`` previous solution, taking precedence) seeds both boundaries and
    centroids.  The optimum is unique, so warm starts change the result only
    within tolerance.
    ``converged=False`` flags a best-effort iterate when the iteration cap was hit.
    """
    xhat = as_sequence(xhat)
    n, d = xhat.shape
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    scale = data_scale(xhat)
    jump_tol = 1e-6 * scale
    if n == 1 or lam == 0 or scale == 0:
        mu = xhat.copy() if lam == 0 else np.repeat(xhat.mean(axis=0)[None], n, axis=0)
        s = kkt_residuals(xhat, mu)[:-1]
        return MuSolution(mu, s, np.linalg.norm(s, axis=1), 0, True, jump_tol)

    w = resolve_weights(w, n)
    pen_all = lam * w
    xbar = xhat.mean(axis=0)
    xc = xhat - xbar
    merge_tol = 1e-8 * scale
    gtol_floor = 100 * _EPS * n * scale

    starts = [0]
    if init_mu is not None:
        init_mu = as_sequence(init_mu)
        if init_mu.shape != xhat.shape:
            raise ValueError("init_mu must match xhat in shape")
        jumps = np.linalg.norm(np.diff(init_mu, axis=0), axis=1)
        starts += [int(i) + 1 for i in np.flatnonzero(jumps > merge_tol)]
    elif init_starts is not None:
        starts += sorted({int(s) for s in init_starts if 0 < int(s) < n})
    counts, sums = _seg_arrays(xc, starts)
    c = init_mu[starts] - xbar if init_mu is not None else sums / counts[:, None]
    pen = pen_all[np.asarray(starts[1:], dtype=int) - 1]
    # warm-start boundaries with identical means carry no direction; drop them
    keep = [0] + [k + 1 for k in range(len(pen))
                  if np.linalg.norm(c[k + 1] - c[k]) > merge_tol]
    if len(keep) < len(starts):
        starts = [starts[k] for k in keep]
        counts, sums = _seg_arrays(xc, starts)
        c = sums / counts[:, None]
        pen = pen_all[np.asarray(starts[1:], dtype=int) - 1]

    total_iters = 0
    fused_away, protected = set(), set()
    converged = False
    newton_ok = True
    max_outer = 4 * n + 50
    seen = set()
    # restarts left when the active set cycles: cold (after a warm start), then smoothed
    restarts = ["cold", "smooth"] if len(starts) > 1 else ["smooth"]
    for _ in range(max_outer):
        if tuple(starts) in seen and restarts:
            how = restarts.pop(0)
            seen.clear()
            fused_away, protected = set(), set()
            if how == "cold":
                starts = [0]
            else:
                mu_s = _smoothed_centroids(xc, pen_all, scale)
                jn = np.linalg.norm(np.diff(mu_s, axis=0), axis=1)
                starts = [0] + [int(i) + 1 for i in np.flatnonzero(jn > jump_tol)]
            counts, sums = _seg_arrays(xc, starts)
            c = sums / counts[:, None]
            if how == "smooth":
                c = np.add.reduceat(mu_s, starts, axis=0) / counts[:, None]
            pen = pen_all[np.asarray(starts[1:], dtype=int) - 1]
        K = len(starts)
        before = list(starts)
        seen.add(tuple(starts))
        gtol = max(1e-3 * tol * pen_all.min() / K, gtol_floor)
        budget = max(max_iter - total_iters, 1)
        starts, counts, sums, pen, c, it, newton_ok = _newton(
            starts, counts, sums, pen, c, merge_tol, gtol, budget, n * scale ** 2, protected)
        total_iters += it
        fused_away |= set(before) - set(starts)
        labels = np.repeat(np.arange(len(starts)), counts.astype(int))
        mu_c = c[labels]
        s = kkt_residuals(xc, mu_c)[:-1]
        ratio = np.linalg.norm(s, axis=1) / pen_all
        inactive = np.ones(n - 1, dtype=bool)
        inactive[np.asarray(starts[1:], dtype=int) - 1] = False
        viol = np.flatnonzero(inactive & (ratio > 1.0 + 0.1 * tol_kkt))
        if viol.size == 0:
            converged = newton_ok
            break
        if total_iters >= max_iter:
            break
        # add the worst violator inside each segment
        seg = labels[viol]
        order = np.lexsort((viol, -ratio[viol], seg))
        first = np.ones(order.size, dtype=bool)
        first[1:] = seg[order][1:] != seg[order][:-1]
        new_pos = viol[order[first]]
        protected |= fused_away & {int(p) + 1 for p in new_pos}
        starts, counts, sums, pen, c = _add_boundaries(
            xc, starts, c, s, pen_all, new_pos)
    else:
        log.warning("solve_mu: active-set loop hit its cap (n=%d, lam=%g)", n, lam)

    labels = np.repeat(np.arange(len(starts)), counts.astype(int))
    mu = c[labels] + xbar
    s = kkt_residuals(xhat, mu)[:-1]
    return MuSolution(mu, s, np.linalg.norm(s, axis=1), total_iters, converged, jump_tol)


def _add_boundaries(xc, starts, c, s, pen_all, new_pos):
    n = xc.shape[0]
    new_starts = sorted(set(starts) | {int(p) + 1 for p in new_pos})
    # each new segment inherits its parent's centroid, nudged along the violating residual
    old = np.asarray(starts)
    parent = np.searchsorted(old, new_starts, side="right") - 1
    c_new = c[parent].copy()
    bounds = list(new_starts) + [n]
    added = {int(p) + 1 for p in new_pos}
    for j, st in enumerate(new_starts):
        if st not in added:
            continue
        sv = s[st - 1]
        norm = np.linalg.norm(sv)
        u = sv / norm
        excess = norm - pen_all[st - 1]
        n_left = st - bounds[j - 1]
        n_right = bounds[j + 1] - st
        c_new[j - 1] = c_new[j - 1] + (excess / n_left) * u
        c_new[j] = c_new[j] - (excess / n_right) * u
    counts, sums = _seg_arrays(xc, new_starts)
    pen = pen_all[np.asarray(new_starts[1:], dtype=int) - 1]
    return new_starts, counts, sums, pen, c_new


def kkt_violation(sol: MuSolution, xhat, lam: float, w: WeightsLike = None) -> dict:
    """Worst-case relative violations of the optimality certificate.

    ``bound``: max_i ||s_i|| / (lam w_i) - 1 (must be <= tol);
    ``balance``: ||s_n|| / scale;
    ``jump_norm``: max over jumps of 1 - ||s_i|| / (lam w_i);
    ``jump_angle``: max over jumps of 1 - cos(-s_i, mu_{i+1} - mu_i).
    """
    xhat = as_sequence(xhat)
    n = xhat.shape[0]
    out = {"bound": 0.0, "balance": 0.0, "jump_norm": 0.0, "jump_angle": 0.0}
    full = kkt_residuals(xhat, sol.mu)
    scale = data_scale(xhat) or 1.0
    out["balance"] = float(np.linalg.norm(full[-1])) / scale
    if n == 1:
        return out
    s = full[:-1]
    pen = lam * resolve_weights(w, n)
    sn = np.linalg.norm(s, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        out["bound"] = float(np.max(np.where(pen > 0, sn / pen - 1.0, np.where(sn > 0, np.inf, -1.0))))
    delta = np.diff(sol.mu, axis=0)
    dn = np.linalg.norm(delta, axis=1)
    jumps = np.flatnonzero(dn > sol.jump_tol)
    if jumps.size and lam > 0:
        out["jump_norm"] = float(np.max(1.0 - sn[jumps] / pen[jumps]))
        cos = -np.sum(s[jumps] * delta[jumps], axis=1) / (sn[jumps] * dn[jumps])
        out["jump_angle"] = float(np.max(1.0 - cos))
    return out


# -- joint solver -------------------------------------------------------------

def _huber_terms(r, gamma):
    """Huber loss, its gradient in r and the outlier mask for residual rows ``r``."""
    nr = np.linalg.norm(r, axis=-1)
    out = nr > gamma
    loss = np.where(out, gamma * nr - 0.5 * gamma ** 2, 0.5 * nr ** 2)
    psi = np.where(out[..., None], gamma * r / np.maximum(nr, 1e-300)[..., None], r)
    return loss, psi, out, nr


def _polish(x, starts, mu, lam, gamma, w, gtol, max_iter=50):
    """Newton on segment centroids for the objective with z minimized out (q = 2).

    With z eliminated the data term is the Huber loss of the residuals, so
    every accepted step decreases the joint objective; jumps that collapse
    are fused.  Returns the expanded centroids, or None without progress.
    """
    n, d = x.shape
    starts = list(starts)
    c = mu[starts].copy()
    merge_tol = 1e-8 * max(data_scale(x), 1.0)

    def layout(starts):
        K = len(starts)
        labels = np.repeat(np.arange(K), np.diff(np.append(starts, n)))
        pen = lam * w[np.asarray(starts[1:], dtype=int) - 1] if K > 1 else np.zeros(0)
        return K, labels, pen

    K, labels, pen = layout(starts)

    def f_batch(cand):
        loss, _, _, _ = _huber_terms(x[None] - cand[:, labels], gamma)
        f = loss.sum(axis=1)
        if K > 1:
            f = f + np.linalg.norm(np.diff(cand, axis=1), axis=2) @ pen
        return f

    f = f_batch(c[None])[0]
    moved = False
    for _ in range(max_iter):
        if K > 1:
            jn = np.linalg.norm(np.diff(c, axis=0), axis=1)
            k = int(np.argmin(jn))
            if jn[k] <= merge_tol:
                # collapsed jump: fuse the two segments; the next mu-step re-checks it
                del starts[k + 1]
                c = np.delete(c, k + 1, axis=0)
                K, labels, pen = layout(starts)
                moved = True
                f = f_batch(c[None])[0]
                continue
        r = x - c[labels]
        _, psi, out, nr = _huber_terms(r, gamma)
        g = _reduced_grad(c, np.zeros(K), np.zeros((K, d)), pen)
        g -= np.add.reduceat(psi, starts, axis=0)
        if np.abs(g).max() <= gtol:
            break
        # inliers contribute I, outliers gamma/||r|| (I - rr^T/||r||^2)
        H = np.zeros((K, d, d))
        inl = np.bincount(labels, weights=(~out).astype(float), minlength=K)
        if out.any():
            ro = r[out] / nr[out, None]
            blk = (gamma / nr[out])[:, None, None] * (np.eye(d)[None] - ro[:, :, None] * ro[:, None, :])
            np.add.at(H, labels[out], blk)
        try:
            if K == 1:
                step = -np.linalg.solve(H[0] + inl[0] * np.eye(d), g[0])[None]
            else:
                step = -solveh_banded(_banded_hessian(c, inl, pen, H), g.ravel()).reshape(K, d)
        except (np.linalg.LinAlgError, ValueError):
            return None
        slope = float(np.sum(g * step))
        if not slope < 0:
            break
        fs = f_batch(c[None] + _STEPS[:, None, None] * step[None])
        ok = np.flatnonzero(fs <= f + 1e-4 * _STEPS * slope)
        if ok.size == 0:
            break
        t = _STEPS[ok[0]]
        c = c + t * step
        moved = moved or fs[ok[0]] < f
        f = fs[ok[0]]
    return c[labels] if moved else None


@dataclass
class OrcsSolution:
    segmentation: Segmentation
    outliers: OutlierAssignment
    objective: float
    outer_iterations: int
    converged: bool
    mu: np.ndarray = field(repr=False)
    z: np.ndarray = field(repr=False)
    history: list = field(default_factory=list, repr=False)


def solve_orcs(x, cfg: SolverConfig, init_starts=None, init_mu=None) -> OrcsSolution:
    """Alternating minimization of the joint objective over (mu, z).

    Starts from z = 0 with an exact mu-step, then alternates z <- prox(x - mu)
    and mu <- solve_mu(x - z).  Once the (outlier set, segment starts) pair
    repeats, a Newton step on the segment centroids with z minimized out
    replaces the slow tail of the alternation (q = 2 only).  Stops when the
    relative objective change over an outer iteration drops below
    ``cfg.tol``.  ``history`` records the objective after every half-step.
    """
    x = as_sequence(x)
    n, d = x.shape
    w = resolve_weights(cfg.weights, n)

    def obj(mu, z):
        return objective_dense(x, mu, z, cfg.lam, cfg.gamma, w, cfg.q)

    z = np.zeros_like(x)
    sol = solve_mu(x, cfg.lam, w, tol=cfg.tol, max_iter=cfg.max_iter, init_starts=init_starts,
                   init_mu=init_mu)
    mu = sol.mu
    mu_ok = sol.converged
    history = [obj(mu, z)]
    prev_key = None
    converged = False
    it = 0
    for it in range(1, cfg.alt_max_iter + 1):
        z = prox(x - mu, cfg.gamma, cfg.q)
        history.append(obj(mu, z))
        new = solve_mu(x - z, cfg.lam, w, tol=cfg.tol, max_iter=cfg.max_iter,
                       init_mu=mu)
        f_new = obj(new.mu, z)
        if f_new <= history[-1]:
            sol, mu, mu_ok = new, new.mu, new.converged
            history.append(f_new)
        else:
            # inexact mu-step would increase the objective: keep the previous centroids
            history.append(history[-1])
        key = (tuple(np.flatnonzero(np.any(z != 0, axis=1))), sol.starts)
        rel = abs(history[-3] - history[-1]) / max(abs(history[-3]), 1e-300)
        if rel < cfg.tol:
            converged = mu_ok
            break
        if key == prev_key and cfg.q == 2 and np.isfinite(cfg.gamma) and cfg.gamma > 0:
            # structure has settled; alternation only converges linearly from here
            mu_p = _polish(x, sol.starts, mu, cfg.lam, cfg.gamma, w,
                           gtol=1e-10 * max(data_scale(x), 1.0))
            if mu_p is not None:
                z_p = prox(x - mu_p, cfg.gamma, cfg.q)
                f_p = obj(mu_p, z_p)
                if f_p <= history[-1]:
                    mu, z = mu_p, z_p
                    history.append(f_p)
                    history.append(f_p)
        prev_key = key
    seg = Segmentation.from_mu(mu, sol.jump_tol)
    return OrcsSolution(seg, OutlierAssignment.from_dense(z), history[-1], it,
                        converged, mu, z, history)
