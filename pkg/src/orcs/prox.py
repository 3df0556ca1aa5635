"""Closed-form proximal operators of gamma * ||z||_q for q in {1, 2}."""
import numpy as np


def prox_l2(v, gamma):
    """Block soft-threshold: ``v * max(0, 1 - gamma / ||v||)``.

    Operates on the last axis, so ``v`` may be a single vector or an ``(n, d)``
    stack of samples.  Vectors with ``||v|| <= gamma`` (including ``v = 0``)
    map to zero.
    """
    v = np.asarray(v, dtype=float)
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    if gamma == 0:
        return v.copy()
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        shrink = np.where(norm > gamma, 1.0 - gamma / norm, 0.0)
    return v * shrink


def prox_l1(v, gamma):
    """Coordinate-wise soft threshold ``sign(v) * max(0, |v| - gamma)``."""
    v = np.asarray(v, dtype=float)
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    return np.sign(v) * np.maximum(0.0, np.abs(v) - gamma)


def prox(v, gamma, q=2):
    if not np.isfinite(gamma):
        return np.zeros_like(np.asarray(v, dtype=float))
    if q == 2:
        return prox_l2(v, gamma)
    if q == 1:
        return prox_l1(v, gamma)
    raise ValueError("q must be 1 or 2")
