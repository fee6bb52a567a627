"""Proximal maps of block l^p norms and of the level-weighted penalty."""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq

from .besov import _offsets, block_norms, level_weights
from .errors import ParameterError
from .wavelet import CoeffField

__all__ = ["prox_block_lp", "prox_penalty", "project_lq_ball", "penalty_value", "dual_exponent"]


def dual_exponent(p: float) -> float:
    if p == 1:
        return math.inf
    if p == math.inf:
        return 1.0
    return p / (p - 1.0)


def _check_p(p):
    if not 1.0 <= p <= 2.0:
        raise ParameterError(f"penalty exponent p must lie in [1, 2], got {p}")


def _solve_components(b, mu, k):
    """Solve ``u + mu * u**k = b`` for u >= 0 componentwise (b >= 0, k >= 1).

    Newton's method from an upper bound converges monotonically because the
    left-hand side is convex and increasing.
    """
    with np.errstate(over="ignore", divide="ignore"):
        u = np.minimum(b, (b / mu) ** (1.0 / k)) if mu > 0 else b.copy()
    for _ in range(100):
        uk1 = u ** (k - 1.0)
        g = u + mu * uk1 * u - b
        step = g / (1.0 + k * mu * uk1)
        u_new = np.maximum(u - step, 0.0)
        if np.all(np.abs(u_new - u) <= 1e-15 * np.maximum(u_new, 1e-300)):
            return u_new
        u = u_new
    return u


def _lq_norm(v, q):
    top = v.max(initial=0.0)
    if top == 0:
        return 0.0
    return top * float(np.sum((v / top) ** q)) ** (1.0 / q)


def project_lq_ball(x: np.ndarray, radius: float, q: float) -> np.ndarray:
    """Euclidean projection of ``x`` onto the l^q ball of the given radius (2 <= q < inf)."""
    x = np.asarray(x, dtype=float)
    b = np.abs(x)
    if radius <= 0:
        return np.zeros_like(x)
    if _lq_norm(b, q) <= radius:
        return x.copy()
    scale = b.max()
    b = b / scale
    r = radius / scale
    if r <= 1e-13:
        # the projection is within r of zero; radial scaling is exact to that size
        return x * (radius / _lq_norm(np.abs(x), q))
    k = q - 1.0

    # the multiplier mu solves ||u(mu)||_q = r; u decreases in mu
    def gap(t):
        return _lq_norm(_solve_components(b, math.exp(t), k), q) - r

    lo, hi = -40.0, 0.0
    while gap(hi) > 0:
        lo, hi = hi, hi + 20.0
    while gap(lo) < 0:
        lo -= 40.0
    t = brentq(gap, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=500)
    u = _solve_components(b, math.exp(t), k)
    return np.sign(x) * u * scale


def prox_block_lp(x, tau: float, p: float) -> np.ndarray:
    """Proximal map of ``tau * ||.||_p`` on one block.

    Returns ``argmin_y 0.5 ||y - x||_2^2 + tau ||y||_p`` for p in [1, 2].
    """
    if tau < 0 or not math.isfinite(tau):
        raise ParameterError(f"threshold must be a finite nonnegative number, got {tau}")
    _check_p(p)
    x = np.asarray(x, dtype=float)
    if tau == 0:
        return x.copy()
    if p == 1:
        # |x_i| == tau maps to exactly zero
        return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)
    if p == 2:
        nrm = float(np.linalg.norm(x))
        if nrm <= tau:
            return np.zeros_like(x)
        return (1.0 - tau / nrm) * x
    # Moreau: prox of a norm = identity minus projection onto the dual ball
    y = x - project_lq_ball(x, tau, dual_exponent(p))
    return y


def penalty_value(data: np.ndarray, levels: int, p: float) -> float:
    """The penalty ``||z||_{0,p,1}`` of a flat coefficient vector."""
    return math.fsum(level_weights(levels, 0.0, p) * block_norms(data, levels, p))


def _prox_levels(x, thresholds, p, levels):
    """Blockwise prox with one threshold per level (array level, no checks)."""
    offs = _offsets(levels)
    sizes = np.diff(np.append(offs, x.size))
    if p == 1:
        t = np.repeat(thresholds, sizes)
        return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)
    if p == 2:
        nrm = block_norms(x, levels, 2.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            f = np.where(nrm > thresholds, 1.0 - thresholds / nrm, 0.0)
        return x * np.repeat(f, sizes)
    out = np.empty_like(x)
    for j, (o, m) in enumerate(zip(offs, sizes)):
        out[o : o + m] = prox_block_lp(x[o : o + m], float(thresholds[j]), p)
    return out


def prox_penalty(z: CoeffField, tau: float, p: float) -> CoeffField:
    """Proximal map of ``tau * ||.||_{0,p,1}``; level j uses threshold ``tau * 2^{j(1/2 - 1/p)}``."""
    if tau < 0 or not math.isfinite(tau):
        raise ParameterError(f"threshold must be a finite nonnegative number, got {tau}")
    _check_p(p)
    if tau == 0:
        return z.copy()
    J = z.system.levels
    return CoeffField(_prox_levels(z.data, tau * level_weights(J, 0.0, p), p, J), z.system)
