"""Besov sequence norms on wavelet coefficient fields.

All norms follow the dyadic weighting ``2**(j*s) * 2**(j*(1/2 - 1/p))`` of
the level-``j`` block (d = 1), an l^p norm inside each level and an l^q
norm across levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .wavelet import CoeffField, WaveletSystem, level_slice

__all__ = [
    "BesovIndex",
    "BallSpec",
    "block_norms",
    "level_weights",
    "weighted_level_norms",
    "besov_norm",
    "seminorm_pn",
    "seminorm_pn_perp",
    "jackson_bound",
    "make_extremal",
    "lower_bound_probe",
]

INF = float("inf")


def _inv(p: float) -> float:
    return 0.0 if p == INF else 1.0 / p


@dataclass(frozen=True)
class BesovIndex:
    """Smoothness ``s``, integrability ``p`` and fine index ``q``."""

    s: float
    p: float
    q: float

    def __post_init__(self):
        if not math.isfinite(self.s):
            raise ParameterError("smoothness s must be finite")
        if not self.p >= 1 or not self.q >= 1:
            raise ParameterError(f"need p, q >= 1, got p={self.p}, q={self.q}")


@dataclass(frozen=True)
class BallSpec:
    """Ball of radius ``radius`` in b^s_{p,inf} around ``center``."""

    index: BesovIndex
    radius: float
    center: CoeffField | None = None

    def __post_init__(self):
        if self.index.q != INF:
            raise ParameterError("Besov balls are taken with q = inf")
        if not self.radius >= 0:
            raise ParameterError("radius must be nonnegative")


def _offsets(levels: int) -> np.ndarray:
    return np.array([0] + [2 ** (j - 1) for j in range(1, levels + 1)])


def block_norms(data: np.ndarray, levels: int, p: float) -> np.ndarray:
    """l^p norm of every level block of a flat coefficient vector."""
    offs = _offsets(levels)
    a = np.abs(data)
    if p == INF:
        return np.maximum.reduceat(a, offs)
    if p == 1:
        return np.add.reduceat(a, offs)
    if p == 2:
        return np.sqrt(np.add.reduceat(a * a, offs))
    amax = np.maximum.reduceat(a, offs)
    safe = np.where(amax > 0, amax, 1.0)
    scaled = a / np.repeat(safe, np.diff(np.append(offs, data.size)))
    return amax * np.add.reduceat(scaled**p, offs) ** (1.0 / p)


def level_weights(levels: int, s: float, p: float) -> np.ndarray:
    j = np.arange(levels + 1)
    return 2.0 ** (j * (s + 0.5 - _inv(p)))


def weighted_level_norms(z: CoeffField, s: float, p: float) -> np.ndarray:
    """The sequence ``2^{js} 2^{j(1/2-1/p)} ||z_j||_p`` for j = 0..J."""
    J = z.system.levels
    return level_weights(J, s, p) * block_norms(z.data, J, p)


def besov_norm(z: CoeffField, idx: BesovIndex) -> float:
    w = weighted_level_norms(z, idx.s, idx.p)
    if idx.q == INF:
        return float(w.max())
    if idx.q == 1:
        return math.fsum(w)
    top = w.max()
    if top == 0:
        return 0.0
    return float(top * math.fsum((w / top) ** idx.q) ** (1.0 / idx.q))


def _check_level(z: CoeffField, n: int):
    if not 0 <= n <= z.system.levels:
        raise IndexError(f"level {n} out of range 0..{z.system.levels}")


def seminorm_pn(z: CoeffField, n: int, p: float) -> float:
    """Partial sum of the ||.||_{0,p,1} series over levels 0..n."""
    _check_level(z, n)
    return math.fsum(weighted_level_norms(z, 0.0, p)[: n + 1])


def seminorm_pn_perp(z: CoeffField, n: int, p: float) -> float:
    """Tail of the ||.||_{0,p,1} series over levels n+1..J."""
    _check_level(z, n)
    return math.fsum(weighted_level_norms(z, 0.0, p)[n + 1 :])


def jackson_bound(n: int, s: float, rho: float) -> float:
    """Upper bound on the level-n tail for a field in the b^s_{p,inf} ball of radius rho."""
    if s <= 0:
        raise ParameterError("Jackson bound needs s > 0")
    return 2.0 ** (-(n + 1) * s) * rho / (1.0 - 2.0**-s)


def make_extremal(ball: BallSpec, system: WaveletSystem, seed=None, decay: float = 0.0) -> CoeffField:
    """Random-sign field on the boundary of a b^s_{p,inf} ball.

    Every level block has equal-magnitude entries scaled so that its
    weighted norm equals ``radius * 2**(-decay*j)``; ``decay = 0`` puts all
    levels on the ball boundary.
    """
    rng = np.random.default_rng(seed)
    s, p = ball.index.s, ball.index.p
    J = system.levels
    sizes = np.array(system.level_sizes, dtype=float)
    j = np.arange(J + 1)
    target = ball.radius * 2.0 ** (-decay * j)
    mags = target * 2.0 ** (-j * (s + 0.5 - _inv(p))) * sizes ** (-_inv(p))
    signs = rng.choice([-1.0, 1.0], size=system.signal_length)
    data = signs * np.repeat(mags, sizes.astype(int))
    if ball.center is not None:
        data = data + ball.center.data
    return CoeffField(data, system)


def lower_bound_probe(j: int, s: float, p: float, rho: float, delta: float, L2: float,
                      system: WaveletSystem, a: float) -> CoeffField:
    """Constant-entry probe supported on level ``j``.

    Its entries equal ``C^{-1} 2^{-j/2} min(2^{-js} rho, 2^{ja} delta / L2)``
    with the frame constant ``C`` of the system, which keeps the probe inside
    the b^s_{p,q} ball of radius ``rho`` and its image under an operator with
    smoothing constant ``L2`` inside the ``delta`` ball.
    """
    if not 0 <= j <= system.levels:
        raise IndexError(f"level {j} out of range 0..{system.levels}")
    if rho < 0 or delta < 0 or L2 <= 0:
        raise ParameterError("need rho >= 0, delta >= 0 and L2 > 0")
    beta = 2.0 ** (-0.5 * j) * min(2.0 ** (-j * s) * rho, 2.0 ** (j * a) * delta / L2) / system.frame_constant
    data = np.zeros(system.signal_length)
    data[level_slice(j)] = beta
    return CoeffField(data, system)
