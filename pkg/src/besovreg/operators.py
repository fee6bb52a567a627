"""Forward models acting on wavelet coefficient fields.

A model maps coefficients ``z`` (continuum normalization, see
:func:`besovreg.wavelet.function_samples`) to point samples of the data on
the same uniform grid. The data space carries the discrete L2(0,1) inner
product ``<g1, g2> = mean(g1 * g2)``; the coefficient space carries the
Euclidean inner product. All adjoints are taken with respect to this pair.

Solvers use the underscore array methods to avoid wrapping overhead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .besov import block_norms, level_weights
from .errors import ConfigurationError, NumericalDomainError, ParameterError
from .wavelet import (
    CoeffField,
    GridFunction,
    WaveletSystem,
    analyze_array,
    level_slice,
    synthesize_array,
)

__all__ = [
    "ForwardModel",
    "ConvolutionModel",
    "HammersteinModel",
    "conv_model",
    "hammerstein_model",
    "SmoothingConstants",
    "estimate_smoothing_constants",
    "exact_smoothing_constants",
    "operator_norm",
    "level_operator_norms",
    "smoothing_operator_norm",
    "estimate_lifting_constants",
    "data_norm",
    "data_inner",
]


def data_inner(g1, g2) -> float:
    return float(np.mean(np.asarray(g1, dtype=float) * np.asarray(g2, dtype=float)))


def data_norm(g) -> float:
    g = np.asarray(g, dtype=float)
    return float(np.sqrt(np.mean(g * g)))


class ForwardModel:
    """Base class for F with derivative and adjoint-of-derivative actions."""

    linear = False

    def __init__(self, system: WaveletSystem, smoothing_order: float):
        if not smoothing_order > 0:
            raise ParameterError(f"smoothing order a must be positive, got {smoothing_order}")
        self.system = system
        self.smoothing_order = float(smoothing_order)

    @property
    def a(self) -> float:
        return self.smoothing_order

    # array level -----------------------------------------------------------
    def _samples(self, x):
        return synthesize_array(x, self.system) * math.sqrt(self.system.signal_length)

    def _coeffs(self, u):
        return analyze_array(u, self.system) / math.sqrt(self.system.signal_length)

    def _apply(self, x):
        raise NotImplementedError

    def _dapply(self, x, h):
        raise NotImplementedError

    def _dadjoint(self, x, r):
        raise NotImplementedError

    # public ----------------------------------------------------------------
    def _check(self, z):
        if not isinstance(z, CoeffField) or z.system != self.system:
            raise ConfigurationError("coefficient field does not belong to the model's wavelet system")
        return z.data

    def apply(self, z: CoeffField) -> GridFunction:
        return GridFunction(self._apply(self._check(z)))

    def derivative_apply(self, z: CoeffField, h: CoeffField) -> GridFunction:
        return GridFunction(self._dapply(self._check(z), self._check(h)))

    def derivative_adjoint_apply(self, z: CoeffField, r) -> CoeffField:
        r = r.samples if isinstance(r, GridFunction) else np.asarray(r, dtype=float)
        if r.shape != (self.system.signal_length,):
            raise ConfigurationError("data vector length does not match the model grid")
        return CoeffField(self._dadjoint(self._check(z), r), self.system)


class ConvolutionModel(ForwardModel):
    """Periodic convolution with Fourier multiplier ``(1 + k^2)^(-a/2)``."""

    linear = True

    def __init__(self, a: float, system: WaveletSystem):
        super().__init__(system, a)
        n = system.signal_length
        k = np.fft.fftfreq(n, d=1.0 / n)
        self.multiplier = (1.0 + k * k) ** (-0.5 * self.a)

    def _convolve(self, u, power=1):
        mult = self.multiplier if power == 1 else self.multiplier**power
        return np.fft.ifft(np.fft.fft(u, axis=-1) * mult, axis=-1).real

    def _apply(self, x):
        return self._convolve(self._samples(x))

    def _dapply(self, x, h):
        return self._apply(h)

    def _dadjoint(self, x, r):
        # <Fz, r>_Y = mean(r * C sqrt(n) W^T z) = z . W C r / sqrt(n)
        return analyze_array(self._convolve(r), self.system) / math.sqrt(self.system.signal_length)

    def normal_apply(self, x):
        """F* F x without the intermediate data vector."""
        return analyze_array(self._convolve(synthesize_array(x, self.system), 2), self.system)


def _default_phi(x):
    return x + 0.5 * np.sin(x)


def _default_dphi(x):
    return 1.0 + 0.5 * np.cos(x)


def _default_d2phi(x):
    return -0.5 * np.sin(x)


class HammersteinModel(ForwardModel):
    """``F(f)(t) = int_0^t phi(f(s)) ds`` discretized by the cumulative trapezoid rule.

    The adjoint of the derivative is the exact discrete adjoint of that
    quadrature, so adjoint tests hold to rounding error.
    """

    def __init__(self, system: WaveletSystem, phi=None, dphi=None, d2phi=None, dphi_bounds=None):
        super().__init__(system, 1.0)
        if phi is None:
            phi, dphi, d2phi = _default_phi, _default_dphi, _default_d2phi
            dphi_bounds = (0.5, 1.5)
        if dphi is None:
            raise ConfigurationError("a custom phi requires its derivative dphi")
        self.phi, self.dphi, self.d2phi = phi, dphi, d2phi
        self.dphi_bounds = dphi_bounds
        self.linear = bool(getattr(phi, "is_identity", False))

    def _cumtrapz(self, v):
        h = self.system.step
        out = np.zeros_like(v)
        out[..., 1:] = np.cumsum(0.5 * h * (v[..., 1:] + v[..., :-1]), axis=-1)
        return out

    def _cumtrapz_adjoint(self, r):
        # (T^T r)_0 = h/2 sum_{i>=1} r_i ; (T^T r)_k = h (r_k / 2 + sum_{i>k} r_i)
        h = self.system.step
        tail = np.cumsum(r[..., ::-1], axis=-1)[..., ::-1]  # sum_{i>=k} r_i
        out = h * (tail - 0.5 * r)
        out[..., 0] = 0.5 * h * tail[..., 1]
        return out

    def _eval(self, fn, u):
        with np.errstate(all="ignore"):
            v = fn(u)
        if not np.all(np.isfinite(v)):
            raise NumericalDomainError("phi produced non-finite values")
        return v

    def _apply(self, x):
        return self._cumtrapz(self._eval(self.phi, self._samples(x)))

    def _dapply(self, x, h):
        return self._cumtrapz(self._eval(self.dphi, self._samples(x)) * self._samples(h))

    def _dadjoint(self, x, r):
        n = self.system.signal_length
        weighted = self._eval(self.dphi, self._samples(x)) * self._cumtrapz_adjoint(r)
        # (1/n) S^T with S = sqrt(n) W^T
        return analyze_array(weighted, self.system) / math.sqrt(n)


def _identity(x):
    return np.array(x, dtype=float, copy=True)


_identity.is_identity = True


def conv_model(a: float, system: WaveletSystem) -> ConvolutionModel:
    return ConvolutionModel(a, system)


def hammerstein_model(phi=None, system: WaveletSystem | None = None, dphi=None, d2phi=None,
                      dphi_bounds=None) -> HammersteinModel:
    """Hammerstein operator; ``phi="identity"`` gives the linear integration operator."""
    if system is None:
        raise ConfigurationError("hammerstein_model needs a wavelet system")
    if isinstance(phi, str):
        if phi != "identity":
            raise ConfigurationError(f"unknown phi {phi!r}")
        return HammersteinModel(system, _identity, np.ones_like, np.zeros_like, (1.0, 1.0))
    return HammersteinModel(system, phi, dphi, d2phi, dphi_bounds)


# ---------------------------------------------------------------------------
# operator norms and smoothing constants


def operator_norm(model: ForwardModel, point=None, iterations: int = 50, seed=0) -> float:
    """Power-method estimate of ||F'[point]|| (coefficients -> data L2)."""
    n = model.system.signal_length
    x = np.zeros(n) if point is None else np.asarray(point, dtype=float)
    v = np.random.default_rng(seed).standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iterations):
        w = model._dadjoint(x, model._dapply(x, v))
        lam = float(np.linalg.norm(w))
        if lam == 0:
            return 0.0
        v = w / lam
    return math.sqrt(lam)


def level_operator_norms(model: ForwardModel, point=None, iterations: int = 200, tol: float = 1e-12,
                         seed=0, dense: bool | None = None) -> np.ndarray:
    """Largest singular value of F'[point] restricted to each level block.

    With ``dense`` (default for grids up to 2048 points) each block is
    assembled as a matrix and its spectral norm computed exactly; otherwise
    the power method is used, which approaches the norm from below.
    """
    sys = model.system
    n = sys.signal_length
    x = np.zeros(n) if point is None else np.asarray(point, dtype=float)
    out = np.zeros(sys.levels + 1)
    if dense is None:
        dense = n <= 2048
    if dense:
        for j in range(sys.levels + 1):
            sl = level_slice(j)
            E = np.zeros((sl.stop - sl.start, n))
            E[:, sl] = np.eye(sl.stop - sl.start)
            cols = model._dapply(x, E) / math.sqrt(n)
            out[j] = np.linalg.norm(cols, 2)
        return out
    rng = np.random.default_rng(seed)
    for j in range(sys.levels + 1):
        sl = level_slice(j)
        v = np.zeros(n)
        v[sl] = rng.standard_normal(sl.stop - sl.start)
        v /= np.linalg.norm(v)
        lam_old = 0.0
        for _ in range(iterations):
            w = model._dadjoint(x, model._dapply(x, v))
            w_blk = np.zeros(n)
            w_blk[sl] = w[sl]
            lam = float(np.linalg.norm(w_blk))
            if lam == 0:
                break
            v = w_blk / lam
            if abs(lam - lam_old) <= tol * lam:
                break
            lam_old = lam
        # Rayleigh quotient is a lower bound; the block norm of w is an upper one
        out[j] = math.sqrt(lam)
    return out


def smoothing_operator_norm(model: ForwardModel, point=None, **kw) -> float:
    """Operator norm of F'[point] from b^{-a}_{2,1} into the data space.

    The b^{-a}_{2,1} norm is an l^1 sum over levels, so the norm is the
    largest level-wise ratio ``2^{ja} ||F'|_{level j}||``.
    """
    sig = level_operator_norms(model, point, **kw)
    return float(np.max(sig * level_weights(model.system.levels, model.a, 2.0)))


@dataclass
class SmoothingConstants:
    """Empirical two-sided smoothing constants for the b^{-a}_{2,2} norm."""

    L1_hat: float
    L2_hat: float
    samples: int
    notes: list = field(default_factory=list)
    L1_exact: float | None = None
    L2_exact: float | None = None

    def as_dict(self):
        return {
            "L1_hat": self.L1_hat,
            "L2_hat": self.L2_hat,
            "samples": self.samples,
            "L1_exact": self.L1_exact,
            "L2_exact": self.L2_exact,
            "notes": list(self.notes),
        }


def _neg_a_22(data, levels, a):
    return float(np.sqrt(np.sum((level_weights(levels, -a, 2.0) * block_norms(data, levels, 2.0)) ** 2)))


def _random_direction(rng, system, a):
    n = system.signal_length
    J = system.levels
    if rng.random() < 0.5:
        j = int(rng.integers(0, J + 1))
        h = np.zeros(n)
        sl = level_slice(j)
        h[sl] = rng.standard_normal(sl.stop - sl.start)
    else:
        h = rng.standard_normal(n)
    # equalize the b^{-a}_{2,2} weight across levels
    lev = system.level_of_index()
    return h * 2.0 ** (a * lev)


def exact_smoothing_constants(model: ForwardModel, max_length: int = 2048):
    """Exact (L1', L2') for a linear model via a dense SVD, or None if too large."""
    sys = model.system
    n = sys.signal_length
    if not model.linear or n > max_length:
        return None
    lev = sys.level_of_index()
    D = np.diag(2.0 ** (model.a * lev))
    cols = np.stack([model._apply(D[i]) for i in range(n)], axis=1) / math.sqrt(n)
    sv = np.linalg.svd(cols, compute_uv=False)
    return 1.0 / sv[-1], sv[0]


def estimate_smoothing_constants(model: ForwardModel, trials: int = 200, seed=0,
                                 scale: float = 1.0, exact: bool = True) -> SmoothingConstants:
    """Sample ratios between ||f1 - f2||_{-a,2,2} and ||F f1 - F f2||.

    Linear models use random differences ``h`` directly; nonlinear models use
    random pairs ``f1 = f0 + scale * h1``, ``f2 = f0 + scale * h2``.
    """
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    sys = model.system
    J = sys.levels
    a = model.a
    L1 = 0.0
    L2 = 0.0
    used = 0
    notes = []
    zero = np.zeros(sys.signal_length)
    for _ in range(trials):
        if model.linear:
            h = _random_direction(rng, sys, a)
            h /= _neg_a_22(h, J, a)
            dF = model._apply(h) - model._apply(zero)
        else:
            f1 = scale * _random_direction(rng, sys, a) / math.sqrt(sys.signal_length)
            f2 = scale * _random_direction(rng, sys, a) / math.sqrt(sys.signal_length)
            h = f1 - f2
            dF = model._apply(f1) - model._apply(f2)
        num = _neg_a_22(h, J, a)
        den = data_norm(dF)
        if num == 0 or den == 0:
            continue
        used += 1
        L1 = max(L1, num / den)
        L2 = max(L2, den / num)
    if used == 0:
        raise NumericalDomainError("all sampled pairs were degenerate")
    if used < trials:
        notes.append(f"{trials - used} degenerate pairs skipped")
    out = SmoothingConstants(L1, L2, used, notes)
    if exact and model.linear:
        ex = exact_smoothing_constants(model)
        if ex is not None:
            out.L1_exact, out.L2_exact = ex
            notes.append("exact values from dense SVD of F diag(2^{ja})")
    return out


def estimate_lifting_constants(model: ForwardModel, s: float, p: float, trials: int = 200,
                               seed=0, data_system: WaveletSystem | None = None) -> dict:
    """Measured constants for the data-side mapping and lifting inequalities.

    ``L3_hat`` bounds ``||F h||_{B^a_{p,1}} / ||h||_{0,p,1}``; ``L4_hat`` bounds
    ``||h||_{s,p,inf} / ||F h||_{B^{s+a}_{p,inf}}``, both over random linear
    differences, with data norms computed from the data-side periodic wavelet
    transform. Measured only; no certificate is implied.
    """
    from .besov import BesovIndex, besov_norm
    from .wavelet import function_coefficients

    dsys = data_system or model.system
    rng = np.random.default_rng(seed)
    sys = model.system
    a = model.a
    L3 = L4 = 0.0
    zero = np.zeros(sys.signal_length)
    for _ in range(trials):
        h = _random_direction(rng, sys, a) * 2.0 ** (-(a + s) * sys.level_of_index())
        hf = CoeffField(h, sys)
        g = model._apply(h) - model._apply(zero)
        gc = function_coefficients(g, dsys)
        up = besov_norm(gc, BesovIndex(a, p, 1))
        L3 = max(L3, up / besov_norm(hf, BesovIndex(0.0, p, 1)))
        low = besov_norm(gc, BesovIndex(s + a, p, float("inf")))
        if low > 0:
            L4 = max(L4, besov_norm(hf, BesovIndex(s, p, float("inf"))) / low)
    return {"L3_hat": L3, "L4_hat": L4, "trials": trials}
