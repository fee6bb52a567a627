"""Periodic orthonormal wavelet transform on the unit torus (d = 1).

The transform is a Mallat cascade of two-channel filter banks applied
circularly. Every stage is carried out in the DFT domain with the filters
periodized to the current stage length, so the same code serves the
compactly supported Daubechies filters and the band-limited Meyer filter.

Coefficients are stored flat in "standard" order: index 0 holds the single
scaling coefficient (level 0) and level ``j >= 1`` occupies the slice
``[2**(j-1), 2**j)``.

Two normalizations are exposed:

* :func:`analyze` / :func:`synthesize` are Euclidean isometries between
  sample vectors and coefficient vectors.
* :func:`function_coefficients` / :func:`function_samples` treat a grid
  function as point samples of a function in L2(R/Z), so that the
  coefficients approximate the inner products with the periodized
  continuum wavelets and the j=0 basis function is the constant 1.
"""

from __future__ import annotations

import functools
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "WaveletSystem",
    "CoeffField",
    "GridFunction",
    "analyze",
    "synthesize",
    "level_block",
    "function_coefficients",
    "function_samples",
    "level_slice",
]

_DB_RE = re.compile(r"^db(\d+)$")


def _meyer_nu(x):
    x = np.clip(x, 0.0, 1.0)
    return x**4 * (35.0 - 84.0 * x + 70.0 * x**2 - 20.0 * x**3)


def _daubechies_taps(order):
    import pywt

    # rec_lo is the scaling filter h[k] in the convolution convention
    return np.asarray(pywt.Wavelet(f"db{order}").rec_lo, dtype=float)


@functools.lru_cache(maxsize=None)
def _stage_filters(family, m):
    """DFTs of the periodized low/high-pass filters at stage length ``m``."""
    if family == "meyer":
        omega = 2.0 * np.pi * np.fft.fftfreq(m)  # in [-pi, pi)
        w = np.abs(omega)
        H = np.where(
            w <= np.pi / 3,
            1.0,
            np.where(
                w >= 2 * np.pi / 3,
                0.0,
                np.cos(0.5 * np.pi * _meyer_nu(3.0 * w / np.pi - 1.0)),
            ),
        )
        hm = np.fft.ifft(np.sqrt(2.0) * H).real
    else:
        taps = _daubechies_taps(int(family[2:]))
        hm = np.zeros(m)
        np.add.at(hm, np.arange(taps.size) % m, taps)
    k = np.arange(m)
    gm = (-1.0) ** k * hm[(1 - k) % m]
    Hf, Gf = np.fft.fft(hm), np.fft.fft(gm)
    Hf.setflags(write=False)
    Gf.setflags(write=False)
    return Hf, Gf


@functools.lru_cache(maxsize=None)
def _stage_taps(family, m):
    """Periodized time-domain filters (h, g) at stage length ``m``."""
    Hf, Gf = _stage_filters(family, m)
    return np.fft.ifft(Hf).real, np.fft.ifft(Gf).real


@dataclass(frozen=True)
class WaveletSystem:
    """Orthonormal periodic wavelet basis with ``levels`` detail levels.

    Parameters
    ----------
    family : str
        ``"dbN"`` (Daubechies with N vanishing moments, N >= 2) or ``"meyer"``.
    levels : int
        Finest level J >= 2; the signal length is ``2**J``.
    """

    family: str
    levels: int
    frame_constant: float = field(default=1.0, init=False)
    lower_frame_factor: float = field(default=0.5, init=False)

    def __post_init__(self):
        fam = self.family.lower()
        object.__setattr__(self, "family", fam)
        if fam != "meyer":
            match = _DB_RE.match(fam)
            if not match or int(match.group(1)) < 2:
                raise ConfigurationError(
                    f"unknown wavelet family {self.family!r}; use 'dbN' (N>=2) or 'meyer'"
                )
            if int(match.group(1)) > 38:
                raise ConfigurationError("Daubechies order must be <= 38")
        if int(self.levels) != self.levels or self.levels < 2:
            raise ConfigurationError(f"levels must be an integer >= 2, got {self.levels}")
        if self.levels > 24:
            raise ConfigurationError("levels > 24 is not supported")

    @property
    def signal_length(self) -> int:
        return 2**self.levels

    @property
    def step(self) -> float:
        return 1.0 / self.signal_length

    @property
    def level_sizes(self) -> list[int]:
        return [1] + [2 ** (j - 1) for j in range(1, self.levels + 1)]

    @property
    def order(self) -> int | None:
        """Number of vanishing moments (None for Meyer)."""
        return None if self.family == "meyer" else int(self.family[2:])

    @property
    def regularity(self) -> float:
        """Hoelder regularity of the continuum wavelets (inf for Meyer)."""
        if self.family == "meyer":
            return float("inf")
        return 0.193 * (self.order - 1)

    def level_of_index(self) -> np.ndarray:
        """Level number of every flat coefficient index."""
        idx = np.arange(self.signal_length)
        lev = np.zeros(self.signal_length, dtype=int)
        lev[1:] = np.floor(np.log2(idx[1:])).astype(int) + 1
        return lev

    def zeros(self) -> "CoeffField":
        return CoeffField(np.zeros(self.signal_length), self)

    def grid(self) -> np.ndarray:
        return np.arange(self.signal_length) * self.step


def level_slice(j: int) -> slice:
    return slice(0, 1) if j == 0 else slice(2 ** (j - 1), 2**j)


class CoeffField:
    """Wavelet coefficients of one function, organised by level.

    The flat vector ``data`` is owned by the field; :meth:`block` returns
    views into it.
    """

    __slots__ = ("data", "system")

    def __init__(self, data, system: WaveletSystem):
        data = np.array(data, dtype=float)
        if data.shape != (system.signal_length,):
            raise ConfigurationError(
                f"coefficient vector has shape {data.shape}, expected ({system.signal_length},)"
            )
        if not np.all(np.isfinite(data)):
            raise ConfigurationError("coefficient field contains non-finite entries")
        self.data = data
        self.system = system

    @classmethod
    def from_blocks(cls, blocks, system: WaveletSystem) -> "CoeffField":
        sizes = system.level_sizes
        if len(blocks) != len(sizes):
            raise ConfigurationError(f"expected {len(sizes)} blocks, got {len(blocks)}")
        for j, (b, size) in enumerate(zip(blocks, sizes)):
            if np.shape(b) != (size,):
                raise ConfigurationError(f"block {j} has shape {np.shape(b)}, expected ({size},)")
        return cls(np.concatenate([np.asarray(b, dtype=float) for b in blocks]), system)

    @property
    def levels(self) -> int:
        return self.system.levels

    def block(self, j: int) -> np.ndarray:
        if not 0 <= j <= self.system.levels:
            raise IndexError(f"level {j} out of range 0..{self.system.levels}")
        return self.data[level_slice(j)]

    def blocks(self) -> list[np.ndarray]:
        return [self.block(j) for j in range(self.system.levels + 1)]

    def copy(self) -> "CoeffField":
        return CoeffField(self.data.copy(), self.system)

    def _check(self, other):
        if not isinstance(other, CoeffField) or other.system != self.system:
            raise ConfigurationError("coefficient fields belong to different wavelet systems")

    def __add__(self, other):
        self._check(other)
        return CoeffField(self.data + other.data, self.system)

    def __sub__(self, other):
        self._check(other)
        return CoeffField(self.data - other.data, self.system)

    def __mul__(self, scalar):
        return CoeffField(self.data * float(scalar), self.system)

    __rmul__ = __mul__

    def __neg__(self):
        return CoeffField(-self.data, self.system)

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def __repr__(self):
        return f"CoeffField({self.system.family}, J={self.system.levels}, |z|={np.linalg.norm(self.data):.3g})"


class GridFunction:
    """Samples of a periodic function on the uniform grid ``k / n`` of [0, 1)."""

    __slots__ = ("samples",)

    def __init__(self, samples):
        samples = np.array(samples, dtype=float)
        n = samples.size
        if samples.ndim != 1 or n < 2 or n & (n - 1):
            raise ConfigurationError(f"grid function length must be a power of two, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ConfigurationError("grid function contains non-finite samples")
        self.samples = samples

    def __len__(self):
        return self.samples.size

    @property
    def step(self) -> float:
        return 1.0 / self.samples.size

    def l2_norm(self) -> float:
        """Riemann-sum approximation of the L2(0,1) norm."""
        return float(np.sqrt(np.mean(self.samples**2)))

    def inner(self, other: "GridFunction") -> float:
        return float(np.mean(self.samples * other.samples))

    def __add__(self, other):
        return GridFunction(self.samples + _samples(other))

    def __sub__(self, other):
        return GridFunction(self.samples - _samples(other))

    def __mul__(self, scalar):
        return GridFunction(self.samples * float(scalar))

    __rmul__ = __mul__

    def __array__(self, dtype=None, copy=None):
        return self.samples if dtype is None else self.samples.astype(dtype)

    def __repr__(self):
        return f"GridFunction(n={self.samples.size})"


def _samples(g) -> np.ndarray:
    return g.samples if isinstance(g, GridFunction) else np.asarray(g, dtype=float)


def analyze_array(x: np.ndarray, system: WaveletSystem) -> np.ndarray:
    """Euclidean-orthonormal analysis along the last axis (batched)."""
    x = np.asarray(x, dtype=float)
    n = system.signal_length
    if x.shape[-1] != n:
        raise ConfigurationError(f"signal length {x.shape[-1]} does not match wavelet system length {n}")
    out = np.empty_like(x)
    a = x
    m = n
    while m >= 2:
        Hf, Gf = _stage_filters(system.family, m)
        X = np.fft.fft(a, axis=-1)
        lo = np.conj(Hf) * X
        hi = np.conj(Gf) * X
        half = m // 2
        out[..., half:m] = np.fft.ifft(0.5 * (hi[..., :half] + hi[..., half:]), axis=-1).real
        a = np.fft.ifft(0.5 * (lo[..., :half] + lo[..., half:]), axis=-1).real
        m = half
    out[..., 0] = a[..., 0]
    return out


def synthesize_array(z: np.ndarray, system: WaveletSystem) -> np.ndarray:
    """Inverse (= adjoint) of :func:`analyze_array` along the last axis."""
    z = np.asarray(z, dtype=float)
    n = system.signal_length
    if z.shape[-1] != n:
        raise ConfigurationError(f"coefficient length {z.shape[-1]} does not match wavelet system length {n}")
    a = z[..., :1]
    m = 2
    while m <= n:
        Hf, Gf = _stage_filters(system.family, m)
        A = np.fft.fft(a, axis=-1)
        D = np.fft.fft(z[..., m // 2 : m], axis=-1)
        X = np.concatenate([A, A], axis=-1) * Hf + np.concatenate([D, D], axis=-1) * Gf
        a = np.fft.ifft(X, axis=-1).real
        m *= 2
    return a


def analyze(g, system: WaveletSystem) -> CoeffField:
    """Wavelet coefficients of a sample vector (Euclidean isometry)."""
    x = _samples(g)
    if x.ndim != 1:
        raise ConfigurationError("analyze expects a one-dimensional signal")
    return CoeffField(analyze_array(x, system), system)


def synthesize(z: CoeffField) -> GridFunction:
    """Sample vector with the given coefficients; inverse of :func:`analyze`."""
    return GridFunction(synthesize_array(z.data, z.system))


def level_block(z: CoeffField, j: int) -> np.ndarray:
    return z.block(j)


def function_coefficients(g, system: WaveletSystem) -> CoeffField:
    """Coefficients of the function whose point samples are ``g``.

    Scaled by ``sqrt(h)`` so that the coefficient norm equals the discrete
    L2(0,1) norm of the samples.
    """
    return CoeffField(analyze_array(_samples(g), system) / np.sqrt(system.signal_length), system)


def function_samples(z: CoeffField) -> GridFunction:
    """Point samples of the function with coefficients ``z``."""
    return GridFunction(synthesize_array(z.data, z.system) * np.sqrt(z.system.signal_length))
