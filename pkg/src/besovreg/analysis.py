"""Certificates and diagnostics for wavelet-penalized Tikhonov regularization.

Index functions of variational source conditions, the Fenchel-dual rate
function, block-sparsity levels, converse-rate quantities, probe-based
lower bounds, Euclidean adjoint-range certificates, noise norms and white
noise sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .besov import BesovIndex, besov_norm, lower_bound_probe
from .errors import ParameterError, SingularInstanceError
from .operators import ForwardModel, data_norm
from .solver import SolveConfig, SolveResult, solve_tikhonov
from .wavelet import CoeffField, GridFunction, WaveletSystem, function_coefficients, function_samples

__all__ = [
    "IndexFunctionSpec",
    "NoiseSpec",
    "VscTable",
    "vsc_phi",
    "vsc_constants",
    "fenchel_psi",
    "psi_constant",
    "effective_noise",
    "sparsity_level_bound",
    "SparsityReport",
    "verify_sparsity",
    "converse_gamma",
    "ModulusBound",
    "modulus_lower_bound",
    "AdjointRangeCertificate",
    "adjoint_range_check",
    "noise_besov_norm",
    "interpolation_check",
    "sample_white_noise",
]

INF = math.inf


# ---------------------------------------------------------------------------
# index functions


@dataclass(frozen=True)
class IndexFunctionSpec:
    """Constants entering the index function of the source condition.

    Parameters
    ----------
    L1 : float
        Lower smoothing constant of the forward map.
    a, s, p, rho : float
        Smoothing order, smoothness, penalty exponent and ball radius.
    t_grid : array_like, optional
        Evaluation points; defaults to 50 equispaced points in
        ``(0, (s rho / a)^2]``.
    """

    L1: float
    a: float
    s: float
    p: float
    rho: float
    t_grid: tuple | None = None

    def __post_init__(self):
        if min(self.L1, self.a, self.s, self.rho) <= 0:
            raise ParameterError("L1, a, s and rho must be positive")
        if not 1 <= self.p <= 2:
            raise ParameterError("p must lie in [1, 2]")

    @property
    def C_tilde(self) -> float:
        return 2.0 * max(1.0 / (1.0 - 2.0**-self.s), self.L1 / (2.0**self.a - 1.0))

    def grid(self, rho=None) -> np.ndarray:
        if self.t_grid is not None:
            return np.asarray(self.t_grid, dtype=float)
        r = self.rho if rho is None else rho
        tmax = (self.s * r / self.a) ** 2
        return tmax * np.arange(1, 51) / 50.0


@dataclass(frozen=True)
class NoiseSpec:
    """Noise model: ``"deterministic"`` (level ``delta``) or ``"statistical"`` (level ``eps``)."""

    mode: str
    level: float
    d_tilde: float = 1.0
    a: float = 1.0
    p_dual: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("deterministic", "statistical"):
            raise ParameterError(f"unknown noise mode {self.mode!r}")
        if self.level < 0:
            raise ParameterError("noise level must be nonnegative")
        if self.mode == "statistical" and not 0 <= self.d_tilde < 2 * self.a:
            raise ParameterError("need 0 <= d_tilde < 2a")


@dataclass
class VscTable:
    t: np.ndarray
    phi: np.ndarray
    n_opt: np.ndarray
    rho_eff: float
    C_tilde: float

    def envelope(self, spec: IndexFunctionSpec) -> np.ndarray:
        c = vsc_constants(spec)["c_envelope"]
        return c * self.rho_eff ** (spec.a / (spec.s + spec.a)) * self.t ** (spec.s / (2 * (spec.s + spec.a)))


def _phi_tilde(t, C, a, s, rho, J):
    n = np.arange(J + 1)[:, None]
    vals = 2.0 ** (a * (n + 1)) * np.sqrt(t)[None, :] + 2.0 ** (-s * (n + 1)) * rho
    k = np.argmin(vals, axis=0)
    return C * vals[k, np.arange(t.size)], k


def vsc_phi(f_true: CoeffField, spec: IndexFunctionSpec) -> VscTable:
    """Index function ``C min_n (2^{a(n+1)} sqrt(t) + 2^{-s(n+1)} rho)`` over n = 0..J.

    ``rho`` is the measured ``||f_true||_{s,p,inf}``.
    """
    rho = besov_norm(f_true, BesovIndex(spec.s, spec.p, INF))
    t = spec.grid(rho)
    phi, k = _phi_tilde(t, spec.C_tilde, spec.a, spec.s, rho, f_true.system.levels)
    return VscTable(t, phi, k, rho, spec.C_tilde)


def vsc_constants(spec: IndexFunctionSpec, L2: float | None = None) -> dict:
    """Branch constants of the power-type index function.

    ``c_envelope`` bounds the infimum formula for small arguments; with the
    upper smoothing constant ``L2`` the large-argument branch constant
    ``c_case_1b`` and the global ``c_phi = max`` of both are added.
    """
    a, s = spec.a, spec.s
    C = spec.C_tilde
    c = 2.0**a * C * ((s / a) ** (a / (a + s)) + (s / a) ** (-s / (a + s)))
    out = {"C_tilde": C, "c_envelope": c}
    if L2 is not None:
        K = 4.0 * L2 / (1.0 - 2.0**-s)
        c1b = C * (2.0**a * K + 2.0**-s) * (s / a) ** (-s / (s + a))
        out.update({"K_branch": K, "c_case_1b": c1b, "c_phi": max(c, c1b)})
    return out


def psi_constant(c_phi: float, s: float, a: float) -> float:
    """``C_psi`` of the conjugate of ``-c_phi t^kappa``, ``kappa = s/(2(s+a))``."""
    k = s / (2.0 * (s + a))
    return (1.0 - k) * k ** (k / (1.0 - k)) * c_phi ** (1.0 / (1.0 - k))


def fenchel_psi(c_phi: float, rho: float, s: float, a: float, t):
    """``psi(t) = (-phi)^*(-1/t)`` for ``phi(t) = c_phi rho^{a/(s+a)} t^{s/(2(s+a))}``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ParameterError("psi is defined for t >= 0")
    val = psi_constant(c_phi, s, a) * rho ** (2 * a / (s + 2 * a)) * t ** (s / (s + 2 * a))
    return float(val) if val.ndim == 0 else val


def effective_noise(g_hat, g_true, g_obs, c_err: float = 2.0, statistical: bool = False) -> float:
    """``S(g_true) - S(g_hat) + ||g_hat - g_true||^2 / c_err`` for the chosen fidelity ``S``."""
    gh, gt, go = (np.asarray(x, dtype=float) for x in (g_hat, g_true, g_obs))

    def S(g):
        if statistical:
            return float(np.mean(g * g)) - 2.0 * float(np.mean(g * go))
        return float(np.mean((g - go) ** 2))

    return S(gt) - S(gh) + float(np.mean((gh - gt) ** 2)) / c_err


# ---------------------------------------------------------------------------
# sparsity


def sparsity_level_bound(K: float, alpha: float, residual: float, a: float, d: int = 1,
                         p: float = 2.0, p_tilde: float = 2.0) -> int:
    """Least level ``j`` with ``(K/alpha) residual < 2^{j(a + d/p_tilde - d/p)}``."""
    if K <= 0 or alpha <= 0 or residual < 0:
        raise ParameterError("need K > 0, alpha > 0, residual >= 0")
    e = a + d / p_tilde - d / p
    if e <= 0:
        raise ParameterError(f"exponent a + d/p_tilde - d/p = {e} is not positive; the bound is vacuous")
    lhs = K * residual / alpha
    if lhs < 1.0:
        return 0
    j = max(0, int(math.floor(math.log2(lhs) / e)))
    while not lhs < 2.0 ** (j * e):
        j += 1
    while j > 0 and lhs < 2.0 ** ((j - 1) * e):
        j -= 1
    return j


@dataclass
class SparsityReport:
    passed: bool
    j_star: int
    worst_level: int | None
    worst_value: float
    scale: float
    checked_levels: list = field(default_factory=list)


def verify_sparsity(res: SolveResult, j_star: int, zero_tol: float = 1e-10, scale: float = 1.0) -> SparsityReport:
    """Check that every block ``j >= j_star`` of the minimizer is below ``zero_tol * scale``."""
    z = res.minimizer
    J = z.system.levels
    worst, worst_j = 0.0, None
    levels = list(range(j_star, J + 1))
    for j in levels:
        m = float(np.max(np.abs(z.block(j))))
        if m > worst or worst_j is None:
            worst, worst_j = m, j
    if not levels:
        worst_j = None
    return SparsityReport(worst < zero_tol * scale, j_star, worst_j, worst, scale, levels)


# ---------------------------------------------------------------------------
# converse


def converse_gamma(model: ForwardModel, f_true: CoeffField, alpha_grid, s: float, a: float, p: float,
                   K: float, tolerance_factor: float = 1e-3, solve_kw: dict | None = None):
    """Rate constant ``max alpha^{-s/(s+2a)} ||f_alpha - f_true||_{0,p,1}`` on exact data.

    Returns ``(gamma_hat, smoothness_bound, errors)`` where
    ``smoothness_bound = (sqrt(2) K)^{s/a} gamma_hat^{(2a+s)/(2a)}``.
    Solves run from large to small alpha with warm starts; an unconverged
    solve raises ``RuntimeError``.
    """
    alphas = np.sort(np.asarray(alpha_grid, dtype=float))
    if alphas.size < 2 or np.log10(alphas[-1] / alphas[0]) < 3 - 1e-9:
        raise ParameterError("alpha grid must span at least three decades")
    g = model._apply(f_true.data)
    kw = dict(solve_kw or {})
    errs = np.zeros(alphas.size)
    init = None
    for i in range(alphas.size - 1, -1, -1):
        al = alphas[i]
        cfg = SolveConfig(alpha=al, p=p, tolerance=tolerance_factor * al, **kw)
        r = solve_tikhonov(model, g, cfg, init=init)
        if not r.converged:
            raise RuntimeError(f"solve at alpha={al:g} did not converge (residual {r.optimality_residual:g})")
        init = r.minimizer
        errs[i] = besov_norm(r.minimizer - f_true, BesovIndex(0.0, p, 1))
    gamma = float(np.max(alphas ** (-s / (s + 2 * a)) * errs))
    bound = (math.sqrt(2.0) * K) ** (s / a) * gamma ** ((2 * a + s) / (2 * a))
    return gamma, bound, errs


# ---------------------------------------------------------------------------
# lower bound


@dataclass
class ModulusBound:
    value: float
    level: int
    beta: float
    pair: tuple
    data_gap: float | None
    bound: float
    bound_frame_corrected: float
    prior_norm: float
    smoothing_norm: float


def modulus_lower_bound(delta: float, s: float, p: float, rho: float, L2: float, sys: WaveletSystem,
                        a: float, model: ForwardModel | None = None, center: CoeffField | None = None,
                        q: float = INF) -> ModulusBound:
    """Probe pair ``(c, c + f_j)`` separated by ``||f_j||_{0,p,1}`` with data gap at most ``delta``.

    ``j`` is the least level with ``2^j > (rho L2 / delta)^{1/(s+a)}``. The
    returned ``bound`` is ``C^{-1} 2^{-s} rho (rho L2/delta)^{-s/(s+a)}`` with the
    frame constant ``C``; ``bound_frame_corrected`` multiplies it by
    ``c^{1/p}`` with the lower frame factor ``c`` of the index sets.
    """
    if not 0 < delta < rho * L2:
        raise ParameterError(f"need 0 < delta < rho * L2 = {rho * L2:g}")
    ratio = rho * L2 / delta
    j = int(math.floor(math.log2(ratio) / (s + a))) + 1
    while 2.0**j <= ratio ** (1.0 / (s + a)):
        j += 1
    while j > 0 and 2.0 ** (j - 1) > ratio ** (1.0 / (s + a)):
        j -= 1
    if j > sys.levels:
        raise ParameterError(f"probe level {j} exceeds the finest level {sys.levels}; increase J")
    fj = lower_bound_probe(j, s, p, rho, delta, L2, sys, a)
    c0 = sys.zeros() if center is None else center
    value = besov_norm(fj, BesovIndex(0.0, p, 1))
    gap = None
    if model is not None:
        gap = data_norm(model._apply((c0 + fj).data) - model._apply(c0.data))
    bound = 2.0**-s * rho * ratio ** (-s / (s + a)) / sys.frame_constant
    return ModulusBound(
        value=value,
        level=j,
        beta=float(fj.block(j)[0]),
        pair=(c0, c0 + fj),
        data_gap=gap,
        bound=bound,
        bound_frame_corrected=bound * sys.lower_frame_factor ** (1.0 / p),
        prior_norm=besov_norm(fj, BesovIndex(s, p, q)),
        smoothing_norm=besov_norm(fj, BesovIndex(-a, 2.0, 1)),
    )


# ---------------------------------------------------------------------------
# adjoint range


@dataclass
class AdjointRangeCertificate:
    nu_direct: float
    nu_dual: float
    nu_dual_basis: float
    equivalent: bool
    discrepancy: float


def adjoint_range_check(T, n: int, tol: float = 1e-8, projection=None) -> AdjointRangeCertificate:
    """Compare the direct and dual constants of ``||P f|| <= nu ||T f||``.

    ``T`` has shape ``(m, k)`` and acts on ``R^k``; ``P`` is the orthogonal
    projection onto the first ``n`` coordinates unless ``projection`` (a
    ``(r, k)`` matrix with orthonormal rows) is given.

    ``nu_direct`` is ``||P T^+||``. The dual side solves ``T^T psi = xi`` in the
    minimum-norm sense for ``xi`` in the range of ``P^T``: ``nu_dual_basis`` is the
    largest ``||psi||`` over the basis ``xi = P^T e_i`` and ``nu_dual`` the
    largest over unit ``xi``. Equivalence means ``nu_dual == nu_direct`` within
    ``tol`` and ``nu_direct <= sqrt(r) nu_dual_basis``.
    """
    T = np.asarray(T, dtype=float)
    if T.ndim != 2:
        raise ParameterError("T must be a matrix")
    m, k = T.shape
    U, sv, Vt = np.linalg.svd(T, full_matrices=False)
    if k > m or sv[-1] <= 1e-12 * sv[0]:
        raise SingularInstanceError("T is not injective (rank deficient)")
    if projection is None:
        if not 1 <= n <= k:
            raise ParameterError(f"projection size must lie in 1..{k}")
        P = np.eye(k)[:n]
    else:
        P = np.asarray(projection, dtype=float)
    Tpinv = (Vt.T / sv) @ U.T
    nu_direct = float(np.linalg.norm(P @ Tpinv, 2))
    # minimum-norm solutions of T^T psi = xi are psi = (T^+)^T xi
    Psi = Tpinv.T @ P.T
    nu_dual_basis = float(np.max(np.linalg.norm(Psi, axis=0)))
    nu_dual = float(np.linalg.norm(Psi, 2))
    # residual of the dual equations
    eq_res = float(np.max(np.abs(T.T @ Psi - P.T)))
    disc = abs(nu_dual - nu_direct) / max(nu_direct, 1e-300)
    ok = disc <= tol and nu_direct <= math.sqrt(P.shape[0]) * nu_dual_basis * (1 + tol) and eq_res <= tol * max(1.0, nu_dual)
    return AdjointRangeCertificate(nu_direct, nu_dual, nu_dual_basis, bool(ok), disc)


# ---------------------------------------------------------------------------
# noise


def noise_besov_norm(Z, d_tilde: float, p_dual: float, data_sys: WaveletSystem) -> float:
    """``||Z||`` in the sequence norm with indices ``(-d_tilde/2, p_dual, inf)``."""
    c = function_coefficients(Z, data_sys)
    return besov_norm(c, BesovIndex(-0.5 * d_tilde, p_dual, INF))


def sample_white_noise(eps: float, data_sys: WaveletSystem, seed=None) -> GridFunction:
    """``eps Z`` for discrete white noise ``Z`` (iid N(0,1) coefficients in the data basis)."""
    if eps < 0:
        raise ParameterError("eps must be nonnegative")
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal(data_sys.signal_length)
    return function_samples(CoeffField(eps * xi, data_sys))


def interpolation_check(g, s: float, a: float, p: float, data_sys: WaveletSystem) -> float:
    """``||g||_{s,p,1} / (||g||_2^{1-s/a} ||g||_{a,p,1}^{s/a})`` from data-side coefficients.

    Returns 0.0 for ``g = 0`` (the quotient is undefined there).
    """
    if not 0 < s < a:
        raise ParameterError("need 0 < s < a")
    c = function_coefficients(g, data_sys)
    l2 = float(np.linalg.norm(c.data))
    if l2 == 0:
        return 0.0
    top = besov_norm(c, BesovIndex(s, p, 1))
    high = besov_norm(c, BesovIndex(a, p, 1))
    return top / (l2 ** (1 - s / a) * high ** (s / a))
