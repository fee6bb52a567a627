"""Convergence-rate studies and certificate experiments.

A rate study draws a truth from a Besov ball, simulates data on a grid of
noise levels (or regularization parameters for exact data), solves, and
fits the log-log slope of the reconstruction error.
"""

from __future__ import annotations

import dataclasses
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .besov import BallSpec, BesovIndex, besov_norm, make_extremal
from .errors import ConfigurationError, ParameterError
from .operators import conv_model, hammerstein_model
from .solver import SolveConfig, choose_alpha_deterministic, choose_alpha_statistical, solve_tikhonov, solve_tikhonov_stat
from .wavelet import CoeffField, WaveletSystem, function_coefficients, function_samples

__all__ = [
    "RateStudySpec",
    "RateStudyResult",
    "run_rate_study",
    "run_tv_study",
    "fit_slope",
    "target_exponent",
    "truncation_tail",
    "auto_levels",
    "thread_count",
    "step_function",
]

RATE_KINDS = ("deterministic", "exact", "statistical", "tv")
DEFAULT_TOLERANCE = {"deterministic": 0.10, "exact": 0.08, "statistical": 0.15, "tv": 0.12}
THREADS_ENV = "BESOVREG_THREADS"


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigurationError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigurationError(f"{THREADS_ENV} must be >= 1")
    return n


def fit_slope(xs, ys):
    """Least-squares slope of ``log ys`` against ``log xs`` and its standard error."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.size < 4:
        raise ParameterError("slope fit needs at least 4 paired points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ParameterError("slope fit needs positive values")
    r = stats.linregress(np.log(x), np.log(y))
    se = float(r.stderr) if np.isfinite(r.stderr) else 0.0
    return float(r.slope), se


def target_exponent(kind: str, s: float, a: float, d_tilde: float = 1.0) -> float:
    if kind == "deterministic":
        return s / (s + a)
    if kind == "tv":
        return 1.0 / (1.0 + a)
    if kind == "exact":
        return s / (s + 2 * a)
    if kind == "statistical":
        return 2 * s / (2 * a + 2 * s + d_tilde)
    raise ConfigurationError(f"unknown study kind {kind!r}")


def truncation_tail(levels: int, s: float, rho: float) -> float:
    """``2^{-J s} rho``, the size of the neglected fine-scale part."""
    return 2.0 ** (-levels * s) * rho


def step_function(system: WaveletSystem) -> np.ndarray:
    """Samples of the periodic step with unit jumps at 1/4 and 3/4, mean zero."""
    t = system.grid()
    return ((t >= 0.25) & (t < 0.75)).astype(float) - 0.5


@dataclass(frozen=True)
class RateStudySpec:
    """Configuration of one rate study.

    ``grid`` holds noise levels (deterministic, tv), noise amplitudes
    (statistical) or regularization parameters (exact), in increasing order.
    ``levels = None`` picks the smallest J >= 8 that passes the truncation guard.
    ``trim`` drops the smallest ``trim`` decades of the grid from the fit.
    """

    kind: str = "deterministic"
    grid: tuple = tuple(np.logspace(-4, -1, 10).tolist())
    a: float = 1.0
    model: str = "conv"
    s: float = 1.0
    p: float = 2.0
    rho: float = 1.0
    d_tilde: float = 1.0
    alpha_scale: float = 1.0
    replicates: int = 1
    wavelet: str = "meyer"
    levels: int | None = None
    signal_seed: int = 0
    noise_seed: int = 1
    tolerance_factor: float = 1e-3
    max_iterations: int = 20000
    slope_tolerance: float | None = None
    trim: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(float(v) for v in self.grid))
        if self.kind not in RATE_KINDS:
            raise ConfigurationError(f"unknown study kind {self.kind!r}; expected one of {RATE_KINDS}")
        g = np.asarray(self.grid)
        if g.size < 4:
            raise ConfigurationError("the grid needs at least 4 points")
        if np.any(g <= 0):
            raise ConfigurationError("grid values must be positive")
        if np.any(np.diff(g) <= 0):
            raise ConfigurationError("grid must be strictly increasing")
        if self.model not in ("conv", "hammerstein"):
            raise ConfigurationError(f"unknown model {self.model!r}")
        if self.a <= 0 or self.s <= 0 or self.rho <= 0:
            raise ConfigurationError("a, s and rho must be positive")
        if not 1 <= self.p <= 2:
            raise ConfigurationError("p must lie in [1, 2]")
        if self.kind == "statistical" and not 0 <= self.d_tilde < 2 * self.a:
            raise ConfigurationError("need 0 <= d_tilde < 2a")
        if self.kind == "tv" and (self.p != 1 or self.s != 1):
            raise ConfigurationError("the TV study uses p = 1 and s = 1")
        if self.replicates < 1:
            raise ConfigurationError("replicates must be >= 1")
        if self.trim < 0:
            raise ConfigurationError("trim must be nonnegative")
        WaveletSystem(self.wavelet, self.levels or 8)

    @property
    def target(self) -> float:
        return target_exponent(self.kind, self.s, self.a, self.d_tilde)

    @property
    def tolerance(self) -> float:
        return DEFAULT_TOLERANCE[self.kind] if self.slope_tolerance is None else self.slope_tolerance

    def guard_level(self) -> float:
        """Smallest noise level the truncation tail is compared against."""
        lo = self.grid[0]
        if self.kind == "exact":
            # noise level whose a priori parameter is the smallest alpha
            return lo ** ((self.s + self.a) / (self.s + 2 * self.a))
        return lo

    def to_dict(self) -> dict:
        return dataclasses.asdict(self) | {"grid": list(self.grid)}

    @classmethod
    def from_dict(cls, d: dict) -> "RateStudySpec":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigurationError(f"unknown study fields: {sorted(unknown)}")
        return cls(**d)


@dataclass
class RateStudyResult:
    spec: RateStudySpec
    rows: list
    slope: float
    stderr: float
    target: float
    tolerance: float
    passed: bool
    within_band: bool
    excluded: int
    fit_on: str
    constants: dict = field(default_factory=dict)
    runtime: float = 0.0

    def verdict(self) -> dict:
        return {
            "slope": self.slope,
            "stderr": self.stderr,
            "target": self.target,
            "tolerance": self.tolerance,
            "within_band": self.within_band,
            "passed": self.passed,
            "excluded": self.excluded,
            "fit_on": self.fit_on,
        }


def _rho_eff(spec: RateStudySpec, system: WaveletSystem):
    if spec.kind == "tv":
        f = function_coefficients(step_function(system), system)
        return f, besov_norm(f, BesovIndex(1.0, 1.0, math.inf))
    f = make_extremal(BallSpec(BesovIndex(spec.s, spec.p, math.inf), spec.rho), system, seed=spec.signal_seed)
    return f, spec.rho


def auto_levels(spec: RateStudySpec, start: int = 8, stop: int = 20) -> int:
    """Smallest J in [start, stop] passing the truncation guard."""
    s = 1.0 if spec.kind == "tv" else spec.s
    for J in range(start, stop + 1):
        _, rho = _rho_eff(spec, WaveletSystem(spec.wavelet, J)) if spec.kind == "tv" else (None, spec.rho)
        if truncation_tail(J, s, rho) < 0.1 * spec.guard_level():
            return J
    raise ConfigurationError(f"no J <= {stop} passes the truncation guard for this grid")


def _model(spec, system):
    if spec.model == "conv":
        return conv_model(spec.a, system)
    if spec.a != 1:
        raise ConfigurationError("the Hammerstein model has a = 1")
    return hammerstein_model(system=system)


def _alpha(spec, level):
    if spec.kind == "exact":
        return level
    if spec.kind == "statistical":
        return spec.alpha_scale * choose_alpha_statistical(level, spec.rho, spec.s, spec.a, spec.d_tilde)
    return spec.alpha_scale * choose_alpha_deterministic(level, 1.0 if spec.kind == "tv" else spec.s, spec.a)


def _chain(spec, model, f_true, g_true, noise, stat):
    """Solve along the grid from the largest level down, warm-starting each solve."""
    out = [None] * len(spec.grid)
    init = None
    solve = solve_tikhonov_stat if stat else solve_tikhonov
    u_true = function_samples(f_true).samples
    for i in range(len(spec.grid) - 1, -1, -1):
        level = spec.grid[i]
        alpha = _alpha(spec, level)
        g = g_true if noise is None else g_true + level * noise
        cfg = SolveConfig(
            alpha=alpha,
            p=spec.p,
            tolerance=spec.tolerance_factor * alpha,
            max_iterations=spec.max_iterations,
            precondition=model.linear,
        )
        r = solve(model, g, cfg, init=init)
        init = r.minimizer
        diff = r.minimizer - f_true
        du = function_samples(r.minimizer).samples - u_true
        nz = r.nonzero_levels()
        out[i] = {
            "alpha": alpha,
            "err_besov": besov_norm(diff, BesovIndex(0.0, spec.p, 1)),
            "err_lp": float(np.mean(np.abs(du) ** spec.p) ** (1.0 / spec.p)),
            "data_residual": r.data_residual,
            "optimality_residual": r.optimality_residual,
            "iterations": r.iterations,
            "sparsity_level": nz[-1] if nz else -1,
            "converged": r.converged,
        }
    return out


def run_rate_study(spec: RateStudySpec, threads: int | None = None) -> RateStudyResult:
    """Run a rate study and fit its slope; see :class:`RateStudySpec`."""
    t0 = time.perf_counter()
    J = spec.levels if spec.levels is not None else auto_levels(spec)
    system = WaveletSystem(spec.wavelet, J)
    f_true, rho = _rho_eff(spec, system)
    s_guard = 1.0 if spec.kind == "tv" else spec.s
    tail = truncation_tail(J, s_guard, rho)
    if not tail < 0.1 * spec.guard_level():
        raise ConfigurationError(
            f"truncation guard failed: 2^(-J s) rho = {tail:.3g} is not below 0.1 x {spec.guard_level():.3g}; increase J"
        )
    model = _model(spec, system)
    g_true = model._apply(f_true.data)
    n = system.signal_length
    ss = np.random.SeedSequence(spec.noise_seed)
    children = ss.spawn(spec.replicates)

    def replicate(k):
        rng = np.random.default_rng(children[k])
        if spec.kind == "exact":
            return _chain(spec, model, f_true, g_true, None, False)
        if spec.kind == "statistical":
            # discrete white noise: iid N(0,1) coefficients in the data basis
            z = function_samples(CoeffField(rng.standard_normal(n), system)).samples
            return _chain(spec, model, f_true, g_true, z, True)
        xi = rng.standard_normal(n)
        xi /= math.sqrt(float(np.mean(xi * xi)))
        return _chain(spec, model, f_true, g_true, xi, False)

    workers = threads or thread_count()
    if workers > 1 and spec.replicates > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            reps = list(ex.map(replicate, range(spec.replicates)))
    else:
        reps = [replicate(k) for k in range(spec.replicates)]

    rows = []
    for i, level in enumerate(spec.grid):
        recs = [rep[i] for rep in reps]
        ok = [r for r in recs if r["converged"]]
        row = {
            "noise_level": level,
            "alpha": recs[0]["alpha"],
            "err_besov": math.fsum(r["err_besov"] for r in ok) / len(ok) if ok else math.nan,
            "err_lp": math.fsum(r["err_lp"] for r in ok) / len(ok) if ok else math.nan,
            "data_residual": max(r["data_residual"] for r in recs),
            "optimality_residual": max(r["optimality_residual"] for r in recs),
            "iterations": max(r["iterations"] for r in recs),
            "sparsity_level": max(r["sparsity_level"] for r in recs),
            "replicates": len(ok),
            "converged": len(ok) == len(recs),
        }
        rows.append(row)

    fit_on = "err_lp" if spec.kind == "tv" else "err_besov"
    lo_keep = spec.grid[0] * 10.0**spec.trim
    use = [r for r in rows if r["converged"] and r["noise_level"] >= lo_keep * (1 - 1e-12)]
    excluded = sum(not r["converged"] for r in rows)
    target, tol = spec.target, spec.tolerance
    if excluded > 0.25 * len(rows) or len(use) < 4:
        slope = se = math.nan
        passed = within = False
    else:
        slope, se = fit_slope([r["noise_level"] for r in use], [r[fit_on] for r in use])
        within = abs(slope - target) <= tol
        passed = abs(slope - target) <= tol + 2 * se
    constants = {"levels": J, "rho_eff": rho, "truncation_tail": tail, "guard_level": spec.guard_level()}
    return RateStudyResult(
        spec=spec,
        rows=rows,
        slope=slope,
        stderr=se,
        target=target,
        tolerance=tol,
        passed=passed,
        within_band=within,
        excluded=excluded,
        fit_on=fit_on,
        constants=constants,
        runtime=time.perf_counter() - t0,
    )


def run_tv_study(spec: RateStudySpec, threads: int | None = None) -> RateStudyResult:
    """Rate study for the periodic step function with the p = 1 penalty; L1 error is fitted."""
    if spec.kind != "tv":
        spec = dataclasses.replace(spec, kind="tv", p=1.0, s=1.0)
    return run_rate_study(spec, threads)
