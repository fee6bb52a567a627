"""Tikhonov minimization with the level-weighted l^p penalty.

Linear models use FISTA with function-value restart. Nonlinear models use
proximal gradient with Armijo backtracking. Both report the first-order
residual ``||(z - prox(z - eta * grad, alpha * eta)) / eta||`` with a scalar
step ``eta``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .besov import level_weights
from .errors import ConfigurationError, NumericalDomainError, ParameterError, StepRuleError
from .operators import ForwardModel, level_operator_norms, operator_norm
from .prox import _prox_levels, penalty_value
from .wavelet import CoeffField, GridFunction

__all__ = [
    "SolveConfig",
    "SolveResult",
    "solve_tikhonov",
    "solve_tikhonov_stat",
    "choose_alpha_deterministic",
    "choose_alpha_statistical",
    "subgradient_alpha",
]


@dataclass(frozen=True)
class SolveConfig:
    """Solver parameters.

    Parameters
    ----------
    alpha : float
        Regularization parameter, > 0.
    p : float
        Penalty exponent in [1, 2].
    max_iterations : int
    step_rule : {"backtracking", "fixed"}
        ``"fixed"`` uses ``1/L`` from a power-method estimate of ``||F||^2``
        and raises :class:`StepRuleError` if the objective increases;
        ``"backtracking"`` starts from the same value and shrinks the step
        by ``backtrack_factor`` whenever the quadratic upper bound fails.
    tolerance : float
        Target first-order residual.
    restart : bool
        Function-value restart of the momentum (linear models).
    precondition : bool
        Use a level-diagonal metric built from per-level operator norms
        (linear models). Changes the path, not the minimizer.
    """

    alpha: float
    p: float = 2.0
    max_iterations: int = 20000
    step_rule: str = "backtracking"
    backtrack_factor: float = 0.5
    initial_step: float | None = None
    tolerance: float = 1e-8
    restart: bool = True
    precondition: bool = False
    power_iterations: int = 50
    seed: int = 0

    def __post_init__(self):
        if not self.alpha > 0 or not math.isfinite(self.alpha):
            raise ParameterError(f"alpha must be positive and finite, got {self.alpha}")
        if not 1.0 <= self.p <= 2.0:
            raise ParameterError(f"p must lie in [1, 2], got {self.p}")
        if not self.tolerance > 0:
            raise ParameterError("tolerance must be positive")
        if self.step_rule not in ("backtracking", "fixed"):
            raise ConfigurationError(f"unknown step rule {self.step_rule!r}")
        if not 0 < self.backtrack_factor < 1:
            raise ParameterError("backtrack_factor must lie in (0, 1)")
        if self.max_iterations < 1:
            raise ParameterError("max_iterations must be >= 1")


@dataclass
class SolveResult:
    minimizer: CoeffField
    objective_trace: np.ndarray
    data_residual: float
    optimality_residual: float
    iterations: int
    zero_levels: list
    converged: bool
    gradient: CoeffField
    step: float
    restarts: int = 0
    runtime: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def objective(self) -> float:
        return float(self.objective_trace[-1])

    def nonzero_levels(self) -> list:
        return [j for j, z in enumerate(self.zero_levels) if not z]


def _as_samples(g, n):
    g = g.samples if isinstance(g, GridFunction) else np.asarray(g, dtype=float)
    if g.shape != (n,):
        raise ConfigurationError(f"data length {g.shape} does not match model grid ({n},)")
    return g


def _level_index(system):
    return system.level_of_index()


def _preconditioner(model: ForwardModel, cfg: SolveConfig):
    cache = model.__dict__.setdefault("_precond_cache", {})
    key = (cfg.power_iterations, cfg.seed)
    if key not in cache:
        # a rough per-level scale is enough for a metric
        sig = level_operator_norms(model, iterations=cfg.power_iterations, tol=1e-4, seed=cfg.seed, dense=False)
        m = np.maximum(sig**2, 1e-300)
        lev = _level_index(model.system)
        mvec = m[lev]
        # ||F M^{-1/2}||^2 by power iteration
        n = model.system.signal_length
        zero = np.zeros(n)
        v = np.random.default_rng(cfg.seed).standard_normal(n)
        v /= np.linalg.norm(v)
        lam = 0.0
        for _ in range(cfg.power_iterations):
            w = model._dadjoint(zero, model._dapply(zero, v / np.sqrt(mvec))) / np.sqrt(mvec)
            lam = float(np.linalg.norm(w))
            v = w / lam
        cache[key] = (m, mvec, lam)
    return cache[key]


def _lipschitz(model, cfg):
    cache = model.__dict__.setdefault("_lipschitz_cache", {})
    key = (cfg.power_iterations, cfg.seed)
    if key not in cache:
        cache[key] = operator_norm(model, iterations=cfg.power_iterations, seed=cfg.seed) ** 2
    return cache[key]


def _residual(x, grad, eta, alpha, thr_w, p, J):
    y = _prox_levels(x - eta * grad, alpha * eta * thr_w, p, J)
    return float(np.linalg.norm(x - y)) / eta


def _finish(model, x, trace, Fx, g, grad, res, it, converged, eta, restarts, t0, notes):
    sys = model.system
    J = sys.levels
    zero_levels = [not np.any(x[sl]) for sl in (slice(0, 1),) + tuple(slice(2 ** (j - 1), 2**j) for j in range(1, J + 1))]
    return SolveResult(
        minimizer=CoeffField(x, sys),
        objective_trace=np.asarray(trace),
        data_residual=float(np.sqrt(np.mean((Fx - g) ** 2))),
        optimality_residual=res,
        iterations=it,
        zero_levels=zero_levels,
        converged=converged,
        gradient=CoeffField(grad, sys),
        step=eta,
        restarts=restarts,
        runtime=time.perf_counter() - t0,
        notes=notes,
    )


def _smooth_value(Fx, g, stat):
    if stat:
        return 0.5 * float(np.mean(Fx * Fx)) - float(np.mean(g * Fx))
    d = Fx - g
    return 0.5 * float(np.mean(d * d))


def _check_finite(v, what):
    if not math.isfinite(v):
        raise NumericalDomainError(f"non-finite {what}")


def _solve_linear(model, g, cfg, x0, stat):
    t0 = time.perf_counter()
    sys = model.system
    J = sys.levels
    n = sys.signal_length
    alpha, p = cfg.alpha, cfg.p
    w = level_weights(J, 0.0, p)
    zero = np.zeros(n)
    F0 = model._apply(zero)

    def fwd(x):
        return model._apply(x) - F0

    def grad_of(Fx_full):
        return model._dadjoint(zero, Fx_full - g)

    L_scalar = _lipschitz(model, cfg) * 1.01
    if cfg.initial_step is not None:
        L_scalar = 1.0 / cfg.initial_step
    if cfg.precondition:
        m_lev, mvec, L = _preconditioner(model, cfg)
        L *= 1.01
    else:
        m_lev, mvec, L = np.ones(J + 1), np.ones(n), L_scalar
    eta = 1.0 / L_scalar

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    Fx = fwd(x) + F0
    gx = grad_of(Fx)
    obj = _smooth_value(Fx, g, stat) + alpha * penalty_value(x, J, p)
    _check_finite(obj, "objective")
    trace = [obj]
    y, Fy, gy = x, Fx, gx
    t = 1.0
    restarts = 0
    notes = []
    res = _residual(x, gx, eta, alpha, w, p, J)
    it = 0
    stalls = 0
    converged = res <= cfg.tolerance
    while not converged and it < cfg.max_iterations:
        it += 1
        while True:
            step = 1.0 / (L * mvec)
            xn = _prox_levels(y - step * gy, alpha * w / (L * m_lev), p, J)
            Fxn = fwd(xn) + F0
            d = xn - y
            fy = _smooth_value(Fy, g, stat)
            fn = _smooth_value(Fxn, g, stat)
            bound = fy + float(gy @ d) + 0.5 * L * float(np.sum(mvec * d * d))
            if fn <= bound + 1e-12 * max(1.0, abs(fy)):
                break
            if cfg.step_rule == "fixed":
                raise StepRuleError("quadratic upper bound violated under the fixed step; use step_rule='backtracking'")
            L /= cfg.backtrack_factor
            if not cfg.precondition:
                L_scalar = L
                eta = 1.0 / L
        gxn = grad_of(Fxn)
        objn = fn + alpha * penalty_value(xn, J, p)
        _check_finite(objn, "objective")
        # objective values carry rounding error of a few ulps of their terms
        slack = 16 * np.finfo(float).eps * (abs(fn) + abs(objn - fn) + abs(obj))
        if objn > obj:
            if y is x and objn - obj > slack:
                # the quadratic bound held, so a plain step cannot increase the objective
                stalls += 1
                trace.append(obj)
                if stalls >= 3:
                    notes.append("stalled at rounding level")
                    break
                continue
            if y is not x and cfg.restart:
                restarts += 1
                t = 1.0
                y, Fy, gy = x, Fx, gx
                trace.append(obj)
                continue
            if y is not x and cfg.step_rule == "fixed" and objn - obj > slack:
                raise StepRuleError("objective increased under the fixed step; enable restart or backtracking")
        stalls = 0
        tn = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        beta = (t - 1.0) / tn
        y = xn + beta * (xn - x)
        Fy = Fxn + beta * (Fxn - Fx)
        gy = gxn + beta * (gxn - gx)
        x, Fx, gx, obj, t = xn, Fxn, gxn, objn, tn
        trace.append(obj)
        res = _residual(x, gx, eta, alpha, w, p, J)
        converged = res <= cfg.tolerance
    return _finish(model, x, trace, Fx, g, gx, res, it, converged, eta, restarts, t0, notes)


def _solve_nonlinear(model, g, cfg, x0, stat):
    t0 = time.perf_counter()
    sys = model.system
    J = sys.levels
    n = sys.signal_length
    alpha, p = cfg.alpha, cfg.p
    w = level_weights(J, 0.0, p)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if cfg.initial_step is not None:
        eta = cfg.initial_step
    else:
        eta = 1.0 / (operator_norm(model, x, iterations=cfg.power_iterations, seed=cfg.seed) ** 2 * 1.01)
    Fx = model._apply(x)
    fx = _smooth_value(Fx, g, stat)
    gx = model._dadjoint(x, Fx - g)
    obj = fx + alpha * penalty_value(x, J, p)
    _check_finite(obj, "objective")
    trace = [obj]
    res = _residual(x, gx, eta, alpha, w, p, J)
    converged = res <= cfg.tolerance
    it = 0
    notes = []
    while not converged and it < cfg.max_iterations:
        it += 1
        for _ in range(60):
            xn = _prox_levels(x - eta * gx, alpha * eta * w, p, J)
            Fxn = model._apply(xn)
            fn = _smooth_value(Fxn, g, stat)
            d = xn - x
            objn = fn + alpha * penalty_value(xn, J, p)
            _check_finite(objn, "objective")
            # rounding error of the compared values
            slack = 16 * np.finfo(float).eps * (abs(fx) + abs(fn) + abs(objn - fn) + abs(obj))
            bound_ok = fn <= fx + float(gx @ d) + 0.5 / eta * float(d @ d) + slack
            if bound_ok and objn <= obj + slack:
                break
            if cfg.step_rule == "fixed":
                raise StepRuleError("sufficient decrease failed under the fixed step; use step_rule='backtracking'")
            eta *= cfg.backtrack_factor
        else:
            notes.append("stalled at rounding level")
            break
        x, Fx, fx, obj = xn, Fxn, fn, objn
        gx = model._dadjoint(x, Fx - g)
        trace.append(obj)
        res = _residual(x, gx, eta, alpha, w, p, J)
        converged = res <= cfg.tolerance
        if cfg.step_rule == "backtracking":
            eta /= cfg.backtrack_factor**0.25
    return _finish(model, x, trace, Fx, g, gx, res, it, converged, eta, 0, t0, notes)


def _dispatch(model, g_obs, cfg, init, stat):
    if not isinstance(model, ForwardModel):
        raise ConfigurationError("model must be a ForwardModel")
    g = _as_samples(g_obs, model.system.signal_length)
    x0 = None
    if init is not None:
        if isinstance(init, CoeffField):
            if init.system != model.system:
                raise ConfigurationError("initial iterate belongs to a different wavelet system")
            x0 = init.data
        else:
            x0 = np.asarray(init, dtype=float)
    if model.linear:
        return _solve_linear(model, g, cfg, x0, stat)
    return _solve_nonlinear(model, g, cfg, x0, stat)


def solve_tikhonov(model: ForwardModel, g_obs, cfg: SolveConfig, init=None) -> SolveResult:
    """Minimize ``0.5 ||F(f) - g_obs||^2 + alpha ||f||_{0,p,1}``.

    ``init`` warm-starts the iteration (e.g. from a neighbouring alpha).
    """
    return _dispatch(model, g_obs, cfg, init, stat=False)


def solve_tikhonov_stat(model: ForwardModel, g_obs, cfg: SolveConfig, init=None) -> SolveResult:
    """Minimize ``0.5 ||F(f)||^2 - <g_obs, F(f)> + alpha ||f||_{0,p,1}``.

    Same minimizer as :func:`solve_tikhonov`; the objective differs by
    the constant ``0.5 ||g_obs||^2``.
    """
    return _dispatch(model, g_obs, cfg, init, stat=True)


def choose_alpha_deterministic(delta: float, s: float, a: float) -> float:
    """``alpha = delta^((s + 2a) / (s + a))``."""
    if delta < 0 or s <= 0 or a <= 0:
        raise ParameterError("need delta >= 0, s > 0, a > 0")
    return float(delta ** ((s + 2 * a) / (s + a)))


def subgradient_alpha(delta: float, s: float, a: float, c: float = 1.0, c_err: float = 2.0) -> float:
    """Parameter from the subgradient condition for the index function ``c t^kappa``.

    With ``kappa = s / (2(s + a))`` the condition
    ``1/(2 c_err alpha) in d(-phi)(c_err delta^2)`` gives
    ``alpha = (c_err delta^2)^(1 - kappa) / (2 c_err c kappa)``.
    """
    kappa = s / (2.0 * (s + a))
    return float((c_err * delta * delta) ** (1.0 - kappa) / (2.0 * c_err * c * kappa))


def choose_alpha_statistical(eps: float, rho: float, s: float, a: float, d_tilde: float) -> float:
    """Balanced choice ``eps^(2(s+2a)/(2s+2a+d)) * rho^((d-2a)/(2s+2a+d))``."""
    if not 0 <= d_tilde < 2 * a:
        raise ParameterError(f"need 0 <= d_tilde < 2a, got d_tilde={d_tilde}, a={a}")
    if eps < 0 or rho <= 0 or s <= 0:
        raise ParameterError("need eps >= 0, rho > 0, s > 0")
    den = 2 * s + 2 * a + d_tilde
    return float(eps ** (2 * (s + 2 * a) / den) * rho ** ((d_tilde - 2 * a) / den))
