"""Certificate experiments: sparsity levels, converse rates, index functions, lower bounds."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .analysis import (
    IndexFunctionSpec,
    converse_gamma,
    modulus_lower_bound,
    sparsity_level_bound,
    verify_sparsity,
    vsc_constants,
    vsc_phi,
)
from .besov import BallSpec, BesovIndex, besov_norm, make_extremal
from .errors import ConfigurationError
from .operators import conv_model, exact_smoothing_constants, estimate_smoothing_constants, smoothing_operator_norm
from .solver import SolveConfig, solve_tikhonov
from .wavelet import WaveletSystem

__all__ = [
    "CheckResult",
    "CHECK_DEFAULTS",
    "run_check",
    "run_sparsity_check",
    "run_converse_check",
    "run_vsc_check",
    "run_lower_bound_check",
]


@dataclass
class CheckResult:
    kind: str
    params: dict
    rows: list
    passed: bool
    summary: dict = field(default_factory=dict)
    runtime: float = 0.0

    def verdict(self) -> dict:
        return {"passed": self.passed, **self.summary}


CHECK_DEFAULTS = {
    "sparsity": {
        "levels": 10, "wavelet": "meyer", "a": 1.0, "s": 1.0, "rho": 1.0, "delta": 1e-2,
        "alphas": np.logspace(-3, -0.5, 10).tolist(), "ps": [1.0, 2.0], "tolerance": 1e-10,
        "zero_tol": 1e-10, "signal_seed": 0, "noise_seed": 1,
    },
    "converse": {
        "levels": 10, "wavelet": "meyer", "a": 1.0, "s": 1.0, "p": 2.0, "rho": 1.0,
        "alpha_min": 1e-6, "alpha_max": 1e-1, "points_per_decade": 2, "signal_seed": 0,
        "tolerance_factor": 1e-4, "stability": 0.2, "bound_fraction": 0.8,
    },
    "vsc": {
        "levels": 10, "wavelet": "meyer", "a": 1.0, "s": 1.0, "p": 2.0, "rho": 1.0, "signal_seed": 0,
        "points": 50,
    },
    "lower-bound": {
        "levels": 14, "wavelet": "meyer", "a": 1.0, "s": 1.0, "p": 2.0,
        "pairs": [[r, d] for r in (0.5, 1.0) for d in (1e-4, 3e-4, 1e-3, 3e-3, 1e-2)],
    },
}


def _params(kind, overrides):
    base = dict(CHECK_DEFAULTS[kind])
    unknown = set(overrides or {}) - set(base)
    if unknown:
        raise ConfigurationError(f"unknown {kind} parameters: {sorted(unknown)}")
    base.update(overrides or {})
    return base


def run_sparsity_check(overrides: dict | None = None) -> CheckResult:
    """Solve across (p, alpha) at tight tolerance and verify the block-sparsity level."""
    t0 = time.perf_counter()
    P = _params("sparsity", overrides)
    system = WaveletSystem(P["wavelet"], P["levels"])
    model = conv_model(P["a"], system)
    K = smoothing_operator_norm(model)
    rng = np.random.default_rng(P["noise_seed"])
    xi = rng.standard_normal(system.signal_length)
    xi *= P["delta"] / math.sqrt(float(np.mean(xi * xi)))
    rows = []
    for p in P["ps"]:
        f_true = make_extremal(BallSpec(BesovIndex(P["s"], p, math.inf), P["rho"]), system, seed=P["signal_seed"])
        g = model._apply(f_true.data) + xi
        for alpha in P["alphas"]:
            cfg = SolveConfig(alpha=alpha, p=p, tolerance=P["tolerance"], precondition=True, max_iterations=200000)
            r = solve_tikhonov(model, g, cfg)
            j_star = sparsity_level_bound(K, alpha, r.data_residual, P["a"], 1, p, 2.0)
            rep = verify_sparsity(r, j_star, P["zero_tol"])
            nz = r.nonzero_levels()
            rows.append({
                "p": p, "alpha": alpha, "j_star": j_star, "last_nonzero_level": nz[-1] if nz else -1,
                "worst_level": -1 if rep.worst_level is None else rep.worst_level,
                "worst_value": rep.worst_value, "data_residual": r.data_residual,
                "optimality_residual": r.optimality_residual, "converged": r.converged,
                "passed": rep.passed and r.converged,
            })
    violations = sum(not r["passed"] for r in rows)
    summary = {
        "K": K, "solves": len(rows), "violations": violations,
        "nonvacuous": sum(r["j_star"] <= P["levels"] for r in rows),
    }
    return CheckResult("sparsity", P, rows, violations == 0, summary, time.perf_counter() - t0)


def run_converse_check(overrides: dict | None = None) -> CheckResult:
    """Rate constant on exact data and the implied smoothness bound, on a grid and its one-decade extension."""
    t0 = time.perf_counter()
    P = _params("converse", overrides)
    system = WaveletSystem(P["wavelet"], P["levels"])
    model = conv_model(P["a"], system)
    K = smoothing_operator_norm(model)
    f_true = make_extremal(BallSpec(BesovIndex(P["s"], P["p"], math.inf), P["rho"]), system, seed=P["signal_seed"])
    ppd = P["points_per_decade"]
    lo, hi = math.log10(P["alpha_min"]), math.log10(P["alpha_max"])
    base = np.logspace(lo, hi, int(round((hi - lo) * ppd)) + 1)
    ext = np.logspace(lo - 1, hi, int(round((hi - lo + 1) * ppd)) + 1)
    kw = {"precondition": True, "max_iterations": 200000}
    g1, b1, e1 = converse_gamma(model, f_true, base, P["s"], P["a"], P["p"], K, P["tolerance_factor"], kw)
    g2, b2, e2 = converse_gamma(model, f_true, ext, P["s"], P["a"], P["p"], K, P["tolerance_factor"], kw)
    rows = [{"grid": "base", "alpha": a, "err_besov": e} for a, e in zip(base, e1)]
    rows += [{"grid": "extended", "alpha": a, "err_besov": e} for a, e in zip(ext, e2)]
    rho_true = besov_norm(f_true, BesovIndex(P["s"], P["p"], math.inf))
    variation = abs(g2 - g1) / g1
    passed = variation < P["stability"] and min(b1, b2) >= P["bound_fraction"] * rho_true
    summary = {
        "K": K, "gamma_base": g1, "gamma_extended": g2, "variation": variation,
        "bound_base": b1, "bound_extended": b2, "rho_true": rho_true,
    }
    return CheckResult("converse", P, rows, passed, summary, time.perf_counter() - t0)


def run_vsc_check(overrides: dict | None = None) -> CheckResult:
    """Tabulate the index function and compare it with its power-law envelope."""
    t0 = time.perf_counter()
    P = _params("vsc", overrides)
    system = WaveletSystem(P["wavelet"], P["levels"])
    model = conv_model(P["a"], system)
    exact = exact_smoothing_constants(model)
    if exact is not None:
        L1, L2 = exact
    else:
        sc = estimate_smoothing_constants(model, 200, seed=P["signal_seed"])
        L1, L2 = sc.L1_hat, sc.L2_hat
    f_true = make_extremal(BallSpec(BesovIndex(P["s"], P["p"], math.inf), P["rho"]), system, seed=P["signal_seed"])
    rho_eff = besov_norm(f_true, BesovIndex(P["s"], P["p"], math.inf))
    tmax = (P["s"] * rho_eff / P["a"]) ** 2
    spec = IndexFunctionSpec(L1, P["a"], P["s"], P["p"], P["rho"], tuple(tmax * np.arange(1, P["points"] + 1) / P["points"]))
    tab = vsc_phi(f_true, spec)
    env = tab.envelope(spec)
    const = vsc_constants(spec, L2)
    rows = [
        {"t": t, "phi": f, "envelope": e, "n_opt": int(k), "ok": bool(f <= e)}
        for t, f, e, k in zip(tab.t, tab.phi, env, tab.n_opt)
    ]
    violations = sum(not r["ok"] for r in rows)
    increasing = bool(np.all(np.diff(tab.phi) > 0))
    mid = 0.5 * (tab.t[:-2] + tab.t[2:])
    # equispaced grid: t[i+1] is the midpoint of t[i] and t[i+2]
    concave = bool(np.all(tab.phi[1:-1] >= 0.5 * (tab.phi[:-2] + tab.phi[2:]) - 1e-12)) and np.allclose(mid, tab.t[1:-1])
    summary = {"L1": L1, "L2": L2, "rho_eff": rho_eff, "violations": violations, "increasing": increasing,
               "midpoint_concave": concave, **const}
    return CheckResult("vsc", P, rows, violations == 0 and increasing and concave, summary, time.perf_counter() - t0)


def run_lower_bound_check(overrides: dict | None = None) -> CheckResult:
    """Probe pairs for several (rho, delta): data gap at most delta and loss above the rate bound."""
    t0 = time.perf_counter()
    P = _params("lower-bound", overrides)
    system = WaveletSystem(P["wavelet"], P["levels"])
    model = conv_model(P["a"], system)
    L2 = smoothing_operator_norm(model)
    rows = []
    for rho, delta in P["pairs"]:
        mb = modulus_lower_bound(delta, P["s"], P["p"], rho, L2, system, P["a"], model=model)
        rows.append({
            "rho": rho, "delta": delta, "level": mb.level, "beta": mb.beta, "value": mb.value,
            "data_gap": mb.data_gap, "bound": mb.bound, "bound_frame_corrected": mb.bound_frame_corrected,
            "prior_norm": mb.prior_norm, "smoothing_norm": mb.smoothing_norm,
            "gap_ok": mb.data_gap <= delta * (1 + 1e-12),
            "prior_ok": mb.prior_norm <= rho * (1 + 1e-12) and mb.smoothing_norm <= delta / L2 * (1 + 1e-12),
            "loss_ok": mb.value >= mb.bound_frame_corrected * (1 - 1e-12),
            "loss_ok_uncorrected": mb.value >= mb.bound * (1 - 1e-12),
        })
    passed = all(r["gap_ok"] and r["prior_ok"] and r["loss_ok"] for r in rows)
    summary = {"L2": L2, "pairs": len(rows), "uncorrected_bound_met": sum(r["loss_ok_uncorrected"] for r in rows)}
    return CheckResult("lower-bound", P, rows, passed, summary, time.perf_counter() - t0)


_RUNNERS = {
    "sparsity": run_sparsity_check,
    "converse": run_converse_check,
    "vsc": run_vsc_check,
    "lower-bound": run_lower_bound_check,
}


def run_check(kind: str, overrides: dict | None = None) -> CheckResult:
    if kind not in _RUNNERS:
        raise ConfigurationError(f"unknown check {kind!r}")
    return _RUNNERS[kind](overrides)
