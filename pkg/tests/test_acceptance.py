"""End-to-end acceptance criteria; each test prints one PASS/FAIL line."""

import math
import time

import numpy as np
import pytest

from besovreg import (
    SolveConfig,
    WaveletSystem,
    adjoint_range_check,
    analyze,
    conv_model,
    prox_block_lp,
    solve_tikhonov,
    synthesize,
)
from besovreg.checks import run_converse_check, run_lower_bound_check, run_sparsity_check, run_vsc_check
from besovreg.prox import dual_exponent
from besovreg.studies import RateStudySpec, run_rate_study, run_tv_study
from test_besov import _fields, _norms
from test_prox import objective as prox_objective
from test_prox import prox_oracle
from test_solver import coordinate_descent, dense_problem
from test_solver import objective as tikhonov_objective

INF = math.inf


def _study_line(res):
    return f"slope {res.slope:.4f} +/- {res.stderr:.4f} (target {res.target:.4f} +/- {res.tolerance}), {res.runtime:.1f} s"


def test_01_wavelet_round_trip(acceptance_report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    worst = 0.0
    for fam in ("db2", "db4", "db8", "meyer"):
        for J in (2, 5, 8, 11, 14):
            system = WaveletSystem(fam, J)
            x = rng.standard_normal(system.signal_length)
            z = analyze(x, system)
            nx = np.linalg.norm(x)
            worst = max(worst, np.linalg.norm(synthesize(z).samples - x) / nx, abs(np.linalg.norm(z.data) - nx) / nx)
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-10 and elapsed < 5
    acceptance_report(1, "wavelet round trip", ok, f"max rel error {worst:.2e}, {elapsed:.2f} s")
    assert ok


def test_02_prox_oracle(acceptance_report):
    rng = np.random.default_rng(2)
    worst_gap = worst_sub = 0.0
    for p in (1.0, 1.5, 2.0):
        q = dual_exponent(p)
        for _ in range(1000):
            m = int(rng.integers(1, 9))
            x = rng.standard_normal(m) * 10 ** rng.uniform(-1, 1)
            tau = 10 ** rng.uniform(-1.5, 0.5) * np.linalg.norm(x) / math.sqrt(m)
            y = prox_block_lp(x, tau, p)
            ref = prox_oracle(x, tau, p)
            scale = max(1.0, np.linalg.norm(x))
            worst_gap = max(worst_gap, np.max(np.abs(y - ref)) / scale)
            # x - y must be tau times a subgradient of the l^p norm at y
            v = (x - y) / tau
            ny = np.sum(np.abs(y) ** p) ** (1 / p)
            if ny == 0:
                sub = max(0.0, np.sum(np.abs(v) ** q) ** (1 / q) - 1) if q != INF else max(0.0, np.max(np.abs(v)) - 1)
            elif p == 1:
                on = y != 0
                sub = max(np.max(np.abs(v[on] - np.sign(y[on]))), np.max(np.abs(v[~on]), initial=1.0) - 1)
            else:
                sub = np.max(np.abs(v - np.sign(y) * (np.abs(y) / ny) ** (p - 1)))
            worst_sub = max(worst_sub, sub)
            assert prox_objective(y, x, tau, p) <= prox_objective(ref, x, tau, p) + 1e-12 * scale**2
    ok = worst_gap < 1e-6 and worst_sub < 1e-8
    acceptance_report(2, "prox oracle", ok, f"max deviation {worst_gap:.2e}, subgradient residual {worst_sub:.2e}")
    assert ok


def test_03_tiny_solver_oracle(acceptance_report):
    system = WaveletSystem("db2", 3)
    model = conv_model(1.0, system)
    rng = np.random.default_rng(3)
    g = model._apply(rng.standard_normal(8)) + 0.05 * rng.standard_normal(8)
    A, _ = dense_problem(model)
    worst = 0.0
    for p in (1.0, 2.0):
        for alpha in (1e-4, 1e-3, 1e-2, 1e-1):
            ref = tikhonov_objective(A, g, coordinate_descent(A, g, alpha, p, system), alpha, p, 3)
            res = solve_tikhonov(model, g, SolveConfig(alpha=alpha, p=p, tolerance=1e-10, max_iterations=100000))
            worst = max(worst, abs(res.objective - ref))
    ok = worst < 1e-6
    acceptance_report(3, "tiny solver oracle", ok, f"max objective gap {worst:.2e}")
    assert ok


def test_04_deterministic_rate(acceptance_report):
    res = run_rate_study(RateStudySpec(kind="deterministic", grid=tuple(np.logspace(-4, -1, 10).tolist())))
    ok = res.within_band and res.runtime < 300
    acceptance_report(4, "deterministic rate", ok, _study_line(res))
    assert ok


def test_05_exact_data_rate(acceptance_report):
    res = run_rate_study(RateStudySpec(kind="exact", grid=tuple(np.logspace(-6, -1, 10).tolist())))
    ok = res.within_band
    acceptance_report(5, "exact-data rate", ok, _study_line(res))
    assert ok


def test_06_no_saturation(acceptance_report):
    res = run_rate_study(RateStudySpec(kind="deterministic", s=3.0, grid=tuple(np.logspace(-4, -1, 10).tolist()), levels=12))
    ok = res.within_band and res.target == 0.75
    acceptance_report(6, "no saturation at s = 3", ok, _study_line(res))
    assert ok


def test_07_sparsity_bound(acceptance_report):
    res = run_sparsity_check()
    ok = res.passed and res.summary["solves"] == 20 and res.summary["violations"] == 0
    acceptance_report(7, "sparsity level bound", ok, f"{res.summary['solves']} solves, {res.summary['violations']} violations, {res.summary['nonvacuous']} nonvacuous")
    assert ok


def test_08_converse(acceptance_report):
    res = run_converse_check()
    S = res.summary
    ok = res.passed and S["variation"] < 0.2 and min(S["bound_base"], S["bound_extended"]) >= 0.8 * 1.0
    acceptance_report(8, "converse", ok, f"gamma {S['gamma_base']:.4f} -> {S['gamma_extended']:.4f} (variation {S['variation']:.3f}), bound {S['bound_base']:.3f}")
    assert ok


def test_09_statistical_rate(acceptance_report):
    spec = RateStudySpec(kind="statistical", grid=tuple(np.logspace(-3, -1, 8).tolist()), replicates=20, levels=14)
    res = run_rate_study(spec)
    ok = res.within_band and res.runtime < 900 and all(r["replicates"] == 20 for r in res.rows)
    acceptance_report(9, "statistical rate", ok, _study_line(res))
    assert ok


def test_10_vsc_envelope(acceptance_report):
    res = run_vsc_check({"points": 50})
    ok = res.passed and res.summary["violations"] == 0 and len(res.rows) == 50
    acceptance_report(10, "index function envelope", ok, f"{res.summary['violations']} violations, c = {res.summary['c_envelope']:.4g}")
    assert ok


def test_11_lower_bound_probe(acceptance_report):
    res = run_lower_bound_check()
    ok = res.passed and res.summary["pairs"] == 10
    acceptance_report(11, "lower-bound probe", ok, f"{res.summary['pairs']} pairs certified, uncorrected bound met by {res.summary['uncorrected_bound_met']}")
    assert ok


def test_12_adjoint_range(acceptance_report):
    rng = np.random.default_rng(12)
    worst = 0.0
    ok = True
    for _ in range(50):
        T = rng.standard_normal((30, 20))
        cert = adjoint_range_check(T, int(rng.integers(1, 21)))
        worst = max(worst, cert.discrepancy)
        ok &= cert.equivalent
    ok = ok and worst < 1e-8
    acceptance_report(12, "adjoint-range equivalence", ok, f"max discrepancy {worst:.2e}")
    assert ok


def test_13_embedding_constants(acceptance_report):
    system, data = _fields(13)
    checks = []
    for p, pt in ((1, 2), (1.5, 2), (1, 1.5)):
        checks.append(_norms(system, data, -(1 / p - 1 / pt), pt, 1) / _norms(system, data, 0, p, 1))
    checks.append(_norms(system, data, 0.7, 1.5, INF) / _norms(system, data, 0.7, 1.5, 1))
    C = system.frame_constant ** (1 - 1 / 2)
    checks.append(_norms(system, data, 0.3, 1, 2) / (C * _norms(system, data, 0.3, 2, 2)))
    for s in (0.25, 1.0, 2.5):
        checks.append(_norms(system, data, 0, 2, 1) * (1 - 2.0**-s) / _norms(system, data, s, 2, INF))
    worst = max(float(np.max(c)) for c in checks)
    ok = worst <= 1 + 1e-12
    acceptance_report(13, "embedding constants", ok, f"largest ratio {worst:.12f} over {data.shape[0]} fields")
    assert ok


def test_14_tv_study(acceptance_report):
    res = run_tv_study(RateStudySpec(kind="tv", p=1.0, grid=tuple(np.logspace(-3, -1, 8).tolist()), levels=14))
    ok = res.within_band and res.fit_on == "err_lp"
    acceptance_report(14, "step-function study", ok, _study_line(res))
    assert ok
