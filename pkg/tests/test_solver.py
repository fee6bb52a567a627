import math

import numpy as np
import pytest
from scipy.optimize import brentq

from besovreg import (
    BallSpec,
    BesovIndex,
    CoeffField,
    SolveConfig,
    WaveletSystem,
    besov_norm,
    choose_alpha_deterministic,
    choose_alpha_statistical,
    conv_model,
    hammerstein_model,
    make_extremal,
    penalty_value,
    solve_tikhonov,
    solve_tikhonov_stat,
)
from besovreg.errors import ConfigurationError, ParameterError, StepRuleError
from besovreg.prox import dual_exponent
from besovreg.solver import subgradient_alpha


def dense_problem(model):
    n = model.system.signal_length
    zero = model._apply(np.zeros(n))
    A = np.stack([model._apply(e) - zero for e in np.eye(n)], axis=1)
    return A, zero


def objective(A, g, x, alpha, p, J):
    r = A @ x - g
    return 0.5 * float(np.mean(r * r)) + alpha * penalty_value(x, J, p)


def coordinate_descent(A, g, alpha, p, system, sweeps=20000, tol=1e-15):
    """Exact block coordinate minimization of 0.5 mean((Ax - g)^2) + alpha sum_j w_j ||x_j||_p."""
    n = A.shape[1]
    J = system.levels
    Q = A.T @ A / n
    c = A.T @ g / n
    lev = system.level_of_index()
    blocks = [np.flatnonzero(lev == j) for j in range(J + 1)]
    w = 2.0 ** (np.arange(J + 1) * (0.5 - 1 / p))
    x = np.zeros(n)
    prev = math.inf
    for _ in range(sweeps):
        for j, B in enumerate(blocks):
            thr = alpha * w[j]
            if p == 1:
                for i in B:
                    b = c[i] - Q[i] @ x + Q[i, i] * x[i]
                    x[i] = np.sign(b) * max(abs(b) - thr, 0.0) / Q[i, i]
                continue
            others = np.setdiff1d(np.arange(n), B)
            b = c[B] - Q[np.ix_(B, others)] @ x[others]
            if np.linalg.norm(b) <= thr:
                x[B] = 0.0
                continue
            lam, V = np.linalg.eigh(Q[np.ix_(B, B)])
            bt = V.T @ b

            def gap(r):
                return np.linalg.norm(bt / (lam + thr / r)) - r

            r = brentq(gap, 1e-100, np.linalg.norm(b) / lam.min() + 1.0, xtol=1e-300, rtol=1e-15)
            x[B] = V @ (bt / (lam + thr / r))
        val = objective(A, g, x, alpha, p, J)
        if prev - val <= tol * max(1.0, abs(val)):
            break
        prev = val
    return x


@pytest.mark.parametrize("p", [1.0, 2.0])
@pytest.mark.parametrize("alpha", [1e-4, 1e-3, 1e-2, 1e-1])
def test_matches_coordinate_descent_n8(p, alpha):
    system = WaveletSystem("db2", 3)
    model = conv_model(1.0, system)
    rng = np.random.default_rng(3)
    g = model._apply(rng.standard_normal(8)) + 0.05 * rng.standard_normal(8)
    A, _ = dense_problem(model)
    x_ref = coordinate_descent(A, g, alpha, p, system)
    res = solve_tikhonov(model, g, SolveConfig(alpha=alpha, p=p, tolerance=1e-10, max_iterations=100000))
    assert res.converged
    ref_val = objective(A, g, x_ref, alpha, p, 3)
    assert abs(res.objective - ref_val) <= 1e-6 * max(1.0, abs(ref_val))
    assert res.objective <= ref_val + 1e-12


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0])
@pytest.mark.parametrize("precondition", [False, True])
def test_optimality_certificate(p, precondition):
    system = WaveletSystem("meyer", 8)
    model = conv_model(1.0, system)
    f = make_extremal(BallSpec(BesovIndex(1, p, math.inf), 1.0), system, seed=0)
    rng = np.random.default_rng(1)
    g = model._apply(f.data) + 0.01 * rng.standard_normal(256)
    alpha = 1e-3
    res = solve_tikhonov(model, g, SolveConfig(alpha=alpha, p=p, tolerance=1e-9, precondition=precondition))
    assert res.converged
    grad = res.gradient.data
    q = dual_exponent(p)
    for j in range(9):
        x_j = res.minimizer.block(j)
        g_j = grad[slice(0, 1) if j == 0 else slice(2 ** (j - 1), 2**j)]
        w = 2.0 ** (j * (0.5 - 1 / p))
        dual = np.max(np.abs(g_j)) if q == math.inf else np.sum(np.abs(g_j) ** q) ** (1 / q)
        assert dual <= alpha * w * (1 + 1e-4) + 1e-8
        if np.any(x_j):
            # -grad_j must be aligned with x_j: <-grad_j, x_j> = alpha w ||x_j||_p
            nx = np.sum(np.abs(x_j) ** p) ** (1 / p)
            assert -np.dot(g_j, x_j) == pytest.approx(alpha * w * nx, rel=1e-4, abs=1e-9)
    assert res.zero_levels == [not np.any(b) for b in res.minimizer.blocks()]


def test_large_alpha_gives_zero():
    system = WaveletSystem("db4", 6)
    model = conv_model(1.0, system)
    rng = np.random.default_rng(0)
    g = rng.standard_normal(64)
    res = solve_tikhonov(model, g, SolveConfig(alpha=1e3, p=1.5))
    assert not np.any(res.minimizer.data)
    assert res.data_residual == pytest.approx(np.sqrt(np.mean(g**2)))
    assert all(res.zero_levels)


def test_stat_functional_same_minimizer():
    system = WaveletSystem("db4", 7)
    model = conv_model(1.0, system)
    rng = np.random.default_rng(2)
    g = model._apply(rng.standard_normal(128) * 0.1) + 0.02 * rng.standard_normal(128)
    cfg = SolveConfig(alpha=1e-3, p=2, tolerance=1e-11)
    a, b = solve_tikhonov(model, g, cfg), solve_tikhonov_stat(model, g, cfg)
    np.testing.assert_allclose(a.minimizer.data, b.minimizer.data, atol=1e-8)
    assert a.objective - b.objective == pytest.approx(0.5 * np.mean(g * g), rel=1e-8)


def test_stat_gradient_finite_differences():
    system = WaveletSystem("db4", 6)
    model = conv_model(1.0, system)
    rng = np.random.default_rng(4)
    g = rng.standard_normal(64)
    res = solve_tikhonov_stat(model, g, SolveConfig(alpha=1e-2, p=2, max_iterations=5))
    x = res.minimizer.data

    def smooth(v):
        Fv = model._apply(v)
        return 0.5 * np.mean(Fv * Fv) - np.mean(g * Fv)

    h = rng.standard_normal(64)
    eps = 1e-5
    fd = (smooth(x + eps * h) - smooth(x - eps * h)) / (2 * eps)
    assert fd == pytest.approx(float(res.gradient.data @ h), rel=1e-6)


def test_nonlinear_gradient_finite_differences():
    system = WaveletSystem("db4", 6)
    model = hammerstein_model(system=system)
    rng = np.random.default_rng(5)
    g = rng.standard_normal(64) * 0.1
    res = solve_tikhonov(model, g, SolveConfig(alpha=1e-2, p=1, max_iterations=3))
    x = res.minimizer.data

    def smooth(v):
        r = model._apply(v) - g
        return 0.5 * np.mean(r * r)

    h = rng.standard_normal(64)
    eps = 1e-6
    fd = (smooth(x + eps * h) - smooth(x - eps * h)) / (2 * eps)
    assert fd == pytest.approx(float(res.gradient.data @ h), rel=1e-6)


@pytest.mark.parametrize("restart", [True, False])
def test_objective_trace_monotone(restart):
    system = WaveletSystem("meyer", 8)
    model = conv_model(1.0, system)
    f = make_extremal(BallSpec(BesovIndex(1, 1, math.inf), 1.0), system, seed=3)
    g = model._apply(f.data)
    res = solve_tikhonov(model, g, SolveConfig(alpha=1e-4, p=1, tolerance=1e-9, restart=restart, max_iterations=50000))
    tr = res.objective_trace
    if restart:
        assert np.all(np.diff(tr) <= 1e-13 * np.abs(tr[:-1]) + 1e-15)
    assert tr[-1] <= tr[0]


def test_nonlinear_solve_converges_and_is_monotone():
    system = WaveletSystem("db4", 7)
    model = hammerstein_model(system=system)
    f = make_extremal(BallSpec(BesovIndex(1, 2, math.inf), 0.5), system, seed=1)
    g = model._apply(f.data) + 1e-3 * np.random.default_rng(0).standard_normal(128)
    res = solve_tikhonov(model, g, SolveConfig(alpha=1e-4, p=2, tolerance=1e-8, max_iterations=200000))
    assert res.converged
    assert np.all(np.diff(res.objective_trace) <= 1e-14)


def test_exact_data_error_trend():
    system = WaveletSystem("meyer", 8)
    model = conv_model(1.0, system)
    f = make_extremal(BallSpec(BesovIndex(1, 2, math.inf), 1.0), system, seed=0)
    g = model._apply(f.data)
    errs = []
    init = None
    for alpha in np.logspace(-1, -5, 5):
        res = solve_tikhonov(model, g, SolveConfig(alpha=alpha, p=2, tolerance=1e-3 * alpha), init=init)
        init = res.minimizer
        errs.append(besov_norm(res.minimizer - f, BesovIndex(0, 2, 1)))
    assert np.all(np.diff(errs) < 0)


def test_deterministic_and_warm_start_invariance():
    system = WaveletSystem("db3", 5)
    model = conv_model(1.0, system)
    rng = np.random.default_rng(8)
    g = rng.standard_normal(32) * 0.1
    cfg = SolveConfig(alpha=1e-2, p=1.5, tolerance=1e-9)
    a, b = solve_tikhonov(model, g, cfg), solve_tikhonov(model, g, cfg)
    np.testing.assert_array_equal(a.minimizer.data, b.minimizer.data)
    c = solve_tikhonov(model, g, cfg, init=CoeffField(rng.standard_normal(32), system))
    assert c.converged
    assert c.objective == pytest.approx(a.objective, rel=1e-7)


def test_fixed_step_rule_errors():
    system = WaveletSystem("db2", 6)
    model = conv_model(1.0, system)
    g = np.random.default_rng(0).standard_normal(64)
    with pytest.raises(StepRuleError):
        solve_tikhonov(model, g, SolveConfig(alpha=1e-3, step_rule="fixed", initial_step=100.0))
    ok = solve_tikhonov(model, g, SolveConfig(alpha=1e-3, step_rule="backtracking", initial_step=100.0, tolerance=1e-9))
    assert ok.converged


def test_config_validation():
    with pytest.raises(ParameterError):
        SolveConfig(alpha=0.0)
    with pytest.raises(ParameterError):
        SolveConfig(alpha=1.0, p=3)
    with pytest.raises(ParameterError):
        SolveConfig(alpha=1.0, tolerance=0)
    with pytest.raises(ConfigurationError):
        SolveConfig(alpha=1.0, step_rule="armijo")
    system = WaveletSystem("db2", 4)
    with pytest.raises(ConfigurationError):
        solve_tikhonov(conv_model(1.0, system), np.zeros(8), SolveConfig(alpha=1.0))


def test_alpha_rules():
    assert choose_alpha_deterministic(0.01, 1, 1) == pytest.approx(1e-3)
    assert choose_alpha_deterministic(1.0, 2, 1) == 1.0
    assert choose_alpha_statistical(1.0, 1.0, 1, 1, 1) == 1.0
    eps, rho = 1e-3, 2.0
    assert choose_alpha_statistical(eps, rho, 1, 1, 1) == pytest.approx(eps ** 1.2 * rho ** -0.2)
    with pytest.raises(ParameterError):
        choose_alpha_statistical(0.1, 1.0, 1, 1, 2)


@pytest.mark.parametrize("s,a", [(1, 1), (3, 1), (0.5, 2)])
def test_deterministic_rule_matches_subgradient_rule(s, a):
    ratios = [subgradient_alpha(d, s, a) / choose_alpha_deterministic(d, s, a) for d in np.logspace(-5, -1, 6)]
    np.testing.assert_allclose(ratios, ratios[0], rtol=1e-10)


def test_statistical_rule_balances_bound_terms():
    # the two terms alpha^{(d+2a)/(d-2a)} eps^{4a/(2a-d)} and alpha^{s/(s+2a)} rho^{2a/(s+2a)}
    s, a, d, rho = 1.0, 1.0, 1.0, 1.0
    exps = []
    for term in (0, 1):
        vals = []
        for eps in (1e-4, 1e-2):
            al = choose_alpha_statistical(eps, rho, s, a, d)
            if term == 0:
                vals.append(al ** ((d + 2 * a) / (d - 2 * a)) * eps ** (4 * a / (2 * a - d)))
            else:
                vals.append(al ** (s / (s + 2 * a)) * rho ** (2 * a / (s + 2 * a)))
        exps.append(math.log(vals[1] / vals[0]) / math.log(100.0))
    assert exps[0] == pytest.approx(0.4)
    assert exps[1] == pytest.approx(0.4)
