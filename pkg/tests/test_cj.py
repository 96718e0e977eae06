import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from conftest import instant_problem
from optexec import cj
from optexec.cj import (CjProblem, coefficients, deterministic_trajectory, fuel_limit_rate,
                        integrate_inventory, optimal_rate, v0_at, v1_at, v2_at, value_surface)
from optexec.gss import GssProblem, asymptotic_strategy
from optexec.kernels import ExpKernel
from optexec.signals import OuSignal


def stencil5(f, t, h=1e-5):
    return (-f(t + 2 * h) + 8 * f(t + h) - 8 * f(t - h) + f(t - 2 * h)) / (12 * h)


def riccati_residual(p, n=1001):
    co = coefficients(p)
    t = np.linspace(0, p.T, n)
    return np.max(np.abs(stencil5(co.v2, t) + co.v2(t) ** 2 / p.kappa - p.phi))


def random_problem(rng):
    while True:
        kappa, phi, varrho = rng.uniform(0.1, 2), rng.uniform(0.01, 1), rng.uniform(0, 20)
        if abs(varrho - math.sqrt(kappa * phi)) > 1e-3:
            return CjProblem(kappa, phi, varrho, 10.0, OuSignal(0.1, 0.1))


# ---------------------------------------------------------------- v2

def test_v2_examples():
    p = instant_problem()
    assert v2_at(p, 10.0) == -10.0
    z = instant_problem(phi=0.0, varrho=0.0)
    assert np.all(v2_at(z, np.linspace(0, 10, 11)) == 0.0)
    h = 1e-5
    d = (v2_at(p, 5 + h) - v2_at(p, 5 - h)) / (2 * h)
    assert abs(d + v2_at(p, 5.0) ** 2 / 0.5 - 0.1) < 1e-6


def test_v2_validation():
    p = instant_problem()
    for t in (-0.1, 10.1):
        with pytest.raises(ValueError):
            v2_at(p, t)
    with pytest.raises(ValueError):
        instant_problem(varrho=math.sqrt(0.5 * 0.1))
    for kw in ({"kappa": 0.0}, {"phi": -1.0}, {"varrho": -1.0}, {"T": 0.0}):
        with pytest.raises(ValueError):
            instant_problem(**kw)


def test_riccati_random_draws():
    rng = np.random.default_rng(8)
    for _ in range(100):
        p = random_problem(rng)
        assert riccati_residual(p) < 1e-6
        assert abs(v2_at(p, p.T) + p.varrho) <= 1e-12 * max(1, p.varrho)


@pytest.mark.parametrize("kw", [{"phi": 0.0}, {"phi": 0.0, "varrho": 0.0}, {"varrho": 0.0}])
def test_riccati_special_cases(kw):
    assert riccati_residual(instant_problem(**kw)) < 1e-6


def test_fuel_limit_coefficient():
    p = instant_problem(varrho=math.inf)
    co = coefficients(p)
    beta, s = math.sqrt(0.1 / 0.5), math.sqrt(0.05)
    t = np.linspace(0, 9.9, 50)
    assert np.allclose(co.v2(t), -s / np.tanh(beta * (10 - t)), rtol=1e-13)
    t = np.linspace(0, 9.99, 1000)
    assert np.max(np.abs(stencil5(co.v2, t, 1e-6) + co.v2(t) ** 2 / 0.5 - 0.1)) < 1e-4
    # finite varrho approaches the limit
    big = coefficients(instant_problem(varrho=1e8))
    assert np.allclose(big.v2(t), co.v2(t), rtol=1e-5)


@pytest.mark.parametrize("kw", [{}, {"varrho": 0.0}, {"phi": 0.0}, {"varrho": math.inf},
                                {"phi": 0.0, "varrho": math.inf}])
def test_psi_ratio_matches_integrated_v2(kw):
    p = instant_problem(**kw)
    co = coefficients(p)
    for a, b in [(0.0, 5.0), (2.0, 9.5), (7.0, 7.5)]:
        integral, _ = quad(lambda u: float(co.v2(u)), a, b, epsabs=1e-15, epsrel=1e-13, limit=200)
        assert abs(float(co.ratio(a, b)) - math.exp(integral / p.kappa)) < 1e-12


# ---------------------------------------------------------------- v1, v0

def test_v1_examples():
    p = instant_problem()
    assert v1_at(p, 10.0, 0.7) == 0.0
    assert np.all(v1_at(p, np.linspace(0, 10, 11), 0.0) == 0.0)
    z = instant_problem(phi=0.0, varrho=0.0)
    for g in (0.1, 0.9, 3.0):
        zz = z.replace(signal=OuSignal(g, 0.1))
        t = np.linspace(0, 10, 101)
        assert np.allclose(v1_at(zz, t, 0.4), 0.4 * -np.expm1(-g * (10 - t)) / g, rtol=0, atol=1e-15)


@given(st.floats(-3, 3), st.floats(-5, 5), st.floats(0, 10))
def test_v1_linear_in_signal(iota, c, t):
    p = instant_problem()
    assert abs(v1_at(p, t, c * iota) - c * v1_at(p, t, iota)) <= 1e-12 * max(1, abs(c * iota))


@pytest.mark.parametrize("kw", [{}, {"varrho": 0.0}, {"phi": 0.0}, {"varrho": math.inf},
                                {"phi": 0.0, "varrho": math.inf}, {"phi": 0.0, "varrho": 0.0},
                                {"signal": OuSignal(0.9, 0.1)}, {"signal": OuSignal(0.4472135955, 0.1)}])
def test_v1_analytic_matches_quadrature(kw):
    p = instant_problem(**kw)
    for t in (0.0, 3.3, 9.0, 9.999):
        assert abs(v1_at(p, t, 0.5) - v1_at(p, t, 0.5, method="quad")) < 1e-10
    with pytest.raises(ValueError):
        v1_at(p, 1.0, 0.5, method="simpson")


def test_v0_examples():
    p = instant_problem()
    assert v0_at(p, 10.0, 0.5) == 0.0
    assert v0_at(instant_problem(signal=OuSignal(0.1, 0.0)), 0.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        v0_at(p, 11.0, 0.0)


def test_v0_matches_monte_carlo():
    p = instant_problem(signal=OuSignal(0.1, 0.1, 0.5))
    q = v0_at(p, 0.0, 0.5)
    assert q == pytest.approx(1.6557577672044, abs=1e-9)  # frozen from the check below
    co = coefficients(p)
    rng = np.random.default_rng(2718)
    n = 10**6
    s = rng.uniform(0, 10, n)
    I = p.signal.conditional_mean(s) + np.sqrt(p.signal.conditional_variance(s)) * rng.standard_normal(n)
    est = 10 / (4 * 0.5) * co.factor(s, 0.1) ** 2 * I**2
    assert abs(est.mean() - q) < 3 * est.std(ddof=1) / math.sqrt(n)


# ---------------------------------------------------------------- rates

def test_rate_examples():
    z = instant_problem(phi=0.0, varrho=0.0, signal=OuSignal(0.3, 0.1))
    assert optimal_rate(z, 2.0, 10.0, 0.0) == 0.0
    t = np.linspace(0, 10, 1001)
    for iota in (-0.8, 0.25):
        want = -iota * -np.expm1(-0.3 * (10 - t)) / (2 * 0.5 * 0.3)
        assert np.max(np.abs(optimal_rate(z, t, 3.0, iota) - want)) < 1e-12


def test_deterministic_liquidation_leaks_through_penalty():
    p = instant_problem(signal=OuSignal(0.1, 0.0, 0.0))
    co = coefficients(p)
    t, X, r = deterministic_trajectory(p, 10_000)
    # with no signal the inventory is x0 psi(t)/psi(0)
    assert np.max(np.abs(X - 10 * co.ratio(0.0, t))) < 1e-10
    assert 0 < X[-1] < 1e-2
    assert r[0] == pytest.approx(-v2_at(p, 0.0) * 10 / 0.5, rel=1e-14)


def test_integrator_matches_plain_rk4():
    p = instant_problem(signal=OuSignal(0.1, 0.0, 0.6))
    n = 2000
    t, X, _ = deterministic_trajectory(p, n)
    f = lambda s, x: -optimal_rate(p, s, x, p.signal.conditional_mean(s))
    h, x = p.T / n, 10.0
    for i in range(n):
        s = i * h
        k1 = f(s, x)
        k2 = f(s + h / 2, x + h / 2 * k1)
        k3 = f(s + h / 2, x + h / 2 * k2)
        k4 = f(min(s + h, p.T), x + h * k3)
        x += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    assert abs(x - X[-1]) < 1e-9


def test_halved_step_reproduces_trajectory():
    p = instant_problem(signal=OuSignal(0.1, 0.0, 0.6))
    errs = []
    t, ref, _ = deterministic_trajectory(p, 8000)
    for n in (500, 1000, 2000):
        _, X, _ = deterministic_trajectory(p, n)
        errs.append(np.max(np.abs(X - ref[:: 8000 // n])))
    assert errs[2] < 1e-9
    assert errs[0] / errs[1] > 8  # fourth order: ratio near 16


def test_stochastic_paths_converge_under_refinement():
    # a rough signal limits pathwise accuracy to first order in the step
    p = instant_problem()
    from optexec.signals import simulate_path
    N = 16_000
    I = simulate_path(p.signal, np.linspace(0, 10, 2 * N + 1), seed=4, n_paths=20)
    _, ref, _ = integrate_inventory(p, N, I)
    errs = []
    for n in (2000, 4000, 8000):
        k = N // n
        _, X, _ = integrate_inventory(p, n, I[:, ::k])
        errs.append(np.max(np.abs(X - ref[:, ::k])))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 2e-4


def test_fuel_limit_examples():
    p = instant_problem(signal=OuSignal(0.1, 0.1, 0.0))
    with pytest.raises(ValueError):
        fuel_limit_rate(p, 10.0, 1.0, 0.0)
    n = 100_000  # step 1e-4 so that T - 1e-4 is a grid point
    t, X, _ = deterministic_trajectory(p, n, fuel=True)
    assert t[-2] == pytest.approx(10 - 1e-4)
    assert abs(X[-2]) < 1e-2 and X[-1] == 0.0
    # vanishing urgency: straight-line liquidation
    tiny = instant_problem(phi=1e-10, signal=OuSignal(0.1, 0.0, 0.0))
    t, X, _ = deterministic_trajectory(tiny, 2000, fuel=True)
    assert np.max(np.abs(X - 10 * (1 - t / 10))) < 1e-6
    # a very large finite penalty tracks the fuel limit
    for iota in (0.0, 0.3):
        a = instant_problem(varrho=1e6, signal=OuSignal(0.1, 0.0, iota))
        _, Xa, _ = deterministic_trajectory(a, 10_000)
        _, Xb, _ = deterministic_trajectory(a, 10_000, fuel=True)
        k = int(0.99 * 10_000) + 1
        assert np.max(np.abs(Xa[:k] - Xb[:k])) < 1e-3 * 10


def test_fuel_rate_is_limit_of_rates():
    p = instant_problem()
    a = fuel_limit_rate(p, 3.0, 4.0, 0.2)
    b = optimal_rate(p.replace(varrho=1e9), 3.0, 4.0, 0.2)
    assert a == pytest.approx(b, rel=1e-7)


# ---------------------------------------------------------------- special cases

def test_no_penalty_path_is_signal_displacement():
    iota, g, k = 0.5, 0.9, 0.1
    p = CjProblem(k, 0.0, 0.0, 10.0, OuSignal(g, 0.0, iota), x0=10.0)
    t, X, _ = deterministic_trajectory(p, 10_000)
    J = iota / (2 * k * g * g) * -np.expm1(-g * t) - iota * t * math.exp(-g * 10) / (2 * k * g)
    assert np.max(np.abs(X - (10 + J))) < 1e-10
    # the transient-impact rho -> inf limit is this path plus the constant-rate
    # sale of what is left at T
    gp = GssProblem(10.0, 10.0, OuSignal(g, 0.0, iota), ExpKernel(k, 1.0))
    corrected = X - t / 10 * X[-1]
    assert np.max(np.abs(corrected - asymptotic_strategy(gp, t))) < 1e-10


# ---------------------------------------------------------------- value surface

def test_value_surface_examples():
    p = instant_problem(signal=OuSignal(0.1, 0.0))
    assert value_surface(p, 0.0, 0.0, 0.0) == 0.0
    q = instant_problem()
    whole = value_surface(q, 0.0, 0.5, 1.0)
    parts = v0_at(q, 0.0, 0.5) + v1_at(q, 0.0, 0.5) + v2_at(q, 0.0)
    assert whole == pytest.approx(parts, abs=1e-13)


def test_value_surface_signal_derivative():
    p = instant_problem()
    co = coefficients(p)
    a, _ = co.v0_parts(0.0, p.signal)
    h = float(co.factor(0.0, 0.1))
    for iota, x in [(-0.4, 1.0), (0.1, 5.0), (0.3, 0.5)]:
        d = (value_surface(p, 0.0, iota + 1e-6, x) - value_surface(p, 0.0, iota - 1e-6, x)) / 2e-6
        assert d == pytest.approx(2 * iota * a + x * h, rel=1e-7)


def test_value_surface_increases_with_signal_for_large_positions():
    p = instant_problem()
    co = coefficients(p)
    a, _ = co.v0_parts(0.0, p.signal)
    h = float(co.factor(0.0, 0.1))
    iotas = np.linspace(-0.5, 0.5, 41)
    x_min = 2 * 0.5 * a / h  # below this the signal-trading term can dominate
    xs = np.linspace(x_min * 1.01, 10, 41)
    V = np.asarray(value_surface(p, 0.0, iotas[:, None], xs[None, :]))
    assert np.all(np.diff(V, axis=0) > 0)


def test_integrate_inventory_shape_check():
    p = instant_problem()
    with pytest.raises(ValueError):
        integrate_inventory(p, 10, np.zeros(20))
