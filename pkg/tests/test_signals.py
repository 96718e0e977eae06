import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from optexec.signals import (OuSignal, SignalPath, conditional_mean, integrated_conditional_mean,
                             simulate_path, simulate_paths)

gammas = st.floats(0.01, 5.0)
iotas = st.floats(-2.0, 2.0)
times = st.floats(0.0, 20.0)


def test_validation():
    with pytest.raises(ValueError):
        OuSignal(0.0)
    with pytest.raises(ValueError):
        OuSignal(1.0, sigma=-0.1)
    with pytest.raises(ValueError):
        conditional_mean(OuSignal(1.0, iota=1.0), -1e-9)
    with pytest.raises(ValueError):
        integrated_conditional_mean(OuSignal(1.0, iota=1.0), -1.0)


def test_conditional_mean_examples():
    assert conditional_mean(OuSignal(0.9, iota=0.5), 0.0) == 0.5
    assert conditional_mean(OuSignal(0.3, iota=0.0), 7.0) == 0.0
    assert conditional_mean(OuSignal(0.9, iota=-0.5), 1.0) == pytest.approx(-0.5 * math.exp(-0.9), abs=1e-15)


def test_conditional_mean_matches_simulation():
    sig = OuSignal(0.9, 0.3, -0.5)
    x = simulate_path(sig, [0.0, 0.5, 1.0], seed=11, n_paths=100_000)[:, -1]
    se = x.std(ddof=1) / math.sqrt(x.size)
    assert abs(x.mean() - (-0.5 * math.exp(-0.9))) < 3 * se


def test_integrated_mean_examples():
    assert integrated_conditional_mean(OuSignal(0.4, iota=1.3), 0.0) == 0.0
    assert abs(integrated_conditional_mean(OuSignal(0.9, iota=0.5), 100.0) - 0.5 / 0.9) < 1e-12
    sig = OuSignal(0.9, iota=-0.5)
    ref, _ = quad(lambda s: conditional_mean(sig, s), 0, 10, epsabs=1e-13)
    assert abs(integrated_conditional_mean(sig, 10.0) - ref) < 1e-10


@given(gammas, iotas, times, times)
def test_semigroup(g, iota, t, s):
    sig = OuSignal(g, 0.2, iota)
    a = conditional_mean(sig, t + s)
    b = conditional_mean(sig.restarted(conditional_mean(sig, t)), s)
    assert abs(a - b) <= 1e-14 * max(1.0, abs(iota))


@given(st.floats(0.01, 2.0), iotas.filter(lambda v: abs(v) > 1e-3), st.floats(0.01, 5.0))
def test_integrated_mean_derivative(g, iota, t):
    sig = OuSignal(g, 0.0, iota)
    h = 1e-5
    fd = (integrated_conditional_mean(sig, t + h) - integrated_conditional_mean(sig, t - h)) / (2 * h)
    exact = conditional_mean(sig, t)
    assert abs(fd - exact) <= 1e-6 * abs(exact)


def test_zero_sigma_path_is_exact_decay():
    sig = OuSignal(0.7, 0.0, 1.3)
    grid = np.linspace(0, 10, 10_001)
    path = simulate_path(sig, grid, seed=1)
    assert isinstance(path, SignalPath)
    assert path.values[0] == 1.3 and path.times[0] == 0.0
    assert np.max(np.abs(path.values - conditional_mean(sig, grid))) < 1e-14


def test_seed_determinism():
    sig = OuSignal(0.1, 0.1, 0.2)
    grid = np.linspace(0, 5, 101)
    a = simulate_path(sig, grid, seed=42).values
    b = simulate_path(sig, grid, seed=42).values
    c = simulate_path(sig, grid, seed=43).values
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_variance_at_horizon():
    g, s = 0.1, 0.1
    sig = OuSignal(g, s, 0.0)
    x = simulate_path(sig, np.linspace(0, 10, 11), seed=3, n_paths=100_000)[:, -1]
    target = s * s * -math.expm1(-2 * g * 10) / (2 * g)
    v = x.var(ddof=1)
    se = math.sqrt(2 / (x.size - 1)) * target  # Gaussian sample-variance SE
    assert abs(v - target) < 3 * se


def test_exact_transition_is_grid_free():
    # one coarse step and many fine steps give the same law at the end point
    sig = OuSignal(0.5, 0.4, 1.0)
    coarse = simulate_path(sig, [0.0, 3.0], seed=5, n_paths=50_000)[:, -1]
    fine = simulate_path(sig, np.linspace(0, 3, 301), seed=6, n_paths=50_000)[:, -1]
    target = sig.conditional_variance(3.0)
    for x in (coarse, fine):
        assert abs(x.mean() - conditional_mean(sig, 3.0)) < 4 * math.sqrt(target / x.size)
        assert abs(x.var() / target - 1) < 4 * math.sqrt(2 / x.size)


@pytest.mark.parametrize("grid", [[0.0, 1.0, 1.0], [0.0, 2.0, 1.0], [0.5, 1.0], [0.0]])
def test_rejects_bad_grid(grid):
    with pytest.raises(ValueError):
        simulate_path(OuSignal(1.0, 0.1), grid, seed=0)


def test_spawned_paths_are_prefix_stable():
    sig = OuSignal(0.2, 0.3, 0.0)
    grid = np.linspace(0, 1, 21)
    seeds = np.random.SeedSequence(9).spawn(8)
    a = simulate_paths(sig, grid, seeds[:5])
    b = simulate_paths(sig, grid, seeds)
    assert np.array_equal(a, b[:5])
