"""Markovian price signals: the Ornstein-Uhlenbeck predictor and its moments."""

from __future__ import annotations

import abc
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MarkovSignal",
    "OuSignal",
    "SignalPath",
    "conditional_mean",
    "integrated_conditional_mean",
    "simulate_path",
    "simulate_paths",
    "RNG_NAME",
]

RNG_NAME = "numpy.random.PCG64 via SeedSequence"


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be non-negative")
    return t


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


class MarkovSignal(abc.ABC):
    """Interface used by the execution solvers.

    Only conditional first moments are needed by the transient-impact solver
    and by the drift part of the instantaneous-impact value function.
    """

    iota: float

    @abc.abstractmethod
    def conditional_mean(self, t):
        """E[I_t | I_0 = iota]."""

    @abc.abstractmethod
    def integrated_conditional_mean(self, t):
        """int_0^t E[I_s | I_0 = iota] ds."""

    @abc.abstractmethod
    def restarted(self, iota: float) -> "MarkovSignal":
        """Same dynamics, new initial value."""


@dataclass(frozen=True)
class OuSignal(MarkovSignal):
    """Ornstein-Uhlenbeck signal ``dI = -gamma I dt + sigma dW``, ``I_0 = iota``.

    Parameters
    ----------
    gamma : float
        Mean-reversion rate (1/time), strictly positive.
    sigma : float
        Innovation volatility, non-negative.
    iota : float
        Initial value of the signal.
    """

    gamma: float
    sigma: float = 0.0
    iota: float = 0.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")

    def restarted(self, iota: float) -> "OuSignal":
        return OuSignal(self.gamma, self.sigma, float(iota))

    def conditional_mean(self, t):
        t = _check_time(t)
        return _scalar_or_array(self.iota * np.exp(-self.gamma * t))

    def integrated_conditional_mean(self, t):
        t = _check_time(t)
        # -expm1 keeps full precision for small gamma*t
        return _scalar_or_array(self.iota / self.gamma * -np.expm1(-self.gamma * t))

    def conditional_variance(self, t):
        """Var[I_t | I_0] = sigma^2 (1 - e^{-2 gamma t}) / (2 gamma)."""
        t = _check_time(t)
        g = self.gamma
        return _scalar_or_array(self.sigma**2 * -np.expm1(-2.0 * g * t) / (2.0 * g))

    def conditional_second_moment(self, t):
        t = _check_time(t)
        m = self.iota * np.exp(-self.gamma * t)
        return _scalar_or_array(m * m + np.asarray(self.conditional_variance(t)))

    def stationary_std(self) -> float:
        return self.sigma / np.sqrt(2.0 * self.gamma)


def conditional_mean(sig: MarkovSignal, t):
    return sig.conditional_mean(t)


def integrated_conditional_mean(sig: MarkovSignal, t):
    return sig.integrated_conditional_mean(t)


@dataclass(frozen=True)
class SignalPath:
    times: np.ndarray
    values: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        if len(self.times) != len(self.values) or len(self.times) < 2:
            raise ValueError("times and values must have equal length >= 2")


def _validate_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("grid must be one-dimensional with at least two points")
    if grid[0] != 0.0:
        raise ValueError("grid must start at 0")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    return grid


def _transition(sig: OuSignal, grid):
    dt = np.diff(grid)
    decay = np.exp(-sig.gamma * dt)
    scale = sig.sigma * np.sqrt(-np.expm1(-2.0 * sig.gamma * dt) / (2.0 * sig.gamma))
    return decay, scale


def _propagate(sig: OuSignal, grid, normals) -> np.ndarray:
    """Run the exact recursion from ``iota`` given standard normals per step."""
    n_paths = normals.shape[0]
    out = np.empty((n_paths, grid.size))
    if sig.sigma == 0:
        # no recursion: repeated products would drift from exp(-gamma t) by O(n eps)
        out[:] = sig.iota * np.exp(-sig.gamma * grid)
        return out
    decay, scale = _transition(sig, grid)
    noise = normals * scale
    out[:, 0] = sig.iota
    for j in range(decay.size):
        out[:, j + 1] = out[:, j] * decay[j] + noise[:, j]
    return out


def simulate_path(sig: OuSignal, grid, seed=None, *, rng: np.random.Generator | None = None,
                  n_paths: int | None = None):
    """Sample the OU signal exactly on ``grid``.

    Uses the Gaussian transition ``I_{t+d} = I_t e^{-gamma d} + s(d) xi`` with
    ``s(d)^2 = sigma^2 (1 - e^{-2 gamma d}) / (2 gamma)``, so there is no
    discretisation bias whatever the spacing.

    With ``n_paths`` given, returns an array of shape ``(n_paths, len(grid))``
    instead of a :class:`SignalPath`.
    """
    grid = _validate_grid(grid)
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(seed))
    shape = (1 if n_paths is None else n_paths, grid.size - 1)
    normals = rng.standard_normal(shape) if sig.sigma > 0 else np.zeros(shape)
    out = _propagate(sig, grid, normals)
    if n_paths is None:
        return SignalPath(grid, out[0], seed)
    return out


def simulate_paths(sig: OuSignal, grid, seeds) -> np.ndarray:
    """One exact path per entry of ``seeds`` (ints or ``SeedSequence``s).

    Path ``i`` depends on ``seeds[i]`` only, so adding seeds never changes
    the paths already drawn.
    """
    grid = _validate_grid(grid)
    normals = np.zeros((len(seeds), grid.size - 1))
    if sig.sigma > 0:
        for i, sd in enumerate(seeds):
            normals[i] = np.random.Generator(np.random.PCG64(sd)).standard_normal(grid.size - 1)
    return _propagate(sig, grid, normals)
