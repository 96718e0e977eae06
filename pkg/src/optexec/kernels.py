"""Transient market-impact kernels and positive-definiteness diagnostics."""

from __future__ import annotations

import abc
from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "DecayKernel",
    "ExpKernel",
    "PowerLawKernel",
    "InstantKernel",
    "gram_matrix",
    "is_positive_definite",
]


def _validate_grid(grid) -> np.ndarray:
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.ndim != 1 or grid.size < 1:
        raise ValueError("grid must be a non-empty 1-d array")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    return grid


class DecayKernel(abc.ABC):
    """Bounded decay kernel G on [0, inf). Subclasses implement ``_eval``."""

    @abc.abstractmethod
    def _eval(self, t: np.ndarray) -> np.ndarray: ...

    def eval(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValueError("kernel argument must be non-negative")
        out = self._eval(t)
        return float(out) if out.ndim == 0 else out

    __call__ = eval

    def gram_matrix(self, grid) -> np.ndarray:
        grid = _validate_grid(grid)
        lag = np.abs(grid[:, None] - grid[None, :])
        m = self._eval(lag)
        # exact symmetry regardless of how _eval rounds
        return np.triu(m) + np.triu(m, 1).T


@dataclass(frozen=True)
class ExpKernel(DecayKernel):
    """``G(t) = kappa * rho * exp(-rho t)``."""

    kappa: float
    rho: float

    def __post_init__(self):
        if not (self.kappa > 0 and self.rho > 0):
            raise ValueError("kappa and rho must be positive")

    @property
    def g0(self) -> float:
        return self.kappa * self.rho

    def _eval(self, t):
        return self.kappa * self.rho * np.exp(-self.rho * t)


@dataclass(frozen=True)
class PowerLawKernel(DecayKernel):
    """``G(t) = kappa / (1 + t/ell)^alpha``: bounded, decreasing and convex.

    No closed-form execution strategy exists for it; it is here so the QP
    oracle can be exercised on a non-exponential member of the admissible class.
    """

    kappa: float
    ell: float = 1.0
    alpha: float = 0.5

    def __post_init__(self):
        if not (self.kappa > 0 and self.ell > 0 and self.alpha > 0):
            raise ValueError("kappa, ell and alpha must be positive")

    @property
    def g0(self) -> float:
        return self.kappa

    def _eval(self, t):
        return self.kappa * (1.0 + t / self.ell) ** (-self.alpha)


@dataclass(frozen=True)
class InstantKernel:
    """Instantaneous impact ``G(dt) = kappa delta_0(dt)``.

    Deliberately not a :class:`DecayKernel`: it has no pointwise values and
    must not be handed to the transient-impact solver or the QP oracle.
    """

    kappa: float

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")


def gram_matrix(k: DecayKernel, grid) -> np.ndarray:
    """Matrix ``M[i, j] = G(|t_i - t_j|)`` on a strictly increasing grid."""
    return k.gram_matrix(grid)


def is_positive_definite(M, tol: float = 1e-10) -> bool:
    """Cholesky test with pivots required to exceed ``tol * max(diag(M))``.

    Raises
    ------
    ValueError
        If ``M`` is not square or not symmetric within ``tol`` (relative).
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    scale = np.max(np.abs(M)) if M.size else 0.0
    if np.max(np.abs(M - M.T), initial=0.0) > tol * max(scale, 1.0):
        raise ValueError("matrix is not symmetric")
    dmax = np.max(np.diag(M), initial=0.0)
    if dmax <= 0:
        return False
    try:
        L = scipy.linalg.cholesky(M, lower=True)
    except np.linalg.LinAlgError:
        return False
    pivots = np.diag(L) ** 2
    return bool(np.all(pivots > tol * dmax))
