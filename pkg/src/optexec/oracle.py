"""Discretised transient-impact problem solved exactly through its KKT system.

A grid strategy trades ``xi_i`` shares at each node ``t_i`` of
``0 = t_0 < ... < t_N = T``. Its expected cost is an exact quadratic in
``xi``:

    1/2 xi' G xi + k' xi + phi * sum_j dt_j Y_j^2,

with ``G[i, j] = G(|t_i - t_j|)``, ``k_i = int_0^{t_i} E[I_s] ds`` and
``Y_j = x0 + sum_{i<=j} xi_i`` the inventory held on ``(t_j, t_{j+1}]``.
Minimising under ``sum xi = -x0`` is an equality-constrained QP whose
multiplier is the discrete counterpart of the constant in the continuous
first-order condition.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .gss import GssProblem, cost, inventory_at, solve_closed_form
from .kernels import is_positive_definite

__all__ = [
    "GridStrategy",
    "KktSystem",
    "NotPositiveDefiniteError",
    "uniform_grid",
    "build_qp",
    "solve_qp",
    "grid_cost",
    "ConvergenceRow",
    "convergence_study",
    "compare_to_closed_form",
    "empirical_orders",
    "kkt_stationarity",
    "write_convergence_csv",
]


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """The QP Hessian failed the Cholesky certificate on this grid."""


@dataclass(frozen=True)
class GridStrategy:
    grid: np.ndarray
    increments: np.ndarray
    x0: float

    def __post_init__(self):
        if len(self.grid) != len(self.increments):
            raise ValueError("grid and increments must have the same length")

    @property
    def holdings(self) -> np.ndarray:
        """Post-trade inventory ``Y_j`` at every node (``Y_N`` should be 0)."""
        return self.x0 + np.cumsum(self.increments)

    def fuel_residual(self) -> float:
        return float(np.sum(self.increments) + self.x0)

    def rates(self) -> np.ndarray:
        """Interior increments divided by the local cell width (centred)."""
        dt = np.diff(self.grid)
        width = 0.5 * (dt[:-1] + dt[1:])
        return self.increments[1:-1] / width


@dataclass
class KktSystem:
    """``min 1/2 xi'H xi + k'xi + const`` subject to ``sum(xi) = -x0``."""

    H: np.ndarray
    k: np.ndarray
    grid: np.ndarray
    x0: float
    const: float = 0.0
    phi: float = 0.0
    _chol: tuple | None = field(default=None, repr=False)


def uniform_grid(T: float, N: int) -> np.ndarray:
    return np.linspace(0.0, T, N + 1)


def _holding_operator(grid):
    """Lower-triangular ``L`` (N x N+1) and cell widths with ``Y = x0 + L xi``."""
    n = grid.size
    L = np.tril(np.ones((n - 1, n)))
    return L, np.diff(grid)


def build_qp(p: GssProblem, N: int | None = None, grid=None) -> KktSystem:
    """Assemble the Hessian and linear term on a uniform ``N``-cell grid or on
    an explicit increasing ``grid`` from 0 to ``T``.

    For ``phi > 0`` the linear term also carries ``2 phi x0 (T - t_i)``, the
    cross term of the expanded inventory penalty.
    """
    if grid is None:
        if N is None or N < 2:
            raise ValueError("N must be >= 2")
        grid = uniform_grid(p.T, N)
    else:
        grid = np.asarray(grid, dtype=float)
        if grid[0] != 0 or not np.isclose(grid[-1], p.T) or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must increase strictly from 0 to T")
    H = p.kernel.gram_matrix(grid)
    k = np.asarray(p.signal.integrated_conditional_mean(grid), dtype=float)
    const = 0.0
    if p.phi:
        L, dt = _holding_operator(grid)
        Q = L.T @ (dt[:, None] * L)
        H = H + 2.0 * p.phi * Q
        k = k + 2.0 * p.phi * p.x0 * (L.T @ dt)
        const = p.phi * p.x0 ** 2 * float(np.sum(dt))
    return KktSystem(H, k, grid, float(p.x0), const, p.phi)


def solve_qp(sys: KktSystem, check_tol: float = 1e-10):
    """Solve the KKT system through a Cholesky factorisation of ``H``.

    Returns
    -------
    strategy : GridStrategy
    lam : float
        Multiplier with the sign convention of the continuous first-order
        condition, i.e. ``int_0^t E[I] + int G dX - 2 phi int_0^t X = lam``.

    Raises
    ------
    NotPositiveDefiniteError
        If ``H`` is not certified positive definite.
    """
    if not is_positive_definite(sys.H):
        raise NotPositiveDefiniteError("QP Hessian is not positive definite on this grid")
    cf = scipy.linalg.cho_factor(sys.H, lower=True)
    sys._chol = cf
    ones = np.ones(sys.H.shape[0])
    a = scipy.linalg.cho_solve(cf, ones)
    b = scipy.linalg.cho_solve(cf, sys.k)
    lam_d = (b.sum() - sys.x0) / a.sum()
    xi = lam_d * a - b

    # KKT residual of [H -1; 1' 0][xi; lam] = [-k; -x0]
    r1 = sys.H @ xi - lam_d + sys.k
    r2 = xi.sum() + sys.x0
    rhs = np.sqrt(np.dot(sys.k, sys.k) + sys.x0 ** 2)
    res = np.sqrt(np.dot(r1, r1) + r2 * r2) / max(rhs, 1e-300)
    if res > check_tol:
        raise np.linalg.LinAlgError(f"KKT residual {res:.2e} exceeds {check_tol:.0e}")

    strat = GridStrategy(sys.grid, xi, sys.x0)
    lam = lam_d
    if sys.phi:
        Y = strat.holdings[:-1]
        lam -= 2.0 * sys.phi * float(np.dot(np.diff(sys.grid), Y))
    return strat, float(lam)


def kkt_stationarity(sys: KktSystem, strat: GridStrategy) -> np.ndarray:
    """``H xi + k``: constant across nodes at the optimum."""
    return sys.H @ strat.increments + sys.k


def grid_cost(p: GssProblem, s: GridStrategy) -> float:
    """Exact expected cost of the pure-jump strategy ``s``.

    Assembled directly from the kernel and signal, not from a
    :class:`KktSystem`, so it can audit the QP.
    """
    if abs(s.fuel_residual()) > 1e-8 * max(1.0, abs(s.x0)):
        raise ValueError(f"strategy violates the fuel constraint by {s.fuel_residual():.3e}")
    xi = np.asarray(s.increments, dtype=float)
    G = p.kernel.gram_matrix(s.grid)
    F = np.asarray(p.signal.integrated_conditional_mean(s.grid), dtype=float)
    total = 0.5 * xi @ G @ xi + F @ xi
    if p.phi:
        Y = s.holdings[:-1]
        total += p.phi * float(np.dot(np.diff(s.grid), Y * Y))
    return float(total)


@dataclass(frozen=True)
class ConvergenceRow:
    N: int
    cost_gap: float
    strategy_gap: float
    lambda_gap: float
    cost_grid: float
    cost_exact: float
    lambda_grid: float
    lambda_exact: float


def compare_to_closed_form(p: GssProblem, strat: GridStrategy, lam: float):
    """Relative cost gap, sup inventory gap and relative multiplier gap."""
    consts, s = solve_closed_form(p)
    c_exact = cost(p, s)
    c_grid = grid_cost(p, strat)
    # holdings[j] is the position on (t_j, t_{j+1}], compare with X(t_j+)
    right = np.nextafter(strat.grid[:-1], np.inf)
    gap = float(np.max(np.abs(strat.holdings[:-1] - inventory_at(s, right))))
    return (abs(c_grid - c_exact) / abs(c_exact), gap,
            abs(lam - consts.lam) / abs(consts.lam), c_grid, c_exact, consts.lam)


def convergence_study(p: GssProblem, Ns=(125, 250, 500, 1000, 2000)) -> list[ConvergenceRow]:
    """Refine the grid and record the gaps to the closed-form optimum."""
    rows = []
    for N in Ns:
        strat, lam = solve_qp(build_qp(p, int(N)))
        cg, sg, lg, c_grid, c_exact, lam_exact = compare_to_closed_form(p, strat, lam)
        rows.append(ConvergenceRow(int(N), cg, sg, lg, c_grid, c_exact, lam, lam_exact))
    return rows


def empirical_orders(rows: list[ConvergenceRow]) -> list[float]:
    """Observed convergence order of the cost gap between successive grids."""
    out = []
    for a, b in zip(rows, rows[1:]):
        out.append(float(np.log(a.cost_gap / b.cost_gap) / np.log(b.N / a.N)))
    return out


def write_convergence_csv(path, rows: list[ConvergenceRow]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["N", "cost_gap", "strategy_gap", "lambda_gap",
                    "cost_grid", "cost_exact", "lambda_grid", "lambda_exact"])
        for r in rows:
            w.writerow([r.N] + [repr(float(v)) for v in
                                (r.cost_gap, r.strategy_gap, r.lambda_gap, r.cost_grid,
                                 r.cost_exact, r.lambda_grid, r.lambda_exact)])
