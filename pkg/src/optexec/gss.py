"""Optimal liquidation with transient (exponentially decaying) impact and an OU signal.

The optimal trade measure has the form

    dX = A delta_0 + (B e^{-gamma t} + C) dt + D delta_T,

with constants that are linear in the initial inventory and the initial
signal value. Everything here is evaluated in closed form: no quadrature is
used for costs or for the first-order condition, so that numerical error in
those checks is at the level of floating point rounding.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from ._expint import divdiff, expdiff, moment, pexp
from .kernels import ExpKernel
from .signals import OuSignal

__all__ = [
    "GssProblem",
    "GssConstants",
    "StrategyMeasure",
    "OptimalityReport",
    "solve_closed_form",
    "inventory_at",
    "rate_at",
    "cost",
    "optimality_lhs",
    "check_optimality_condition",
    "asymptotic_strategy",
    "monotonicity_diagnostic",
    "resolve_from",
    "export_strategy_csv",
]

FUEL_TOL = 1e-8


@dataclass(frozen=True)
class GssProblem:
    """Liquidate ``x0`` shares over ``[0, T]`` under a transient-impact kernel.

    ``phi`` weighs the running inventory penalty ``phi * int X_t^2 dt``; the
    closed-form solver needs ``phi == 0``, the QP oracle handles any ``phi >= 0``.
    """

    x0: float
    T: float
    signal: OuSignal
    kernel: ExpKernel
    phi: float = 0.0

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("horizon T must be positive")
        if not self.x0 > 0:
            raise ValueError("initial inventory x0 must be positive")
        if not self.phi >= 0:
            raise ValueError("phi must be non-negative")

    @property
    def iota(self) -> float:
        return self.signal.iota

    def replace(self, **kw) -> "GssProblem":
        d = dict(x0=self.x0, T=self.T, signal=self.signal, kernel=self.kernel, phi=self.phi)
        d.update(kw)
        return GssProblem(**d)

    def as_dict(self) -> dict:
        return {
            "x0": self.x0, "T": self.T, "phi": self.phi,
            "gamma": self.signal.gamma, "sigma": self.signal.sigma, "iota": self.signal.iota,
            "kappa": self.kernel.kappa, "rho": self.kernel.rho,
        }


@dataclass(frozen=True)
class GssConstants:
    A: float
    B: float
    C: float
    D: float
    lam: float


@dataclass(frozen=True)
class StrategyMeasure:
    """Signed trade measure: atom at 0, density ``B e^{-gamma t} + C``, atom at T.

    Inventory is left-continuous: ``X(0) = x0`` and ``X(t) = 0`` for ``t > T``
    whenever the fuel constraint holds.
    """

    atom0: float
    B: float
    C: float
    atomT: float
    x0: float
    T: float
    gamma: float

    def density_mass(self) -> float:
        return self.B / self.gamma * -math.expm1(-self.gamma * self.T) + self.C * self.T

    def total_traded(self) -> float:
        return self.atom0 + self.density_mass() + self.atomT

    def fuel_residual(self) -> float:
        return self.total_traded() + self.x0


def solve_closed_form(p: GssProblem) -> tuple[GssConstants, StrategyMeasure]:
    """Unique minimiser of the expected cost for ``phi = 0``.

    The factors ``B kappa rho / (rho -+ gamma)`` are simplified before
    evaluation, so ``gamma == rho`` needs no special handling.
    """
    if p.phi != 0:
        raise ValueError("no closed form for phi != 0; use optexec.oracle instead")
    if not isinstance(p.kernel, ExpKernel):
        raise TypeError("closed form requires an exponential kernel")
    x, T, iota = p.x0, p.T, p.signal.iota
    g, k, r = p.signal.gamma, p.kernel.kappa, p.kernel.rho
    eT = math.exp(-g * T)
    q = iota / (2.0 * k * r * r * g)

    B = q * (r * r - g * g)
    one_minus_eT = -math.expm1(-g * T)
    # (rho - gamma)/gamma * (1 - e^{-gamma T}) stays finite for every gamma > 0
    brace = (r + g) * (1.0 + T * r - (r - g) / g * one_minus_eT) - (r - g) * eT
    A = (q * brace - x) / (2.0 + T * r)
    C = r * A - iota * (r + g) / (2.0 * k * r * g)
    D = A - q * ((r + g) - (r - g) * eT)
    lam = 2.0 * k * C + iota / g
    consts = GssConstants(A, B, C, D, lam)
    return consts, StrategyMeasure(A, B, C, D, x, T, g)


def _inventory_continuous(s: StrategyMeasure, t):
    """Inventory on (0, T] (after the initial block, before the final one)."""
    return s.x0 + s.atom0 + s.C * t + s.B / s.gamma * -np.expm1(-s.gamma * t)


def inventory_at(s: StrategyMeasure, t):
    """Left-continuous inventory ``X(t)``; vectorised in ``t``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    tc = np.minimum(t, s.T)
    x = np.where(t > 0, _inventory_continuous(s, tc), s.x0)
    x = np.where(t > s.T, x + s.atomT, x)
    return float(x) if x.ndim == 0 else x


def rate_at(s: StrategyMeasure, t):
    """Density of the absolutely continuous part (shares per unit time)."""
    t = np.asarray(t, dtype=float)
    out = np.where((t > 0) & (t < s.T), s.B * np.exp(-s.gamma * t) + s.C, 0.0)
    return float(out) if out.ndim == 0 else out


def _impact_cost(s: StrategyMeasure, kernel: ExpKernel) -> float:
    """``1/2 int int G(|t-s|) dX_s dX_t`` for the three-part measure."""
    k, r, T, g = kernel.kappa, kernel.rho, s.T, s.gamma
    A, D = s.atom0, s.atomT
    dens = ((s.B, g), (s.C, 0.0))

    def Q(b):  # int_0^T e^{-b t} e^{-rho (T - t)} dt
        return float(expdiff(b, r, T))

    def J(a, b):  # int int e^{-a s} e^{-b t} e^{-rho |t - s|} ds dt
        return divdiff(a + b, r + b, T) + (pexp(a + b, T) - math.exp(-a * T) * Q(b)) / (a + r)

    total = 0.5 * (A * A + D * D) + A * D * math.exp(-r * T)
    for c, a in dens:
        total += A * c * pexp(r + a, T) + D * c * Q(a)
        for c2, b in dens:
            total += 0.5 * c * c2 * J(a, b)
    return k * r * total


def _signal_cost(s: StrategyMeasure, sig: OuSignal) -> float:
    """``int (int_0^t E[I_u] du) dX_t``; the initial block carries zero weight."""
    g, T = sig.gamma, s.T
    scale = sig.iota / g
    dens = s.B * (pexp(g, T) - pexp(2 * g, T)) + s.C * (T - pexp(g, T))
    return scale * (dens + s.atomT * -math.expm1(-g * T))


def _risk_cost(s: StrategyMeasure) -> float:
    """``int_0^T X_t^2 dt`` with ``X = a0 + a1 t - b e^{-gamma t}`` on (0, T]."""
    g, T = s.gamma, s.T
    b = s.B / g
    a0 = s.x0 + s.atom0 + b
    a1 = s.C
    return (a0 * a0 * T + a0 * a1 * T * T + a1 * a1 * T**3 / 3.0
            - 2 * a0 * b * moment(0, g, T) - 2 * a1 * b * moment(1, g, T)
            + b * b * moment(0, 2 * g, T))


def cost(p: GssProblem, s) -> float:
    """Expected execution cost (without the ``-P_0 x`` constant).

    ``s`` may be a :class:`StrategyMeasure` (evaluated analytically) or an
    :class:`optexec.oracle.GridStrategy` (evaluated as the exact cost of the
    corresponding pure-jump strategy).
    """
    from .oracle import GridStrategy, grid_cost

    if isinstance(s, GridStrategy):
        return grid_cost(p, s)
    if abs(s.fuel_residual()) > FUEL_TOL * max(1.0, abs(s.x0)):
        raise ValueError(f"strategy violates the fuel constraint by {s.fuel_residual():.3e}")
    if s.x0 == 0 and s.atom0 == 0 and s.atomT == 0 and s.B == 0 and s.C == 0:
        return 0.0
    if not math.isclose(s.gamma, p.signal.gamma) and s.B != 0:
        raise ValueError("strategy density rate does not match the signal's gamma")
    total = _signal_cost(s, p.signal) + _impact_cost(s, p.kernel)
    if p.phi:
        total += p.phi * _risk_cost(s)
    return total


def optimality_lhs(p: GssProblem, s: StrategyMeasure, t):
    """First-order-condition functional, constant in ``t`` iff ``s`` is optimal:

        int_0^t E[I_u] du + int G(|t - u|) dX_u - 2 phi int_0^t X_u du.
    """
    t = np.asarray(t, dtype=float)
    if np.any((t < 0) | (t > s.T)):
        raise ValueError("t must lie in [0, T]")
    k, r, T, g = p.kernel.kappa, p.kernel.rho, s.T, s.gamma
    kr = k * r
    out = np.asarray(p.signal.integrated_conditional_mean(t), dtype=float)
    out = out + kr * (s.atom0 * np.exp(-r * t) + s.atomT * np.exp(-r * (T - t)))
    back = (np.exp(-g * t) - math.exp(-g * T) * np.exp(-r * (T - t))) / (r + g)
    out = out + s.B * kr * (expdiff(g, r, t) + back)
    out = out + s.C * k * (-np.expm1(-r * t) - np.expm1(-r * (T - t)))
    if p.phi:
        integral = np.where(
            t > 0,
            (s.x0 + s.atom0) * t + 0.5 * s.C * t * t
            + s.B / g * (t + np.expm1(-g * t) / g),
            0.0,
        )
        out = out - 2.0 * p.phi * integral
    return float(out) if out.ndim == 0 else out


class OptimalityReport(NamedTuple):
    lambda_est: float
    max_deviation: float


def check_optimality_condition(p: GssProblem, s: StrategyMeasure, grid) -> OptimalityReport:
    """Evaluate the first-order functional on ``grid``; report mean and spread."""
    lhs = np.atleast_1d(optimality_lhs(p, s, grid))
    lam = float(np.mean(lhs))
    return OptimalityReport(lam, float(np.max(np.abs(lhs - lam))))


def asymptotic_strategy(p: GssProblem, t):
    """Limit of the optimal inventory as the impact decay rate ``rho -> inf``.

    Jumps vanish and the inventory becomes

        x0 (1 - t/T) + iota/(2 kappa gamma^2) [(1 - e^{-gamma t}) - (t/T)(1 - e^{-gamma T})],

    i.e. a straight-line liquidation plus the signal-driven displacement, with
    a constant-rate correction that keeps the fuel constraint.
    """
    t = np.asarray(t, dtype=float)
    if np.any((t < 0) | (t > p.T)):
        raise ValueError("t must lie in [0, T]")
    g, k, T = p.signal.gamma, p.kernel.kappa, p.T
    c = p.signal.iota / (2.0 * k * g * g)
    out = p.x0 * (1.0 - t / T) + c * (-np.expm1(-g * t) + t / T * math.expm1(-g * T))
    return float(out) if out.ndim == 0 else out


def monotonicity_diagnostic(s: StrategyMeasure, grid, tol: float = 1e-12):
    """Is the inventory non-increasing along ``grid``?

    The post-jump states ``X(0+)`` and ``X(T+)`` are inserted so that a buy
    block is seen even on a coarse grid. Returns ``(is_monotone, t_first)``
    where ``t_first`` is the first time the inventory goes up, or ``None``.
    """
    grid = np.asarray(grid, dtype=float)
    times = [0.0, 0.0]
    values = [s.x0, s.x0 + s.atom0]
    inner = grid[(grid > 0) & (grid <= s.T)]
    times.extend(inner)
    values.extend(np.atleast_1d(inventory_at(s, inner)))
    times.append(s.T)
    values.append(s.x0 + s.total_traded())
    times = np.asarray(times)
    dv = np.diff(np.asarray(values))
    bad = np.nonzero(dv > tol * max(1.0, abs(s.x0)))[0]
    if bad.size == 0:
        return True, None
    return False, float(times[bad[0] + 1])


def resolve_from(p: GssProblem, t: float, x_t: float, iota_t: float):
    """Re-solve on ``[t, T]`` from the current state, ignoring impact already
    created on ``[0, t]``. Diagnostic only: the result is not optimal for the
    original problem because that problem is not time-consistent.
    """
    if not 0 <= t < p.T:
        raise ValueError("t must lie in [0, T)")
    sub = p.replace(x0=x_t, T=p.T - t, signal=p.signal.restarted(iota_t))
    return solve_closed_form(sub)


def export_strategy_csv(path, p: GssProblem, n_points: int = 1001):
    """Write the closed-form strategy sampled on ``n_points`` to CSV.

    Header rows start with ``#`` and carry the problem parameters and the
    constants. ``atom_flag`` is 1 on the rows that carry a block trade; the
    inventory on those rows is the post-trade value.
    """
    consts, s = solve_closed_form(p)
    t = np.linspace(0.0, p.T, n_points)
    inv = np.atleast_1d(inventory_at(s, t))
    inv[0] = s.x0 + s.atom0
    inv[-1] = s.x0 + s.total_traded()
    rate = np.atleast_1d(rate_at(s, t))
    flags = np.zeros(n_points, dtype=int)
    flags[0] = flags[-1] = 1
    with open(path, "w", newline="") as fh:
        for key, val in {**p.as_dict(), **asdict(consts)}.items():
            fh.write(f"# {key}={val!r}\n")
        w = csv.writer(fh)
        w.writerow(["t", "inventory", "rate", "atom_flag"])
        for row in zip(t, inv, rate, flags):
            w.writerow([repr(float(row[0])), repr(float(row[1])), repr(float(row[2])), int(row[3])])
    return consts, s
