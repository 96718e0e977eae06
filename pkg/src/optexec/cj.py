"""Instantaneous-impact liquidation with an OU signal and a terminal penalty.

The value function is ``c + x p + v0(t, iota) + x v1(t, iota) + x^2 v2(t)``.
``v2`` solves the Riccati equation ``v2' + v2^2 / kappa - phi = 0`` with
``v2(T) = -varrho``. Writing ``v2 = kappa psi'/psi`` linearises it
(``psi'' = (phi/kappa) psi``) and gives every ``exp((1/kappa) int v2)``
factor as a ratio ``psi(s) / psi(t)``, which is what the code evaluates.

``varrho = math.inf`` selects the fuel-constrained limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from ._expint import expdiff
from .signals import MarkovSignal, OuSignal

__all__ = [
    "CjProblem",
    "CjCoefficients",
    "coefficients",
    "v2_at",
    "v1_at",
    "v0_at",
    "optimal_rate",
    "fuel_limit_rate",
    "value_surface",
    "integrate_inventory",
    "deterministic_trajectory",
]


@dataclass(frozen=True)
class CjProblem:
    """Parameters of the instantaneous-impact problem.

    ``kappa`` temporary impact, ``phi`` running inventory penalty, ``varrho``
    terminal penalty (``math.inf`` for the fuel limit), ``sigmaP`` price
    volatility (does not enter the optimal control).
    """

    kappa: float
    phi: float
    varrho: float
    T: float
    signal: OuSignal
    x0: float = 0.0
    sigmaP: float = 0.0
    c0: float = 0.0
    p0: float = 0.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if not self.phi >= 0:
            raise ValueError("phi must be non-negative")
        if not self.varrho >= 0:
            raise ValueError("varrho must be non-negative")
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.phi > 0 and self.varrho == math.sqrt(self.kappa * self.phi):
            raise ValueError("varrho == sqrt(kappa * phi) is excluded")

    def replace(self, **kw) -> "CjProblem":
        d = self.__dict__.copy()
        d.update(kw)
        return CjProblem(**d)

    def as_dict(self) -> dict:
        return {
            "kappa": self.kappa, "phi": self.phi, "varrho": self.varrho, "T": self.T,
            "x0": self.x0, "sigmaP": self.sigmaP, "gamma": self.signal.gamma,
            "sigma": self.signal.sigma, "iota": self.signal.iota,
        }


def _series_x_expm1(x):
    """``(x + expm1(-x)) / x^2`` without cancellation near 0."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-3
    xs = np.where(small, 1.0, x)
    direct = (xs + np.expm1(-xs)) / (xs * xs)
    series = 0.5 - x / 6.0 + x * x / 24.0 - x**3 / 120.0
    return np.where(small, series, direct)


class CjCoefficients:
    """Time-dependent value-function coefficients for one problem.

    Methods take time arrays and perform no domain checks; the module-level
    functions validate inputs.
    """

    def __init__(self, p: CjProblem):
        self.p = p
        self.kappa, self.phi, self.varrho, self.T = p.kappa, p.phi, p.varrho, p.T
        self.fuel = math.isinf(p.varrho)
        self.beta = math.sqrt(p.phi / p.kappa)
        self.s0 = math.sqrt(p.kappa * p.phi)
        if p.phi > 0 and not self.fuel:
            self.zeta = (p.varrho + self.s0) / (p.varrho - self.s0)
        elif p.phi > 0:
            self.zeta = 1.0
        else:
            self.zeta = None

    # psi(t) is proportional to exp(-beta tau) * _den(tau), tau = T - t
    def _den(self, tau):
        u = np.exp(-2.0 * self.beta * tau)
        if self.fuel:
            return u - 1.0
        r, s = self.varrho, self.s0
        return u * (r - s) - (r + s)

    def v2(self, t):
        tau = self.T - np.asarray(t, dtype=float)
        k = self.kappa
        if self.phi == 0:
            if self.fuel:
                with np.errstate(divide="ignore"):
                    return -k / tau
            return -k * self.varrho / (k + self.varrho * tau)
        u = np.exp(-2.0 * self.beta * tau)
        if self.fuel:
            with np.errstate(divide="ignore"):
                return self.s0 * (u + 1.0) / (u - 1.0)
        r, s = self.varrho, self.s0
        out = s * (u * (r - s) + (r + s)) / (u * (r - s) - (r + s))
        return np.where(tau == 0, -r, out)  # terminal value exactly, not to rounding

    def ratio(self, t_from, t_to):
        """``exp((1/kappa) int_{t_from}^{t_to} v2) = psi(t_to) / psi(t_from)``."""
        t_from = np.asarray(t_from, dtype=float)
        t_to = np.asarray(t_to, dtype=float)
        ta, tb = self.T - t_from, self.T - t_to
        if self.phi == 0:
            if self.fuel:
                return tb / ta
            return (self.kappa + self.varrho * tb) / (self.kappa + self.varrho * ta)
        return np.exp(-self.beta * (t_to - t_from)) * self._den(tb) / self._den(ta)

    def factor(self, t, gamma: float):
        """``h(t) = int_t^T e^{-gamma (s - t)} psi(s)/psi(t) ds``, so that
        ``v1(t, iota) = iota * h(t)`` for an OU signal."""
        tau = self.T - np.asarray(t, dtype=float)
        g = gamma
        pg = -np.expm1(-g * tau) / g
        if self.phi == 0:
            tail = tau * tau * _series_x_expm1(g * tau)  # int_0^tau (tau - v) e^{-g v} dv
            if self.fuel:
                with np.errstate(invalid="ignore", divide="ignore"):
                    return np.where(tau > 0, tail / np.where(tau > 0, tau, 1.0), 0.0)
            k, r = self.kappa, self.varrho
            return (k * pg + r * tail) / (k + r * tau)
        b = self.beta
        e = expdiff(b + g, 2.0 * b, tau)
        pbg = -np.expm1(-(b + g) * tau) / (b + g)
        if self.fuel:
            num, den = e - pbg, self._den(tau)
            with np.errstate(invalid="ignore", divide="ignore"):
                return np.where(tau > 0, num / np.where(tau > 0, den, 1.0), 0.0)
        r, s = self.varrho, self.s0
        return ((r - s) * e - (r + s) * pbg) / self._den(tau)

    def factor_quad(self, t: float, signal: MarkovSignal, iota: float = 1.0) -> float:
        """``v1(t, iota)`` by one outer quadrature; works for any Markov signal."""
        sig = signal.restarted(iota)
        if t >= self.T:
            return 0.0

        def integrand(s):
            return float(self.ratio(t, s)) * float(sig.conditional_mean(s - t))

        val, _ = quad(integrand, t, self.T, epsabs=1e-12, epsrel=1e-12, limit=200)
        return val

    def v0_parts(self, t: float, signal: OuSignal):
        """``v0(t, iota) = a * iota^2 + b``; returns ``(a, b)`` by quadrature."""
        if t >= self.T:
            return 0.0, 0.0
        g, sig2, k = signal.gamma, signal.sigma**2, self.kappa

        def h2(s):
            return float(self.factor(s, g)) ** 2

        a, _ = quad(lambda s: h2(s) * math.exp(-2 * g * (s - t)), t, self.T,
                    epsabs=1e-12, epsrel=1e-12, limit=200)
        b = 0.0
        if sig2 > 0:
            b, _ = quad(lambda s: h2(s) * -math.expm1(-2 * g * (s - t)), t, self.T,
                        epsabs=1e-12, epsrel=1e-12, limit=200)
            b *= sig2 / (2 * g)
        return a / (4 * k), b / (4 * k)


def coefficients(p: CjProblem) -> CjCoefficients:
    return CjCoefficients(p)


def _check_t(p: CjProblem, t, *, open_right=False):
    t = np.asarray(t, dtype=float)
    bad = (t < 0) | (t > p.T) if not open_right else (t < 0) | (t >= p.T)
    if np.any(bad):
        raise ValueError(f"t must lie in [0, T{')' if open_right else ']'}")
    return t


def _out(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def v2_at(p: CjProblem, t):
    """Quadratic-in-inventory coefficient; ``v2(T) = -varrho``."""
    t = _check_t(p, t)
    return _out(CjCoefficients(p).v2(t))


def v1_at(p: CjProblem, t, iota, method: str = "analytic"):
    """Linear-in-inventory coefficient ``int_t^T psi(s)/psi(t) E_{t,iota}[I_s] ds``.

    ``method="analytic"`` (OU only) uses the closed-form integral;
    ``method="quad"`` integrates numerically and accepts any Markov signal.
    """
    t = _check_t(p, t)
    co = CjCoefficients(p)
    if method == "analytic":
        return _out(np.asarray(iota, dtype=float) * co.factor(t, p.signal.gamma))
    if method == "quad":
        if np.ndim(t) or np.ndim(iota):
            raise ValueError("quad method takes scalar t and iota")
        return co.factor_quad(float(t), p.signal, float(iota))
    raise ValueError(f"unknown method {method!r}")


def v0_at(p: CjProblem, t: float, iota):
    """``(1/4 kappa) int_t^T E_{t,iota}[v1(s, I_s)^2] ds`` (OU second moments)."""
    t = float(_check_t(p, t))
    a, b = CjCoefficients(p).v0_parts(t, p.signal)
    iota = np.asarray(iota, dtype=float)
    return _out(a * iota * iota + b)


def optimal_rate(p: CjProblem, t, x, iota):
    """Feedback selling speed ``-(2 v2(t) x + v1(t, iota)) / (2 kappa)``."""
    t = _check_t(p, t)
    co = CjCoefficients(p)
    x, iota = np.asarray(x, dtype=float), np.asarray(iota, dtype=float)
    return _out(-(2.0 * co.v2(t) * x + iota * co.factor(t, p.signal.gamma)) / (2.0 * p.kappa))


def fuel_limit_rate(p: CjProblem, t, x, iota):
    """Selling speed in the ``varrho -> inf`` limit; singular at ``t = T``."""
    t = _check_t(p, t, open_right=True)
    return optimal_rate(p.replace(varrho=math.inf), t, x, iota)


def value_surface(p: CjProblem, t: float, iota, x):
    """``v0(t, iota) + x v1(t, iota) + x^2 v2(t)``; broadcasts ``iota`` and ``x``."""
    t = float(_check_t(p, t))
    co = CjCoefficients(p)
    a, b = co.v0_parts(t, p.signal)
    iota, x = np.asarray(iota, dtype=float), np.asarray(x, dtype=float)
    h = float(co.factor(t, p.signal.gamma))
    return _out(a * iota * iota + b + x * iota * h + x * x * float(co.v2(t)))


def integrate_inventory(p: CjProblem, n_steps: int, signal_half, x0: float | None = None,
                        fuel: bool = False):
    """Integrate ``dX = -r*(t, X, I_t) dt`` on a uniform grid of ``n_steps``.

    One-step explicit scheme of order four: the linear part is propagated
    exactly by ``psi`` ratios (integrating factor) and the signal forcing is
    integrated with Simpson's rule on the half-step signal values. Stable in
    the fuel limit, where ``v2 -> -inf`` at ``T``.

    Parameters
    ----------
    signal_half : array, shape (n_paths, 2 n_steps + 1) or (2 n_steps + 1,)
        Signal sampled on the grid ``linspace(0, T, 2 n_steps + 1)``.

    Returns
    -------
    times, X, rate : arrays
        ``X`` and ``rate`` have shape ``(n_paths, n_steps + 1)``.
    """
    if fuel and not math.isinf(p.varrho):
        p = p.replace(varrho=math.inf)
    x0 = p.x0 if x0 is None else x0
    I = np.atleast_2d(np.asarray(signal_half, dtype=float))
    if I.shape[1] != 2 * n_steps + 1:
        raise ValueError("signal must be sampled on 2*n_steps+1 half-step points")
    co = CjCoefficients(p)
    th = np.linspace(0.0, p.T, 2 * n_steps + 1)
    h = co.factor(th, p.signal.gamma)
    b = h / (2.0 * p.kappa)  # forcing coefficient: dX/dt = (v2/kappa) X + b I
    t0, tm, t1 = th[:-2:2], th[1:-1:2], th[2::2]
    r_step = co.ratio(t0, t1)
    r_mid = co.ratio(tm, t1)
    dt = t1 - t0

    X = np.empty((I.shape[0], n_steps + 1))
    X[:, 0] = x0
    g = b[None, :] * I
    w0, wm, w1 = dt / 6.0 * r_step, 4.0 * dt / 6.0 * r_mid, dt / 6.0
    for n in range(n_steps):
        X[:, n + 1] = (r_step[n] * X[:, n] + w0[n] * g[:, 2 * n]
                       + wm[n] * g[:, 2 * n + 1] + w1[n] * g[:, 2 * n + 2])
    times = th[::2]
    with np.errstate(invalid="ignore", divide="ignore"):
        v2 = co.v2(times)
        rate = -(2.0 * v2[None, :] * X + h[None, ::2] * I[:, ::2]) / (2.0 * p.kappa)
    if co.fuel:
        rate[:, -1] = np.nan
    return times, X, rate


def deterministic_trajectory(p: CjProblem, n_steps: int = 10_000, fuel: bool = False):
    """Inventory path when the signal follows its mean ``iota e^{-gamma t}``."""
    th = np.linspace(0.0, p.T, 2 * n_steps + 1)
    I = np.asarray(p.signal.conditional_mean(th))
    t, X, r = integrate_inventory(p, n_steps, I, fuel=fuel)
    return t, X[0], r[0]
