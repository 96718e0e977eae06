"""
Instantaneous impact: Riccati coefficients and feedback trading
===============================================================

The value function is quadratic in inventory; its coefficients have closed
forms. The optimal rate is a linear feedback on inventory and signal.
"""

import math

import numpy as np

from optexec import CjProblem, OuSignal
from optexec import cj

p = CjProblem(kappa=0.5, phi=0.1, varrho=10.0, T=10.0, signal=OuSignal(0.1, 0.1, 0.0), x0=10.0)
t = np.linspace(0, 10, 6)
print("v2:", np.round(cj.v2_at(p, t), 4))
print("v1 at iota=0.5:", np.round(cj.v1_at(p, t, 0.5), 4))
print("v0 at iota=0.5:", np.round([cj.v0_at(p, s, 0.5) for s in t], 4))

# deterministic liquidation, finite penalty versus forced completion
for fuel in (False, True):
    tt, X, r = cj.deterministic_trajectory(p, 10_000, fuel=fuel)
    print(f"fuel={fuel}: X(T/2)={X[5000]:.4f}  X(T)={X[-1]:.2e}")

# with no penalties the rate is the pure signal-following rule
q = CjProblem(0.1, 0.0, 0.0, 10.0, OuSignal(0.9, 0.0, -0.5), x0=10.0)
I = -0.5 * np.exp(-0.9 * t)
print("no-penalty rate:", np.round(cj.optimal_rate(q, t, 10.0, I), 4))
print("closed form    :", np.round(-I * -np.expm1(-0.9 * (10 - t)) / (2 * 0.1 * 0.9), 4))
print("fuel-limit slope coefficient at t=0:", -math.sqrt(0.05) / math.tanh(math.sqrt(0.2) * 10))
