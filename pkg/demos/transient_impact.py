"""
Liquidation under transient impact with a mean-reverting signal
===============================================================

Closed-form optimal strategies for six (signal, resilience) scenarios, a
check of the first-order condition, and the limit of fast resilience.
"""

import numpy as np

from optexec import ExpKernel, GssProblem, OuSignal, solve_closed_form
from optexec import gss

T, x0 = 10.0, 10.0
t = np.linspace(0, T, 11)

for rho in (1.0, 2.5):
    for iota in (-0.5, 0.0, 0.5):
        p = GssProblem(x0, T, OuSignal(0.9, 0.0, iota), ExpKernel(0.1, rho))
        c, s = solve_closed_form(p)
        rep = gss.check_optimality_condition(p, s, np.linspace(0, T, 1001))
        print(f"rho={rho:<4} iota={iota:+.1f}  block0={c.A:+.3f}  blockT={c.D:+.3f}  "
              f"lambda={c.lam:+.4f}  deviation={rep.max_deviation:.1e}")
        print("   X:", np.round(gss.inventory_at(s, np.nextafter(t, np.inf)), 3))

# without a signal the solution is two equal blocks plus a constant rate
c, _ = solve_closed_form(GssProblem(x0, T, OuSignal(0.9, 0.0, 0.0), ExpKernel(0.1, 1.0)))
print("no signal:", c.A, c.C, c.D, "vs", -x0 / 12)

# as rho grows the blocks vanish and the path approaches a smooth limit
tt = np.linspace(1, 9, 401)
for rho in (1e1, 1e2, 1e3, 1e4):
    p = GssProblem(x0, T, OuSignal(0.9, 0.0, -0.5), ExpKernel(0.1, rho))
    _, s = solve_closed_form(p)
    gap = np.max(np.abs(gss.inventory_at(s, tt) - gss.asymptotic_strategy(p, tt)))
    print(f"rho={rho:>7g}  sup gap to limit {gap:.2e}")
