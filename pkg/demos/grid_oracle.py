"""
Checking the closed form against a discretised quadratic program
================================================================

Each grid strategy has an exactly computable cost, so minimising it is a
dense equality-constrained QP. Refining the grid drives the QP optimum to
the continuous one.
"""

import numpy as np

from optexec import ExpKernel, GssProblem, OuSignal
from optexec import oracle

p = GssProblem(10.0, 10.0, OuSignal(0.9, 0.0, -0.5), ExpKernel(0.1, 1.0))
rows = oracle.convergence_study(p, (125, 250, 500, 1000, 2000))
for r in rows:
    print(f"N={r.N:<5} cost gap {r.cost_gap:.2e}  sup gap {r.strategy_gap:.2e}  "
          f"lambda gap {r.lambda_gap:.2e}")
print("observed orders:", np.round(oracle.empirical_orders(rows), 2))

# the QP also handles a running inventory penalty, which has no closed form
strat, lam = oracle.solve_qp(oracle.build_qp(p.replace(phi=0.1), 500))
print("with penalty: first block", round(strat.increments[0], 4),
      "last block", round(strat.increments[-1], 4), "lambda", round(lam, 4))
