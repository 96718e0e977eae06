"""
Inventory fan and value surface
===============================

A thousand exact signal paths drive the feedback strategy; the pointwise
mean of the inventories sits on the zero-volatility trajectory.
"""

import numpy as np

from optexec import CjProblem, OuSignal
from optexec.montecarlo import ScenarioSpec, run_cj_paths, value_surface_grid

p = CjProblem(0.5, 0.1, 10.0, 10.0, OuSignal(0.1, 0.1, 0.0), x0=10.0)
b = run_cj_paths(ScenarioSpec("cj", p, n_paths=1000, n_steps=1000, seed=1, output_every=100))
q = b.quantiles()
print(" t     q10     q50     q90    mean   reference")
for j, t in enumerate(b.times):
    print(f"{t:4.1f} {q['q10'][j]:7.3f} {q['q50'][j]:7.3f} {q['q90'][j]:7.3f} "
          f"{q['mean'][j]:7.3f} {b.reference[j]:7.3f}")

iotas, xs = np.linspace(-0.5, 0.5, 5), np.array([0.5, 2.0, 5.0, 10.0])
V = value_surface_grid(p, iotas, xs)
print("\nvalue surface (rows iota, columns x):")
print(np.round(V, 3))
