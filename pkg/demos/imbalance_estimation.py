"""
Order-book imbalance as a signal: estimation on synthetic trades
================================================================

Fit a discrete mean-reverting model at several trade lags, estimate the
per-trade impact, and measure how participant classes trade with the
imbalance.
"""

import numpy as np

from optexec import estimation as est

q, s = est.ar1_for_lag_targets(0.08, 0.22, 7)
x = est.simulate_ar1(100_000, q, s, seed=0)
for dn in (3, 5, 7, 10, 100):
    f = est.fit_ou(x, dn)
    lo, hi = f.gamma_ci
    print(f"lag {dn:>3}: a={f.a_dn:.3f} gamma={f.gamma_hat:.4f} [{lo:.4f}, {hi:.4f}] "
          f"sigma={f.sigma_hat:.4f} persistence={f.persistence:.3f}")

trades = est.synth_trades(200_000, seed=1, imbalance_model="uniform")
k = est.estimate_kappa(trades)
print(f"\nkappa {k.kappa:.5f} +- {k.se:.5f}, relative to spread {k.kappa_over_spread:.3f}")

cr = est.conditioned_rates(trades)
for cls in ("HFPT", "IB"):
    row = cr.row(cls)
    print(f"{cls:>4} r_hat+:", np.round(row["r_hat_plus"], 2))
    print(f"{cls:>4} r_hat-:", np.round(row["r_hat_minus"], 2))

m = est.price_move_regression(est.synth_price_move_trades(100_000, 10, 0.6, noise_sd=0.82, seed=2))
print(f"\nmove over 10 trades: slope {m.slope:.3f} (se {m.slope_se:.3f}), R^2 {m.r_squared:.3f}")
