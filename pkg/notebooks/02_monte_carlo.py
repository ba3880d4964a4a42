"""A small Monte Carlo study and what its summary numbers mean.

Run with ``python3 notebooks/02_monte_carlo.py [reps]`` (default 20 reps,
about a minute). The acceptance suite runs the full 100-replication version.
"""

import sys

from terc import SimConfig, run_montecarlo
from terc.simulation import COEF_NAMES, TRUE_BAR, order_preset

reps = int(sys.argv[1]) if len(sys.argv) > 1 else 20
base = SimConfig(n_reps=reps)

report = run_montecarlo(base, progress=lambda i, n: print(f"\r  replication {i}/{n}", end="", flush=True))
print()
m = report.metrics
print("normalised bias and rMSE (divided by the true mean):")
for k, name in enumerate(COEF_NAMES):
    print(f"  {name:>6}: truth {TRUE_BAR[k]:.4f}  bias {m['bias'][k]:+.4f}  rMSE {m['rmse'][k]:.4f}")
print(f"  rMSE_norm = {m['rmse_norm']:.4f}")

# Most of the error is the common macro shock: each replication draws only
# T values of it, so even the realised sample mean of the true coefficients
# misses the population mean by a similar amount.
real = report.to_dict()["realized_metrics"]
print(f"rMSE_norm of the realised true mean (no estimation at all): {real['rmse_norm']:.4f}")

# Linear bases cannot absorb the nonlinear control function.
lin = run_montecarlo(order_preset(1, base))
print(f"order-1 basis rMSE_norm: {lin.metrics['rmse_norm']:.4f}")

# Where the per-unit coefficient estimates land compared with the truth.
tab = report.hist[("betaK", 0)]
centres = 0.5 * (tab["edges"][1:] + tab["edges"][:-1])
print("\nbeta_K in period 0, share of unit-level values by bin (estimate | truth):")
for c, e, t in zip(centres, tab["est"], tab["true"]):
    if e or t:
        print(f"  {c:6.2f}  {e / tab['est'].sum():6.3f} | {t / tab['true'].sum():6.3f}")
