"""Walk through the three estimation steps on one simulated production panel.

Run with ``python3 notebooks/01_single_panel.py``. Takes a few seconds.

The simulated firms choose capital and labour after observing a productivity
shock U that also drives their elasticities, so ordinary least squares on the
log-linear production function is biased. The estimator recovers the average
elasticities by conditioning on a control variable for U.
"""

import numpy as np

from terc import SimConfig, build_w, estimate_period, gen_dgp
from terc.simulation import COEF_NAMES, TRUE_BAR

panel, truth = gen_dgp(SimConfig(n_units=1000, n_periods=3), rep=0)
print(f"panel: {panel.n_units} firms x {panel.n_periods} periods, regressors {panel.d_x} (last is the intercept)")

# Pooled OLS ignores the correlation between inputs and coefficients.
X = panel.x.reshape(-1, panel.d_x)
ols = np.linalg.lstsq(X, panel.y.ravel(), rcond=None)[0]

# Step 0: the time-symmetric statistic that stands in for the fixed effect.
w = build_w(panel, degree=2)
print(f"W has {w.w.shape[1]} columns: within-period monomials of degree <= 2, averaged over time")

fit = estimate_period(panel, t=0, w=w)
d = fit.diagnostics
print(f"basis sizes: control L={d['L']}, outcome K={d['K']}, beta(x) M={d['M']}")
print(f"raw control values trimmed into [0, 1]: {d['trim_rate']:.1%}")
print(f"R^2 of the outcome regression: {d['r2_g']:.4f}")

print("\ncoefficient   truth    OLS    estimate (period 0)")
for k, name in enumerate(COEF_NAMES):
    print(f"{name:>10} {TRUE_BAR[k]:8.4f} {ols[k]:7.4f} {fit.beta_bar[k]:9.4f}")

# The period-0 average is noisy around the period mean of the coefficients,
# which differs from the population mean through the common macro shock.
print("\nperiod-0 realised mean of the true coefficients:", np.round(truth.beta_it[:, 0].mean(axis=0), 4))

# beta(x): how the expected elasticities vary with the observed inputs.
lo, hi = np.quantile(fit.cross.x_t[:, 0], [0.1, 0.9])
for xk in (lo, hi):
    x = np.array([xk, np.median(fit.cross.x_t[:, 1]), 1.0])
    print(f"beta(x) at log K = {xk:6.3f}: {np.round(fit.betax(x), 3)}")
