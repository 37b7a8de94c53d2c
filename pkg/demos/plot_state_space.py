"""
Filtering, smoothing and sampling a local level
===============================================

A local level model is the simplest structural time series: a random-walk
level observed with noise.  We simulate one, run the Kalman filter and
smoother, and check that simulation-smoother draws scatter around the
smoothed mean with the smoothed variance.
"""

import numpy as np

from impact_bsts.state_space import (
    LocalLevel,
    WeeklySeasonal,
    assemble,
    forecast,
    kalman_filter,
    kalman_smoother,
    simulation_smoother,
)

rng = np.random.default_rng(0)
n = 120
level = 10 + np.cumsum(rng.normal(0, 0.3, n))
y = level + rng.normal(0, 1.0, n)
y[40:46] = np.nan  # a week of missing observations

model = assemble([LocalLevel(0.3)], obs_variance=1.0)

###############################################################################
# The filter gives the log-likelihood and one-step predictions.  Missing days
# are skipped, so the predicted variance grows across the gap.
filt = kalman_filter(model, y)
print(f"log-likelihood: {filt.loglik:.2f}")
print("predicted sd around the gap:",
      np.round(np.sqrt(filt.predicted_cov[38:48, 0, 0]), 3))

###############################################################################
# The smoother conditions on the whole sample.
smooth = kalman_smoother(model, y)
err_filtered = np.abs(filt.filtered_mean[:, 0] - level).mean()
err_smoothed = np.abs(smooth.mean[:, 0] - level).mean()
print(f"mean abs error, filtered {err_filtered:.3f} vs smoothed {err_smoothed:.3f}")

###############################################################################
# Simulation-smoother draws reproduce the smoother's moments.
draws = np.array([simulation_smoother(model, y, rng)[:, 0] for _ in range(2000)])
print("max |draw mean - smoothed mean|:",
      np.abs(draws.mean(0) - smooth.mean[:, 0]).max().round(3))
print("variance ratio range:",
      np.round((draws.var(0) / smooth.cov[:, 0, 0])[[0, 43, -1]], 2))

###############################################################################
# Components stack into one state vector.  With weekly seasonality the
# forecast carries the pattern forward.
week = np.tile([2.0, 1.0, 0.0, -0.5, -1.0, -1.0, -0.5], 20)[:n]
model2 = assemble([LocalLevel(0.1), WeeklySeasonal(0.01)], obs_variance=0.25)
y2 = 5 + week + rng.normal(0, 0.5, n)
f2 = kalman_filter(model2, y2)
fc = forecast(model2, f2.filtered_mean[-1], f2.filtered_cov[-1], 7)
print("next week, forecast mean:", np.round(fc.mean, 2))
print("true pattern for reference:", np.round(5 + week[n % 7:][:7], 2))
