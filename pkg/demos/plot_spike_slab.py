"""
Picking controls with spike-and-slab regression
===============================================

Twenty candidate controls, three of which actually drive the response.  The
spike-and-slab sampler integrates the coefficients out when it toggles an
inclusion indicator, so the posterior inclusion probabilities separate the
signals from the decoys.
"""

import numpy as np

from impact_bsts.spike_slab import default_prior, run_regression

rng = np.random.default_rng(1)
n, p = 400, 20
X = rng.normal(size=(n, p))
X = (X - X.mean(0)) / X.std(0, ddof=1)
beta = np.zeros(p)
beta[[2, 9, 15]] = [0.8, -0.5, 0.3]
y = X @ beta + rng.normal(0, 0.1, n)

###############################################################################
# The default prior expects a model of size min(ceil(p/10), 5).
prior = default_prior(p)
print("prior inclusion probability per control:", prior.inclusion_prob[0])

gammas, betas, sigma2 = run_regression(prior, X, y, 2000, burn_in=500, rng=2)
pip = gammas.mean(0)
for j in np.argsort(-pip)[:6]:
    post = betas[gammas[:, j], j]
    mean = post.mean() if post.size else 0.0
    print(f"x{j:02d}  pip {pip[j]:.3f}  beta|included {mean:+.3f}  truth {beta[j]:+.1f}")
print(f"residual sd: {np.sqrt(sigma2).mean():.3f} (truth 0.1)")
