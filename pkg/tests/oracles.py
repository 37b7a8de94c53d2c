"""Brute-force reference computations used by the tests.

Nothing here touches the recursive code paths: the state-space oracle
writes the whole state path as a linear map of independent Gaussians and
conditions the resulting joint distribution directly.
"""

import itertools

import numpy as np
from scipy import stats


def dense_joint(model, n):
    """Mean and covariance of (states stacked, y) under ``model`` for n days.

    Returns ``(mu_a, S_aa, mu_y, S_yy, S_ay)`` with states flattened as
    ``[alpha_1, ..., alpha_n]``.
    """
    m = model.m
    r = model.R.shape[1]
    # alpha = A @ xi + mu, xi = (alpha_1 - a1, eta_1, ..., eta_{n-1})
    k = m + r * (n - 1)
    A = np.zeros((n * m, k))
    cov_xi = np.zeros((k, k))
    cov_xi[:m, :m] = model.P1
    for t in range(n - 1):
        cov_xi[m + r * t : m + r * (t + 1), m + r * t : m + r * (t + 1)] = np.diag(model.Q)
    mu = np.zeros(n * m)
    Tpow = [np.eye(m)]
    for _ in range(n):
        Tpow.append(model.T @ Tpow[-1])
    for t in range(n):
        mu[t * m : (t + 1) * m] = Tpow[t] @ model.a1
        A[t * m : (t + 1) * m, :m] = Tpow[t]
        for s in range(t):
            # eta_s (0-based) enters alpha_{s+1}
            A[t * m : (t + 1) * m, m + r * s : m + r * (s + 1)] = Tpow[t - 1 - s] @ model.R
    S_aa = A @ cov_xi @ A.T
    Zbig = np.kron(np.eye(n), model.Z[None, :])
    off = model.offsets(n)
    mu_y = Zbig @ mu + off
    S_yy = Zbig @ S_aa @ Zbig.T + model.H * np.eye(n)
    S_ay = S_aa @ Zbig.T
    return mu, S_aa, mu_y, S_yy, S_ay


def dense_loglik(model, y):
    y = np.asarray(y, dtype=float)
    n = y.size
    _, _, mu_y, S_yy, _ = dense_joint(model, n)
    obs = ~np.isnan(y)
    if not obs.any():
        return 0.0
    return stats.multivariate_normal(mu_y[obs], S_yy[np.ix_(obs, obs)]).logpdf(y[obs])


def dense_conditional(model, y, upto=None):
    """E[states | y_1..y_upto] and Cov, shaped (n, m) and (n, m, m)."""
    y = np.asarray(y, dtype=float)
    n = y.size
    m = model.m
    mu, S_aa, mu_y, S_yy, S_ay = dense_joint(model, n)
    obs = ~np.isnan(y)
    if upto is not None:
        obs[upto:] = False
    if obs.any():
        Syy = S_yy[np.ix_(obs, obs)]
        Say = S_ay[:, obs]
        gain = np.linalg.solve(Syy, Say.T).T
        mean = mu + gain @ (y[obs] - mu_y[obs])
        cov = S_aa - gain @ Say.T
    else:
        mean, cov = mu, S_aa
    means = mean.reshape(n, m)
    covs = np.array([cov[t * m : (t + 1) * m, t * m : (t + 1) * m] for t in range(n)])
    return means, covs


def monotone_paths(n, m):
    """Every warping path from (0, 0) to (n-1, m-1) with steps (1,0),(0,1),(1,1)."""
    def rec(i, j):
        if (i, j) == (n - 1, m - 1):
            yield [(i, j)]
            return
        for di, dj in ((1, 0), (0, 1), (1, 1)):
            a, b = i + di, j + dj
            if a < n and b < m:
                for tail in rec(a, b):
                    yield [(i, j)] + tail
    return list(rec(0, 0))


def brute_force_dtw(a, b):
    best = np.inf
    for path in monotone_paths(len(a), len(b)):
        total = 0.0
        for i, j in path:
            total = total + abs(a[i] - b[j])
        best = min(best, total)
    return best


def binary_series(max_len=4):
    for n in range(1, max_len + 1):
        for bits in itertools.product((0.0, 1.0), repeat=n):
            yield np.array(bits)
