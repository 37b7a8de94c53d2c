"""Compiled inner loops for the univariate-observation Kalman recursions.

All routines work on plain float64 arrays.  Observation ``t`` is treated as
missing when ``y[t]`` is NaN.  Random numbers are generated by the caller
and passed in, which keeps results reproducible under numpy Generators.
"""

import numpy as np
from numba import njit

LOG_2PI = np.log(2.0 * np.pi)
# Prediction variances below this are treated as "observation carries no
# information" instead of being divided by.
F_TINY = 1e-14
# More negative than this and the model is broken.
F_NEGATIVE_TOL = 1e-8


@njit(cache=True)
def _mat_vec(A, x, out):
    m, k = A.shape
    for i in range(m):
        s = 0.0
        for j in range(k):
            s += A[i, j] * x[j]
        out[i] = s


@njit(cache=True)
def _propagate_cov(T, P, RQR, work, out):
    """out = T P T' + RQR, symmetric."""
    m = T.shape[0]
    for i in range(m):
        for j in range(m):
            s = 0.0
            for k in range(m):
                s += T[i, k] * P[k, j]
            work[i, j] = s
    for i in range(m):
        for j in range(i, m):
            s = RQR[i, j]
            for k in range(m):
                s += work[i, k] * T[j, k]
            out[i, j] = s
            out[j, i] = s


@njit(cache=True)
def kalman_filter(y, offset, Z, T, RQR, H, a1, P1):
    """Forward pass.

    Returns ``(a_pred, P_pred, a_filt, P_filt, v, F, used, loglik, fail)``.
    ``a_pred``/``P_pred`` have n + 1 rows, the last one being the prediction
    for the day after the sample.  ``fail`` is the index of the first day
    with a negative prediction variance, or -1.
    """
    n = y.shape[0]
    m = a1.shape[0]
    a_pred = np.empty((n + 1, m))
    P_pred = np.empty((n + 1, m, m))
    a_filt = np.empty((n, m))
    P_filt = np.empty((n, m, m))
    v = np.zeros(n)
    F = np.zeros(n)
    used = np.zeros(n, dtype=np.bool_)
    loglik = 0.0
    PZ = np.empty(m)
    work = np.empty((m, m))
    a_pred[0] = a1
    P_pred[0] = P1
    for t in range(n):
        a = a_pred[t]
        P = P_pred[t]
        af = a_filt[t]
        Pf = P_filt[t]
        _mat_vec(P, Z, PZ)
        f = H
        za = 0.0
        for i in range(m):
            f += Z[i] * PZ[i]
            za += Z[i] * a[i]
        F[t] = f
        if f < -F_NEGATIVE_TOL:
            return a_pred, P_pred, a_filt, P_filt, v, F, used, loglik, t
        if np.isnan(y[t]) or f <= F_TINY:
            af[:] = a
            Pf[:, :] = P
        else:
            vt = y[t] - za - offset[t]
            v[t] = vt
            used[t] = True
            for i in range(m):
                af[i] = a[i] + PZ[i] * vt / f
            for i in range(m):
                for j in range(i, m):
                    x = 0.5 * (P[i, j] + P[j, i]) - PZ[i] * PZ[j] / f
                    Pf[i, j] = x
                    Pf[j, i] = x
            loglik += -0.5 * (LOG_2PI + np.log(f) + vt * vt / f)
        _mat_vec(T, af, a_pred[t + 1])
        _propagate_cov(T, Pf, RQR, work, P_pred[t + 1])
    return a_pred, P_pred, a_filt, P_filt, v, F, used, loglik, -1


@njit(cache=True)
def state_smoother(Z, T, a_pred, P_pred, v, F, used, want_cov):
    """Backward pass via the r/N recursions.

    Returns smoothed means (n, m) and, if ``want_cov``, covariances.
    """
    n = v.shape[0]
    m = Z.shape[0]
    mean = np.empty((n, m))
    cov = np.zeros((n if want_cov else 0, m, m))
    r = np.zeros(m)
    r_new = np.empty(m)
    k = np.empty(m)
    Tk = np.empty(m)
    L = np.empty((m, m))
    N = np.zeros((m, m))
    NL = np.empty((m, m))
    N_new = np.empty((m, m))
    PN = np.empty((m, m))
    for t in range(n - 1, -1, -1):
        P = P_pred[t]
        if used[t]:
            _mat_vec(P, Z, k)
            for i in range(m):
                k[i] /= F[t]
            _mat_vec(T, k, Tk)
            # L = T - (T k) Z'
            for i in range(m):
                for j in range(m):
                    L[i, j] = T[i, j] - Tk[i] * Z[j]
            for j in range(m):
                s = Z[j] * v[t] / F[t]
                for i in range(m):
                    s += L[i, j] * r[i]
                r_new[j] = s
        else:
            for i in range(m):
                for j in range(m):
                    L[i, j] = T[i, j]
            for j in range(m):
                s = 0.0
                for i in range(m):
                    s += T[i, j] * r[i]
                r_new[j] = s
        r[:] = r_new
        if want_cov:
            # N <- Z Z'/F + L' N L  (Z term only when the day was used)
            for i in range(m):
                for j in range(m):
                    s = 0.0
                    for q in range(m):
                        s += N[i, q] * L[q, j]
                    NL[i, j] = s
            for i in range(m):
                for j in range(i, m):
                    s = 0.0
                    for q in range(m):
                        s += L[q, i] * NL[q, j]
                    if used[t]:
                        s += Z[i] * Z[j] / F[t]
                    N_new[i, j] = s
                    N_new[j, i] = s
            N[:, :] = N_new
        for i in range(m):
            s = a_pred[t, i]
            for j in range(m):
                s += P[i, j] * r[j]
            mean[t, i] = s
        if want_cov:
            for i in range(m):
                for j in range(m):
                    s = 0.0
                    for q in range(m):
                        s += P[i, q] * N[q, j]
                    PN[i, j] = s
            for i in range(m):
                for j in range(i, m):
                    s = P[i, j]
                    for q in range(m):
                        s -= PN[i, q] * P[q, j]
                    cov[t, i, j] = s
                    cov[t, j, i] = s
    return mean, cov


@njit(cache=True)
def simulate_states(Z, T, R, q_sd, h_sd, a1, P1_chol, offset, z0, z_state, z_obs):
    """Draw a state path and observations from the model given standard normals."""
    n = z_obs.shape[0]
    m = a1.shape[0]
    r = q_sd.shape[0]
    states = np.empty((n + 1, m))
    y = np.empty(n)
    for i in range(m):
        s = a1[i]
        for j in range(m):
            s += P1_chol[i, j] * z0[j]
        states[0, i] = s
    for t in range(n):
        alpha = states[t]
        s = offset[t] + h_sd * z_obs[t]
        for i in range(m):
            s += Z[i] * alpha[i]
        y[t] = s
        nxt = states[t + 1]
        _mat_vec(T, alpha, nxt)
        for i in range(m):
            for j in range(r):
                nxt[i] += R[i, j] * q_sd[j] * z_state[t, j]
    return states[:n], y


@njit(cache=True)
def simulation_smoother(y, offset, Z, T, R, q_sd, h_sd, P1, P1_chol, a1, z0, z_state, z_obs):
    """One draw from p(states | y) by mean correction.

    Simulate a fake (states, y) pair from the model, smooth the difference
    between real and fake data with zero initial mean and no offset, then
    add the fake states back.  Returns ``(draw, fail)``.
    """
    n = y.shape[0]
    m = Z.shape[0]
    states, y_fake = simulate_states(Z, T, R, q_sd, h_sd, a1, P1_chol, offset, z0, z_state, z_obs)
    diff = y - y_fake
    zero_off = np.zeros(n)
    q_var = q_sd * q_sd
    RQR = (R * q_var) @ R.T
    a_pred, P_pred, a_filt, P_filt, v, F, used, ll, fail = kalman_filter(
        diff, zero_off, Z, T, RQR, h_sd * h_sd, np.zeros(m), P1
    )
    if fail >= 0:
        return states, fail
    mean, _ = state_smoother(Z, T, a_pred, P_pred, v, F, used, False)
    return states + mean, -1


@njit(cache=True)
def dtw_cost(a, b, window):
    """Classic DTW: absolute-difference cost, steps (1,0), (0,1), (1,1).

    ``window < 0`` disables the Sakoe-Chiba band.
    """
    n = a.shape[0]
    m = b.shape[0]
    D = np.full((n, m), np.inf)
    for i in range(n):
        lo = 0
        hi = m
        if window >= 0:
            lo = max(0, i - window)
            hi = min(m, i + window + 1)
        for j in range(lo, hi):
            c = abs(a[i] - b[j])
            if i == 0 and j == 0:
                D[i, j] = c
                continue
            best = np.inf
            if i > 0 and D[i - 1, j] < best:
                best = D[i - 1, j]
            if j > 0 and D[i, j - 1] < best:
                best = D[i, j - 1]
            if i > 0 and j > 0 and D[i - 1, j - 1] < best:
                best = D[i - 1, j - 1]
            D[i, j] = best + c
    return D[n - 1, m - 1]
