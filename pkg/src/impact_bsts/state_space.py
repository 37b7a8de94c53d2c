"""Structural time-series components compiled to a linear Gaussian state space.

Observation and transition equations::

    y_t       = Z' alpha_t + r_t + eps_t,        eps_t ~ N(0, H)
    alpha_t+1 = T alpha_t + R eta_t,             eta_t ~ N(0, diag(Q))

``r_t`` is a known per-day offset, which is how the regression component
enters.  Initial state is ``N(a1, P1)`` with ``a1 = 0`` and ``P1 = kappa I``
(``kappa = 1e6``) unless overridden.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import DuplicateSeasonal, DuplicateTrend, InputError, NumericalFailure
from .series import DateIndexedSeries

DIFFUSE_SCALE = 1e6


@dataclass(frozen=True)
class LocalLevel:
    sigma_level: float = 0.0


@dataclass(frozen=True)
class LocalLinear:
    sigma_level: float = 0.0
    sigma_slope: float = 0.0


@dataclass(frozen=True)
class SemiLocalLinear:
    """Level random walk whose slope is AR(1) around a long-run slope.

    ``slope_t = D + ar_coef * (slope_{t-1} - D) + v_t``.  ``D`` is carried
    as a constant state; ``long_run_slope`` is its prior mean.
    """

    sigma_level: float = 0.0
    sigma_slope: float = 0.0
    ar_coef: float = 0.5
    long_run_slope: float = 0.0


@dataclass(frozen=True)
class StaticIntercept:
    pass


@dataclass(frozen=True)
class WeeklySeasonal:
    sigma_seasonal: float = 0.0
    period: int = 7


@dataclass(frozen=True, eq=False)
class Regression:
    design: np.ndarray
    coefficients: np.ndarray


TREND_TYPES = (LocalLevel, LocalLinear, SemiLocalLinear, StaticIntercept)


def _check_sd(*values: float) -> None:
    for v in values:
        if not (v >= 0 and np.isfinite(v)):
            raise InputError(f"standard deviations must be finite and >= 0, got {v}")


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    Z: np.ndarray
    T: np.ndarray
    R: np.ndarray
    Q: np.ndarray
    H: float
    a1: np.ndarray
    P1: np.ndarray
    offset: np.ndarray | None = None
    blocks: tuple[tuple[str, int, int], ...] = ()
    noise_labels: tuple[str, ...] = ()
    components: tuple = field(default=(), repr=False)

    @property
    def m(self) -> int:
        return self.Z.size

    @property
    def RQR(self) -> np.ndarray:
        return (self.R * self.Q) @ self.R.T

    def block(self, label: str) -> slice:
        for name, i, j in self.blocks:
            if name == label:
                return slice(i, j)
        raise KeyError(label)

    def has_block(self, label: str) -> bool:
        return any(name == label for name, _, _ in self.blocks)

    def offsets(self, n: int) -> np.ndarray:
        if self.offset is None:
            return np.zeros(n)
        off = np.asarray(self.offset, dtype=float)
        if off.size != n:
            raise InputError(f"regression offset has {off.size} days, data has {n}")
        return off

    def with_params(
        self,
        Q: np.ndarray | None = None,
        H: float | None = None,
        offset: np.ndarray | None = None,
        ar_coef: float | None = None,
    ) -> "StateSpaceModel":
        T = self.T
        if ar_coef is not None:
            T = self.T.copy()
            i = self.block("semi_local_linear").start + 1
            T[i, i] = ar_coef
            T[i, i + 1] = 1.0 - ar_coef
        return replace(
            self,
            T=T,
            Q=self.Q if Q is None else np.asarray(Q, dtype=float),
            H=self.H if H is None else float(H),
            offset=self.offset if offset is None else offset,
        )


def _component_block(comp):
    """Return (label, T, Z, R, Q, a1, noise labels) for one component."""
    if isinstance(comp, LocalLevel):
        _check_sd(comp.sigma_level)
        return ("local_level", np.ones((1, 1)), np.ones(1), np.ones((1, 1)),
                [comp.sigma_level**2], np.zeros(1), ["level"])
    if isinstance(comp, LocalLinear):
        _check_sd(comp.sigma_level, comp.sigma_slope)
        T = np.array([[1.0, 1.0], [0.0, 1.0]])
        return ("local_linear", T, np.array([1.0, 0.0]), np.eye(2),
                [comp.sigma_level**2, comp.sigma_slope**2], np.zeros(2), ["level", "slope"])
    if isinstance(comp, SemiLocalLinear):
        _check_sd(comp.sigma_level, comp.sigma_slope)
        rho = comp.ar_coef
        if not -1.0 < rho < 1.0:
            raise InputError(f"slope AR coefficient must lie in (-1, 1), got {rho}")
        T = np.array([[1.0, 1.0, 0.0], [0.0, rho, 1.0 - rho], [0.0, 0.0, 1.0]])
        R = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        a1 = np.array([0.0, 0.0, comp.long_run_slope])
        return ("semi_local_linear", T, np.array([1.0, 0.0, 0.0]), R,
                [comp.sigma_level**2, comp.sigma_slope**2], a1, ["level", "slope"])
    if isinstance(comp, StaticIntercept):
        return ("static_intercept", np.ones((1, 1)), np.ones(1), np.zeros((1, 0)), [], np.zeros(1), [])
    if isinstance(comp, WeeklySeasonal):
        _check_sd(comp.sigma_seasonal)
        S = int(comp.period)
        if S < 2:
            raise InputError(f"seasonal period must be >= 2, got {S}")
        k = S - 1
        T = np.zeros((k, k))
        T[0, :] = -1.0
        T[1:, :-1] = np.eye(k - 1)
        Z = np.zeros(k)
        Z[0] = 1.0
        R = np.zeros((k, 1))
        R[0, 0] = 1.0
        return ("seasonal", T, Z, R, [comp.sigma_seasonal**2], np.zeros(k), ["seasonal"])
    raise InputError(f"unknown component {comp!r}")


def assemble(
    components: Sequence,
    obs_variance: float = 0.0,
    initial_scale: float = DIFFUSE_SCALE,
) -> StateSpaceModel:
    """Stack components block-diagonally into one :class:`StateSpaceModel`."""
    components = list(components)
    if not components:
        raise InputError("at least one component is required")
    if sum(isinstance(c, TREND_TYPES) for c in components) > 1:
        raise DuplicateTrend("at most one trend component is allowed")
    if sum(isinstance(c, WeeklySeasonal) for c in components) > 1:
        raise DuplicateSeasonal("at most one seasonal component is allowed")
    regressions = [c for c in components if isinstance(c, Regression)]
    if len(regressions) > 1:
        raise InputError("at most one regression component is allowed")
    if not obs_variance >= 0:
        raise InputError(f"observation variance must be >= 0, got {obs_variance}")

    parts = [_component_block(c) for c in components if not isinstance(c, Regression)]
    if not parts:
        raise InputError("a regression alone has no state; add a trend component")
    m = sum(p[1].shape[0] for p in parts)
    r = sum(p[3].shape[1] for p in parts)
    T = np.zeros((m, m))
    R = np.zeros((m, r))
    Z = np.zeros(m)
    a1 = np.zeros(m)
    Q = []
    blocks = []
    labels = []
    i = j = 0
    for label, Tb, Zb, Rb, Qb, ab, nl in parts:
        k, q = Tb.shape[0], Rb.shape[1]
        T[i : i + k, i : i + k] = Tb
        R[i : i + k, j : j + q] = Rb
        Z[i : i + k] = Zb
        a1[i : i + k] = ab
        Q.extend(Qb)
        labels.extend(nl)
        blocks.append((label, i, i + k))
        i += k
        j += q

    offset = None
    if regressions:
        reg = regressions[0]
        X = np.atleast_2d(np.asarray(reg.design, dtype=float))
        beta = np.asarray(reg.coefficients, dtype=float).ravel()
        if X.shape[1] != beta.size:
            raise InputError(f"design has {X.shape[1]} columns but {beta.size} coefficients")
        offset = X @ beta

    return StateSpaceModel(
        Z=Z, T=T, R=R, Q=np.asarray(Q, dtype=float), H=float(obs_variance),
        a1=a1, P1=initial_scale * np.eye(m), offset=offset,
        blocks=tuple(blocks), noise_labels=tuple(labels), components=tuple(components),
    )


def _as_array(y) -> np.ndarray:
    if isinstance(y, DateIndexedSeries):
        return np.array(y.values, dtype=float)
    arr = np.array(y, dtype=float).ravel()
    if arr.size == 0:
        raise InputError("observation series is empty")
    return arr


@dataclass(frozen=True, eq=False)
class FilterResult:
    predicted_mean: np.ndarray  # (n + 1, m); last row predicts the day after the data
    predicted_cov: np.ndarray
    filtered_mean: np.ndarray  # (n, m)
    filtered_cov: np.ndarray
    forecast_mean: np.ndarray  # one-step-ahead E[y_t | y_1..t-1]
    forecast_var: np.ndarray
    innovations: np.ndarray
    used: np.ndarray
    loglik: float


@dataclass(frozen=True, eq=False)
class SmootherResult:
    mean: np.ndarray
    cov: np.ndarray


def _run_filter(model: StateSpaceModel, y: np.ndarray):
    out = _kernels.kalman_filter(
        y, model.offsets(y.size), model.Z, model.T, model.RQR, model.H, model.a1, model.P1
    )
    if out[-1] >= 0:
        raise NumericalFailure(f"negative prediction variance on day {out[-1]}")
    return out


def kalman_filter(model: StateSpaceModel, y) -> FilterResult:
    """Forward recursion; missing days get a prediction step only."""
    y = _as_array(y)
    a_pred, P_pred, a_filt, P_filt, v, F, used, loglik, _ = _run_filter(model, y)
    return FilterResult(
        predicted_mean=a_pred,
        predicted_cov=P_pred,
        filtered_mean=a_filt,
        filtered_cov=P_filt,
        forecast_mean=a_pred[:-1] @ model.Z + model.offsets(y.size),
        forecast_var=F,
        innovations=v,
        used=used,
        loglik=float(loglik),
    )


def kalman_smoother(model: StateSpaceModel, y) -> SmootherResult:
    """Moments of each day's state given every observation."""
    y = _as_array(y)
    a_pred, P_pred, _, _, v, F, used, _, _ = _run_filter(model, y)
    mean, cov = _kernels.state_smoother(model.Z, model.T, a_pred, P_pred, v, F, used, True)
    return SmootherResult(mean, cov)


def _initial_chol(P1: np.ndarray) -> np.ndarray:
    if np.count_nonzero(P1 - np.diag(np.diag(P1))) == 0:
        return np.diag(np.sqrt(np.clip(np.diag(P1), 0.0, None)))
    w, V = np.linalg.eigh(P1)
    return V * np.sqrt(np.clip(w, 0.0, None))


def draw_states(model: StateSpaceModel, y: np.ndarray, rng: np.random.Generator,
                P1_chol: np.ndarray | None = None) -> np.ndarray:
    """Single simulation-smoother draw for an ndarray ``y`` (hot path)."""
    n = y.size
    r = model.R.shape[1]
    if P1_chol is None:
        P1_chol = _initial_chol(model.P1)
    z0 = rng.standard_normal(model.m)
    z_state = rng.standard_normal((n, r))
    z_obs = rng.standard_normal(n)
    draw, fail = _kernels.simulation_smoother(
        y, model.offsets(n), model.Z, model.T, model.R, np.sqrt(model.Q), np.sqrt(model.H),
        model.P1, P1_chol, model.a1, z0, z_state, z_obs,
    )
    if fail >= 0:
        raise NumericalFailure(f"negative prediction variance on day {fail}")
    return draw


def simulation_smoother(model: StateSpaceModel, y, rng_seed=None) -> np.ndarray:
    """Draw one state path (n, m) from p(states | y).

    ``rng_seed`` may be an int, a ``numpy.random.Generator`` or None.
    """
    rng = np.random.default_rng(rng_seed)
    return draw_states(model, _as_array(y), rng)


@dataclass(frozen=True, eq=False)
class Forecast:
    mean: np.ndarray
    var: np.ndarray
    paths: np.ndarray | None = None


def forecast(
    model: StateSpaceModel,
    state_mean: np.ndarray,
    state_cov: np.ndarray,
    horizon: int,
    offsets=None,
    n_paths: int = 0,
    rng=None,
) -> Forecast:
    """Predict ``horizon`` days past a filtered state ``N(state_mean, state_cov)``.

    ``offsets`` are the regression contributions for the future days.  When
    ``n_paths > 0`` that many sample paths are drawn as well.
    """
    if horizon < 1:
        raise InputError(f"horizon must be >= 1, got {horizon}")
    state_mean = np.asarray(state_mean, dtype=float)
    state_cov = np.asarray(state_cov, dtype=float)
    if state_mean.shape != (model.m,) or state_cov.shape != (model.m, model.m):
        raise InputError("terminal state does not match the model's state dimension")
    off = np.zeros(horizon) if offsets is None else np.asarray(offsets, dtype=float)
    if off.shape != (horizon,):
        raise InputError(f"need {horizon} future offsets, got {off.shape}")

    RQR = model.RQR
    a, P = state_mean, state_cov
    mean = np.empty(horizon)
    var = np.empty(horizon)
    for h in range(horizon):
        a = model.T @ a
        P = model.T @ P @ model.T.T + RQR
        P = 0.5 * (P + P.T)
        mean[h] = model.Z @ a + off[h]
        var[h] = model.Z @ P @ model.Z + model.H

    paths = None
    if n_paths:
        rng = np.random.default_rng(rng)
        alpha = rng.multivariate_normal(state_mean, state_cov, size=n_paths, method="eigh")
        q_sd = np.sqrt(model.Q)
        paths = np.empty((n_paths, horizon))
        for h in range(horizon):
            alpha = alpha @ model.T.T + (rng.standard_normal((n_paths, q_sd.size)) * q_sd) @ model.R.T
            paths[:, h] = alpha @ model.Z + off[h] + np.sqrt(model.H) * rng.standard_normal(n_paths)
    return Forecast(mean, var, paths)
