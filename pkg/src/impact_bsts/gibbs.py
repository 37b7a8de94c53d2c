"""Posterior sampler for the structural model with spike-and-slab regression.

Each iteration runs three blocks in order:

1. state path given variances and the regression offset (simulation smoother);
2. each state-innovation variance given the path (inverse gamma), plus the
   slope AR coefficient for a semi-local linear trend;
3. inclusion indicators, coefficients and observation variance given the
   residual ``y - Z'alpha`` (spike and slab).

Everything runs on the standardized treated series.  Controls and
covariates are standardized with their own pre-period moments; month and
holiday indicators enter unscaled and are always included.
"""

from __future__ import annotations

import datetime as dt
import logging
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy import stats

from .errors import InputError, MissingPostCovariate, NumericalError
from .series import (
    ONE_DAY,
    SeriesPanel,
    StandardizeParams,
    fit_standardize,
    seasonal_regressors,
    to_date,
)
from .spike_slab import SpikeSlabSampler, build_prior
from .state_space import (
    LocalLevel,
    LocalLinear,
    SemiLocalLinear,
    StateSpaceModel,
    StaticIntercept,
    WeeklySeasonal,
    _initial_chol,
    assemble,
    draw_states,
)

logger = logging.getLogger(__name__)

TRENDS = ("local_level", "local_linear", "semi_local_linear", "static_intercept")
VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class ModelSpec:
    """What goes into the model, plus its prior settings (standardized scale)."""

    trend: str = "local_level"
    weekly_seasonal: bool = True
    monthly: bool = True
    holidays: tuple = ()
    state_sd_guess: float = 0.01
    state_prior_df: float = 3.0
    expected_model_size: float | None = None
    prior_inclusion: Mapping[str, float] | None = None
    information_weight: float = 0.5
    residual_df: float = 0.01
    residual_sd: float = 0.3
    prior_sample_size: float = 0.01
    initial_ar_coef: float = 0.5

    def __post_init__(self):
        if self.trend not in TRENDS:
            raise InputError(f"unknown trend {self.trend!r}; choose from {TRENDS}")
        if self.state_sd_guess <= 0 or self.state_prior_df <= 0:
            raise InputError("state prior sd guess and df must be > 0")
        holidays = tuple(
            (str(name), tuple(to_date(d) for d in dates)) for name, dates in self.holidays
        )
        object.__setattr__(self, "holidays", holidays)

    def components(self) -> list:
        s = self.state_sd_guess
        trend = {
            "local_level": LocalLevel(s),
            "local_linear": LocalLinear(s, s),
            "semi_local_linear": SemiLocalLinear(s, s, self.initial_ar_coef),
            "static_intercept": StaticIntercept(),
        }[self.trend]
        comps = [trend]
        if self.weekly_seasonal:
            comps.append(WeeklySeasonal(s))
        return comps


@dataclass(frozen=True)
class McmcConfig:
    iterations: int = 1000
    burn_in: int = 200
    seed: int = 0
    chains: int = 1

    def __post_init__(self):
        if self.iterations < 1 or self.chains < 1:
            raise InputError("iterations and chains must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise InputError("burn_in must satisfy 0 <= burn_in < iterations")

    @property
    def kept_per_chain(self) -> int:
        return self.iterations - self.burn_in


@dataclass(frozen=True)
class InverseGammaPrior:
    """``sigma^2 ~ IG(shape, scale)``."""

    shape: float
    scale: float

    @property
    def sd_mode(self) -> float:
        """Mode of the implied density of ``sigma``."""
        return math.sqrt(2.0 * self.scale / (2.0 * self.shape + 1.0))

    def posterior(self, n: int, sum_sq: float) -> "InverseGammaPrior":
        return InverseGammaPrior(self.shape + 0.5 * n, self.scale + 0.5 * sum_sq)

    def draw(self, rng: np.random.Generator) -> float:
        return self.scale / rng.gamma(self.shape)


def variance_prior(component: str = "level", prior_sd_guess: float = 0.01,
                   df: float = 3.0) -> InverseGammaPrior:
    """Inverse-gamma prior on an innovation variance.

    Shape is ``df / 2``; the scale is set so the prior mode of the standard
    deviation equals ``prior_sd_guess``.  ``component`` is informational;
    every state component uses the same recipe.
    """
    if prior_sd_guess <= 0:
        raise InputError(f"prior sd guess must be > 0, got {prior_sd_guess}")
    shape = df / 2.0
    return InverseGammaPrior(shape, 0.5 * (df + 1.0) * prior_sd_guess**2)


@dataclass(frozen=True, eq=False)
class DesignLayout:
    """Column bookkeeping shared by fitting and prediction."""

    forced_names: tuple[str, ...]
    selectable_names: tuple[str, ...]
    selectable_params: tuple[StandardizeParams, ...]

    @property
    def names(self) -> tuple[str, ...]:
        return self.forced_names + self.selectable_names

    @property
    def n_forced(self) -> int:
        return len(self.forced_names)

    def forced_block(self, spec: ModelSpec, start, end) -> np.ndarray:
        start, end = to_date(start), to_date(end)
        n = (end - start).days + 1
        if not self.forced_names:
            return np.zeros((n, 0))
        regs = {r.name: r.values for r in _calendar_regressors(spec, start, end)}
        return np.column_stack([regs[name] for name in self.forced_names])

    def selectable_block(self, panel: SeriesPanel, required=()) -> np.ndarray:
        by_name = {s.name: s for s in panel.regressors}
        cols = []
        for name, params in zip(self.selectable_names, self.selectable_params):
            s = by_name.get(name)
            if s is None:
                if name in required:
                    raise MissingPostCovariate(f"no post-period data for regressor {name!r}")
                cols.append(np.zeros(len(panel)))
                continue
            values = params.apply(s.values)
            if np.isnan(values).any():
                if name in required:
                    raise MissingPostCovariate(f"regressor {name!r} has missing post-period values")
                values = np.nan_to_num(values)
            cols.append(values)
        if not cols:
            return np.zeros((len(panel), 0))
        return np.column_stack(cols)


def _calendar_regressors(spec: ModelSpec, start, end):
    regs = seasonal_regressors(start, end, spec.holidays)
    if not spec.monthly:
        regs = regs[11:]
    return regs


def _layout_for(spec: ModelSpec, panel: SeriesPanel) -> tuple[DesignLayout, np.ndarray]:
    forced = [r for r in _calendar_regressors(spec, panel.start_date, panel.end_date)
              if r.values.any()]
    months = [r for r in forced if r.name.startswith("month_")]
    # Without January in the window the month dummies sum to one on every
    # row and duplicate the trend's intercept.
    if months and np.all(np.sum([r.values for r in months], axis=0) == 1):
        forced.remove(months[0])
    params = []
    cols = []
    for s in panel.regressors:
        if s.missing.any():
            s = s.interpolated()
        p = fit_standardize(s.values)
        params.append(p)
        cols.append(p.apply(s.values))
    layout = DesignLayout(
        tuple(r.name for r in forced),
        tuple(s.name for s in panel.regressors),
        tuple(params),
    )
    X = np.column_stack([r.values for r in forced] + cols) if (forced or cols) else np.zeros(
        (len(panel), 0)
    )
    return layout, X


@dataclass(frozen=True, eq=False)
class PosteriorSamples:
    spec: ModelSpec
    config: McmcConfig
    start_date: dt.date
    treated_name: str
    treated_params: StandardizeParams
    layout: DesignLayout
    model: StateSpaceModel
    y_std: np.ndarray
    design: np.ndarray  # (days, columns), forced columns first
    state_paths: np.ndarray  # (draws, days, states)
    state_variances: np.ndarray  # (draws, noise terms), labels in model.noise_labels
    obs_variance: np.ndarray  # (draws,)
    gamma: np.ndarray  # (draws, columns) bool
    beta: np.ndarray  # (draws, columns)
    ar_coef: np.ndarray | None = None
    chain: np.ndarray | None = None

    @property
    def n_draws(self) -> int:
        return self.beta.shape[0]

    @property
    def n_obs(self) -> int:
        return self.y_std.size

    @property
    def end_date(self) -> dt.date:
        return self.start_date + dt.timedelta(days=self.n_obs - 1)

    @property
    def selectable_names(self) -> tuple[str, ...]:
        return self.layout.selectable_names

    def variance(self, label: str) -> np.ndarray:
        """Draws of one state-innovation variance, e.g. ``"level"``."""
        return self.state_variances[:, self.model.noise_labels.index(label)]

    def model_for_draw(self, d: int, offset=None) -> StateSpaceModel:
        return self.model.with_params(
            Q=self.state_variances[d],
            H=self.obs_variance[d],
            offset=offset,
            ar_coef=None if self.ar_coef is None else self.ar_coef[d],
        )

    def post_design(self, panel: SeriesPanel, horizon: int) -> np.ndarray:
        """Design rows for ``horizon`` days right after the fitted window."""
        start = self.end_date + ONE_DAY
        end = start + dt.timedelta(days=horizon - 1)
        if panel.start_date != start or len(panel) < horizon:
            raise InputError(
                f"post-period panel must start on {start} and cover {horizon} days; "
                f"got {panel.start_date}..{panel.end_date}"
            )
        panel = panel.window(start, end)
        pip = dict(zip(self.selectable_names, inclusion_probabilities(self).values()))
        required = {name for name, p in pip.items() if p > 0}
        forced = self.layout.forced_block(self.spec, start, end)
        return np.hstack([forced, self.layout.selectable_block(panel, required)])


def _wrap(exc: NumericalError, iteration: int) -> NumericalError:
    return type(exc)(str(exc), iteration=iteration)


def _draw_ar_coef(slope, long_run, sigma2, current, rng):
    z = slope - long_run
    zp, zn = z[:-1], z[1:]
    ss = float(zp @ zp)
    if ss < 1e-300:
        return current
    mean = float(zp @ zn) / ss
    sd = math.sqrt(sigma2 / ss)
    a, b = (-1.0 - mean) / sd, (1.0 - mean) / sd
    rho = stats.truncnorm.rvs(a, b, loc=mean, scale=sd, random_state=rng)
    return float(np.clip(rho, -1 + 1e-9, 1 - 1e-9))


def _run_chain(spec, config, model, sampler, X, y, present, chain):
    rng = np.random.default_rng([config.seed, chain])
    n = y.size
    p = X.shape[1]
    Xo = X[present]
    n_obs = int(present.sum())
    labels = model.noise_labels
    priors = [variance_prior(lab, spec.state_sd_guess, spec.state_prior_df) for lab in labels]
    P1_chol = _initial_chol(model.P1)
    semi = model.has_block("semi_local_linear")
    slope_idx = model.block("semi_local_linear").start + 1 if semi else None

    q = np.full(len(labels), spec.state_sd_guess**2)
    sigma2 = 1.0
    rho = spec.initial_ar_coef if semi else None
    gamma = np.zeros(p, dtype=bool)
    gamma[list(sampler.prior.forced_in)] = True
    beta = np.zeros(p)

    kept = config.kept_per_chain
    out = {
        "states": np.empty((kept, n, model.m)),
        "q": np.empty((kept, len(labels))),
        "h": np.empty(kept),
        "gamma": np.empty((kept, p), dtype=bool),
        "beta": np.empty((kept, p)),
        "rho": np.empty(kept) if semi else None,
    }
    for it in range(config.iterations):
        try:
            current = model.with_params(Q=q, H=sigma2, offset=X @ beta, ar_coef=rho)
            alpha = draw_states(current, y, rng, P1_chol)

            if labels:
                innov = (alpha[1:] - alpha[:-1] @ current.T.T) @ current.R
                for k, prior in enumerate(priors):
                    post = prior.posterior(n - 1, float(innov[:, k] @ innov[:, k]))
                    q[k] = max(post.draw(rng), VARIANCE_FLOOR)
            if semi:
                rho = _draw_ar_coef(
                    alpha[:, slope_idx], alpha[:, slope_idx + 1],
                    q[labels.index("slope")], rho, rng,
                )

            resid = (y - alpha @ model.Z)[present]
            stats_ = (Xo.T @ resid, float(resid @ resid), n_obs)
            gamma = sampler.sweep(gamma, *stats_, rng)
            beta, sigma2 = sampler.draw(gamma, *stats_, rng)
            sigma2 = max(sigma2, VARIANCE_FLOOR)
        except NumericalError as exc:
            raise _wrap(exc, it) from exc

        k = it - config.burn_in
        if k >= 0:
            out["states"][k] = alpha
            out["q"][k] = q
            out["h"][k] = sigma2
            out["gamma"][k] = gamma
            out["beta"][k] = beta
            if semi:
                out["rho"][k] = rho
    return out


def fit(spec: ModelSpec, panel: SeriesPanel, config: McmcConfig = McmcConfig()) -> PosteriorSamples:
    """Sample the posterior on a pre-intervention panel."""
    y_raw = np.asarray(panel.treated.values, dtype=float)
    present = ~np.isnan(y_raw)
    if present.sum() < 2:
        raise InputError("treated series needs at least 2 observed days")
    y_params = fit_standardize(y_raw)
    y = y_params.apply(y_raw)

    layout, X = _layout_for(spec, panel)
    selectable = layout.selectable_names
    overrides = dict(spec.prior_inclusion or {})
    unknown = set(overrides) - set(selectable)
    if unknown:
        raise InputError(f"prior_inclusion names unknown regressors: {sorted(unknown)}")
    probs = None
    if overrides or any(p.degenerate for p in layout.selectable_params):
        base = build_prior(0, len(selectable), spec.expected_model_size).inclusion_prob
        probs = [
            0.0 if params.degenerate else overrides.get(name, base[j])
            for j, (name, params) in enumerate(zip(selectable, layout.selectable_params))
        ]
    prior = build_prior(
        layout.n_forced,
        len(selectable),
        spec.expected_model_size,
        probs,
        information_weight=spec.information_weight,
        residual_df=spec.residual_df,
        residual_sd=spec.residual_sd,
        prior_sample_size=spec.prior_sample_size,
    )
    sampler = SpikeSlabSampler(prior, X[present])
    model = assemble(spec.components())

    runs = [
        _run_chain(spec, config, model, sampler, X, y, present, c) for c in range(config.chains)
    ]
    cat = lambda key: np.concatenate([r[key] for r in runs])
    return PosteriorSamples(
        spec=spec,
        config=config,
        start_date=panel.start_date,
        treated_name=panel.treated.name,
        treated_params=y_params,
        layout=layout,
        model=model,
        y_std=y,
        design=X,
        state_paths=cat("states"),
        state_variances=cat("q"),
        obs_variance=cat("h"),
        gamma=cat("gamma"),
        beta=cat("beta"),
        ar_coef=cat("rho") if runs[0]["rho"] is not None else None,
        chain=np.repeat(np.arange(config.chains), config.kept_per_chain),
    )


def inclusion_probabilities(samples: PosteriorSamples) -> dict[str, float]:
    """Share of retained draws in which each control/covariate is included."""
    k = samples.layout.n_forced
    freq = samples.gamma[:, k:].mean(axis=0)
    return {name: float(f) for name, f in zip(samples.selectable_names, freq)}


def standardized_coefficients(samples: PosteriorSamples) -> dict[str, float]:
    """Posterior mean coefficient per regressor, zeros included, standardized scale."""
    k = samples.layout.n_forced
    mean = samples.beta[:, k:].mean(axis=0)
    return {name: float(b) for name, b in zip(samples.selectable_names, mean)}


def one_step_predictions(samples: PosteriorSamples) -> np.ndarray:
    """One-step-ahead means on the standardized scale, at posterior-mean parameters."""
    from .state_space import kalman_filter

    model = samples.model.with_params(
        Q=samples.state_variances.mean(axis=0),
        H=float(samples.obs_variance.mean()),
        offset=samples.design @ samples.beta.mean(axis=0),
        ar_coef=None if samples.ar_coef is None else float(samples.ar_coef.mean()),
    )
    return kalman_filter(model, samples.y_std).forecast_mean
