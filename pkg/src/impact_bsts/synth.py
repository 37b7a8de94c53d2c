"""Synthetic daily series with known components, plus intervention injection.

The treated series follows

    y_t = mu_t + tau_t + sum_j beta_j x_jt + eps_t

with a chosen trend for ``mu``, an optional weekly seasonal ``tau`` and
controls ``x`` built from a recipe.  Every latent piece is returned so
tests can check estimates against the truth.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .series import DateIndexedSeries, SeriesPanel, to_date

TREND_KINDS = ("local_level", "local_linear", "semi_local_linear", "static_intercept")
CONTROL_SOURCES = ("level", "walk", "noise")


@dataclass(frozen=True)
class ControlRecipe:
    """One control: ``loc + scale * (rho * z + sqrt(1 - rho^2) * e)``.

    ``z`` is the standardized driver (the treated series' latent level for
    source ``"level"``, an independent random walk for ``"walk"``, nothing
    for ``"noise"``) and ``e`` is white noise.  ``beta`` is the control's
    coefficient in the treated series, in treated units per control unit.
    """

    name: str
    beta: float = 0.0
    correlation: float = 0.9
    loc: float = 100.0
    scale: float = 10.0
    source: str = "level"

    def __post_init__(self):
        if not -1.0 <= self.correlation <= 1.0:
            raise InputError(f"correlation must lie in [-1, 1], got {self.correlation}")
        if self.source not in CONTROL_SOURCES:
            raise InputError(f"unknown control source {self.source!r}")
        if self.scale < 0:
            raise InputError("control scale must be >= 0")


@dataclass(frozen=True)
class SynthSpec:
    length: int = 400
    start: dt.date = dt.date(2020, 1, 1)
    trend: str = "local_level"
    level_sd: float = 1.0
    slope_sd: float = 0.0
    seasonal_sd: float = 0.0
    obs_sd: float = 1.0
    initial_level: float = 100.0
    initial_slope: float = 0.0
    long_run_slope: float = 0.0
    ar_coef: float = 0.5
    weekly_pattern: tuple[float, ...] | None = None
    controls: tuple[ControlRecipe, ...] = ()
    seed: int = 0
    name: str = "treated"

    def __post_init__(self):
        object.__setattr__(self, "start", to_date(self.start))
        object.__setattr__(self, "controls", tuple(self.controls))
        if self.length < 1:
            raise InputError("length must be >= 1")
        if self.trend not in TREND_KINDS:
            raise InputError(f"unknown trend {self.trend!r}")
        for sd in (self.level_sd, self.slope_sd, self.seasonal_sd, self.obs_sd):
            if not sd >= 0:
                raise InputError("standard deviations must be >= 0")
        if self.weekly_pattern is not None and len(self.weekly_pattern) != 7:
            raise InputError("weekly_pattern needs 7 values")
        names = [self.name] + [c.name for c in self.controls]
        if len(set(names)) != len(names):
            raise InputError("series names must be unique")


@dataclass(frozen=True, eq=False)
class SynthTruth:
    level: np.ndarray
    slope: np.ndarray
    seasonal: np.ndarray
    regression: np.ndarray
    noise: np.ndarray

    @property
    def signal(self) -> np.ndarray:
        return self.level + self.seasonal + self.regression


def _zscore(v: np.ndarray) -> np.ndarray:
    sd = v.std(ddof=1) if v.size > 1 else 0.0
    if not sd > 0:
        return np.zeros_like(v)
    return (v - v.mean()) / sd


def _trend(spec: SynthSpec, rng: np.random.Generator):
    n = spec.length
    level = np.empty(n)
    slope = np.zeros(n)
    if spec.trend == "static_intercept":
        level[:] = spec.initial_level
        return level, slope
    eta = rng.normal(0.0, 1.0, n) * spec.level_sd
    v = rng.normal(0.0, 1.0, n) * spec.slope_sd
    level[0] = spec.initial_level
    slope[0] = spec.initial_slope if spec.trend != "local_level" else 0.0
    for t in range(n - 1):
        level[t + 1] = level[t] + slope[t] + eta[t]
        if spec.trend == "local_linear":
            slope[t + 1] = slope[t] + v[t]
        elif spec.trend == "semi_local_linear":
            D = spec.long_run_slope
            slope[t + 1] = D + spec.ar_coef * (slope[t] - D) + v[t]
    return level, slope


def _seasonal(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    n = spec.length
    w = rng.normal(0.0, 1.0, n) * spec.seasonal_sd
    tau = np.zeros(n)
    if spec.weekly_pattern is None and spec.seasonal_sd == 0:
        return tau
    pattern = np.zeros(7) if spec.weekly_pattern is None else np.asarray(spec.weekly_pattern)
    pattern = pattern - pattern.mean()
    k = min(6, n)
    tau[:k] = pattern[:k]
    for t in range(6, n):
        tau[t] = -tau[t - 6 : t].sum() + w[t]
    return tau


def generate(spec: SynthSpec) -> tuple[SeriesPanel, SynthTruth]:
    """Simulate the treated series and its controls."""
    rng = np.random.default_rng(spec.seed)
    level, slope = _trend(spec, rng)
    seasonal = _seasonal(spec, rng)
    z_level = _zscore(level)
    controls = []
    regression = np.zeros(spec.length)
    for recipe in spec.controls:
        if recipe.source == "level":
            driver = z_level
        elif recipe.source == "walk":
            driver = _zscore(np.cumsum(rng.normal(size=spec.length)))
        else:
            driver = np.zeros(spec.length)
        rho = recipe.correlation if recipe.source != "noise" else 0.0
        e = rng.normal(size=spec.length)
        x = recipe.loc + recipe.scale * (rho * driver + math.sqrt(1.0 - rho**2) * e)
        regression = regression + recipe.beta * x
        controls.append(DateIndexedSeries(recipe.name, spec.start, x))
    noise = rng.normal(0.0, 1.0, spec.length) * spec.obs_sd
    y = level + seasonal + regression + noise
    truth = SynthTruth(level, slope, seasonal, regression, noise)
    panel = SeriesPanel(DateIndexedSeries(spec.name, spec.start, y), tuple(controls))
    return panel, truth


INTERVENTION_KINDS = ("step", "pulse", "linear-decay")


@dataclass(frozen=True)
class Intervention:
    kind: str
    start: dt.date
    magnitude: float
    duration: int = 1

    def __post_init__(self):
        object.__setattr__(self, "start", to_date(self.start))
        if self.kind not in INTERVENTION_KINDS:
            raise InputError(f"unknown intervention kind {self.kind!r}")
        if not self.magnitude > -1:
            raise InputError(f"relative magnitude must be > -1, got {self.magnitude}")
        if self.kind != "step" and self.duration < 1:
            raise InputError("pulse and linear-decay need duration >= 1")

    def factors(self, n_after: int) -> np.ndarray:
        """Multipliers for the ``n_after`` days from the start date on."""
        k = np.arange(n_after)
        m = self.magnitude
        if self.kind == "step":
            return np.full(n_after, 1.0 + m)
        if self.kind == "pulse":
            return np.where(k < self.duration, 1.0 + m, 1.0)
        return np.where(k < self.duration, 1.0 + m * (1.0 - k / self.duration), 1.0)


def inject(series: DateIndexedSeries, intervention: Intervention) -> DateIndexedSeries:
    """Apply a relative effect from ``intervention.start`` on; earlier days are untouched."""
    if not series.start_date <= intervention.start <= series.end_date:
        raise InputError(
            f"intervention start {intervention.start} outside {series.start_date}.."
            f"{series.end_date}"
        )
    i = series.index_of(intervention.start)
    values = np.array(series.values, dtype=float)
    values[i:] = values[i:] * intervention.factors(values.size - i)
    return series.with_values(values)


def with_intervention(panel: SeriesPanel, intervention: Intervention) -> SeriesPanel:
    """Inject into the treated series only; controls are unaffected by design."""
    return SeriesPanel(inject(panel.treated, intervention), panel.controls, panel.covariates)
