"""Counterfactual prediction and effect summaries for the post-intervention window."""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDraws, InputError
from .gibbs import McmcConfig, ModelSpec, PosteriorSamples, fit
from .series import DateIndexedSeries, SeriesPanel, to_date

MIN_DRAWS = 100


def predict_counterfactual(
    samples: PosteriorSamples, post_covariates: SeriesPanel, horizon: int, rng=None
) -> np.ndarray:
    """Posterior predictive draws ``(n_draws, horizon)`` on the original scale.

    Each retained draw starts from its own sampled state on the last fitted
    day and steps forward with its own variances and coefficients.
    """
    if horizon < 1:
        raise InputError(f"horizon must be >= 1, got {horizon}")
    rng = np.random.default_rng(rng)
    X = samples.post_design(post_covariates, horizon)
    offsets = samples.beta @ X.T  # (draws, horizon)

    model = samples.model
    D = samples.n_draws
    m = model.m
    alpha = samples.state_paths[:, -1, :].copy()
    if samples.ar_coef is None:
        T = np.broadcast_to(model.T, (D, m, m))
    else:
        T = np.stack([model.with_params(ar_coef=rho).T for rho in samples.ar_coef])
    noise_sd = np.sqrt(samples.state_variances)  # (draws, r)
    obs_sd = np.sqrt(samples.obs_variance)
    z_state = rng.standard_normal((horizon, D, model.R.shape[1]))
    z_obs = rng.standard_normal((horizon, D))

    out = np.empty((D, horizon))
    for h in range(horizon):
        alpha = np.einsum("dij,dj->di", T, alpha) + (noise_sd * z_state[h]) @ model.R.T
        out[:, h] = alpha @ model.Z + offsets[:, h] + obs_sd * z_obs[h]
    return samples.treated_params.invert(out)


def counterfactual_mean(
    samples: PosteriorSamples, post_covariates: SeriesPanel, horizon: int
) -> np.ndarray:
    """Posterior mean of the counterfactual (no simulation noise), original scale."""
    if horizon < 1:
        raise InputError(f"horizon must be >= 1, got {horizon}")
    X = samples.post_design(post_covariates, horizon)
    offsets = samples.beta @ X.T
    model = samples.model
    alpha = samples.state_paths[:, -1, :]
    out = np.empty((samples.n_draws, horizon))
    if samples.ar_coef is None:
        for h in range(horizon):
            alpha = alpha @ model.T.T
            out[:, h] = alpha @ model.Z
    else:
        T = np.stack([model.with_params(ar_coef=rho).T for rho in samples.ar_coef])
        for h in range(horizon):
            alpha = np.einsum("dij,dj->di", T, alpha)
            out[:, h] = alpha @ model.Z
    return samples.treated_params.invert((out + offsets).mean(axis=0))


def fitted_mean(samples: PosteriorSamples) -> np.ndarray:
    """Posterior mean of the in-sample signal (states plus regression), original scale."""
    signal = samples.state_paths @ samples.model.Z + samples.beta @ samples.design.T
    return samples.treated_params.invert(signal.mean(axis=0))


def interval_direction(lower: float, upper: float) -> str | None:
    """``"increase"``/``"decrease"`` when 0 lies strictly outside ``[lower, upper]``."""
    if lower > 0:
        return "increase"
    if upper < 0:
        return "decrease"
    return None


@dataclass(frozen=True, eq=False)
class Band:
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @classmethod
    def of(cls, draws: np.ndarray, level: float) -> "Band":
        tail = (1.0 - level) / 2.0
        lo, hi = np.quantile(draws, [tail, 1.0 - tail], axis=0)
        return cls(draws.mean(axis=0), lo, hi)


@dataclass(frozen=True, eq=False)
class ImpactReport:
    dates: list[dt.date]
    actual: np.ndarray
    counterfactual: Band
    pointwise: Band
    cumulative: Band
    relative: Band  # scalar band, percent
    tail_probability: float
    significant: bool
    credible_level: float = 0.95
    n_draws: int = 0
    pointwise_draws: np.ndarray | None = field(default=None, repr=False)
    cumulative_draws: np.ndarray | None = field(default=None, repr=False)
    pre_dates: list[dt.date] = field(default_factory=list, repr=False)
    pre_actual: np.ndarray | None = field(default=None, repr=False)
    pre_fitted: np.ndarray | None = field(default=None, repr=False)

    @property
    def horizon(self) -> int:
        return len(self.dates)

    @property
    def intervention_date(self) -> dt.date:
        return self.dates[0]

    def summary(self) -> dict:
        direction = interval_direction(float(self.cumulative.lower[-1]),
                                       float(self.cumulative.upper[-1]))
        return {
            "intervention_date": self.intervention_date.isoformat(),
            "post_period_days": self.horizon,
            "credible_level": self.credible_level,
            "n_draws": self.n_draws,
            "actual_total": float(self.actual.sum()),
            "counterfactual_total": {
                "mean": float(self.counterfactual.mean.sum()),
            },
            "cumulative_effect": {
                "mean": float(self.cumulative.mean[-1]),
                "lower": float(self.cumulative.lower[-1]),
                "upper": float(self.cumulative.upper[-1]),
            },
            "relative_effect_percent": {
                "mean": float(self.relative.mean),
                "lower": float(self.relative.lower),
                "upper": float(self.relative.upper),
            },
            "tail_probability": self.tail_probability,
            "significant": self.significant,
            "direction": direction,
            "verdict": significance(self)[1],
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2) + "\n"

    CSV_COLUMNS = (
        "date", "actual",
        "counterfactual_mean", "counterfactual_lower", "counterfactual_upper",
        "pointwise_mean", "pointwise_lower", "pointwise_upper",
        "cumulative_mean", "cumulative_lower", "cumulative_upper",
    )

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_COLUMNS)
        for i, d in enumerate(self.dates):
            row = [self.actual[i]]
            for band in (self.counterfactual, self.pointwise, self.cumulative):
                row += [band.mean[i], band.lower[i], band.upper[i]]
            w.writerow([d.isoformat()] + [repr(float(v)) for v in row])
        return buf.getvalue()


def compute_impact(
    actual: DateIndexedSeries,
    draws: np.ndarray,
    level: float = 0.95,
    min_draws: int = MIN_DRAWS,
) -> ImpactReport:
    """Effect summaries of ``actual`` against counterfactual ``draws`` (n_draws, horizon)."""
    draws = np.asarray(draws, dtype=float)
    if draws.ndim != 2 or draws.shape[1] != len(actual):
        raise InputError(
            f"draws have shape {draws.shape}; expected (n_draws, {len(actual)})"
        )
    if draws.shape[0] < min_draws:
        raise InputError(f"need at least {min_draws} counterfactual draws, got {draws.shape[0]}")
    if not 0.0 < level < 1.0:
        raise InputError(f"credible level must lie in (0, 1), got {level}")
    y = np.asarray(actual.values, dtype=float)
    if np.isnan(y).any():
        raise InputError("actual post-period series has missing days")

    totals = draws.sum(axis=1)
    bad = np.flatnonzero(totals <= 0)
    if bad.size:
        raise DegenerateDraws(
            f"{bad.size} counterfactual draw(s) have a non-positive post-period total "
            f"(first: draw {bad[0]}, total {totals[bad[0]]:.4g}); relative effect undefined"
        )
    pointwise = y - draws
    cumulative = np.cumsum(pointwise, axis=1)
    relative = 100.0 * (y.sum() - totals) / totals

    final = cumulative[:, -1]
    n = final.size
    # a draw exactly at zero counts half in each tail, so the null case gives 0.5
    ties = 0.5 * np.count_nonzero(final == 0)
    below = (np.count_nonzero(final < 0) + ties) / n
    above = (np.count_nonzero(final > 0) + ties) / n
    cum_band = Band.of(cumulative, level)
    rel_lo, rel_hi = np.quantile(relative, [(1 - level) / 2, 1 - (1 - level) / 2])
    return ImpactReport(
        dates=actual.dates,
        actual=y,
        counterfactual=Band.of(draws, level),
        pointwise=Band.of(pointwise, level),
        cumulative=cum_band,
        relative=Band(float(relative.mean()), float(rel_lo), float(rel_hi)),
        tail_probability=float(min(below, above)),
        significant=interval_direction(cum_band.lower[-1], cum_band.upper[-1]) is not None,
        credible_level=level,
        n_draws=n,
        pointwise_draws=pointwise,
        cumulative_draws=cumulative,
    )


def describe_relative(mean: float, lower: float, upper: float, level: float = 0.95) -> str:
    pct = round(100 * level)
    direction = interval_direction(lower, upper)
    interval = f"{pct}% credible interval [{lower:+.1f}%, {upper:+.1f}%]"
    if direction is None:
        return (
            f"estimated relative effect {mean:+.1f}% ({interval}); zero change is inside "
            "the interval, so the effect is not significant"
        )
    return f"estimated relative effect {mean:+.1f}% ({interval}): a significant {direction}"


def significance(report: ImpactReport) -> tuple[bool, str]:
    rel = report.relative
    text = describe_relative(float(rel.mean), float(rel.lower), float(rel.upper),
                             report.credible_level)
    return report.significant, text


@dataclass(frozen=True, eq=False)
class AnalysisResult:
    samples: PosteriorSamples
    draws: np.ndarray
    report: ImpactReport


def split_periods(panel: SeriesPanel, intervention_date, pre_days=None, post_days=42):
    """Pre-period ends the day before the intervention; post starts on it."""
    t0 = to_date(intervention_date)
    pre_end = t0 - dt.timedelta(days=1)
    post_end = t0 + dt.timedelta(days=post_days - 1)
    if post_days < 1:
        raise InputError("post-period must be at least 1 day")
    if not panel.start_date < t0 <= panel.end_date:
        raise InputError(
            f"intervention date {t0} must fall after {panel.start_date} and no later "
            f"than {panel.end_date}"
        )
    if post_end > panel.end_date:
        raise InputError(
            f"post-period of {post_days} days needs data through {post_end}; "
            f"panel ends {panel.end_date}"
        )
    pre_start = panel.start_date
    if pre_days is not None:
        pre_start = t0 - dt.timedelta(days=pre_days)
        if pre_start < panel.start_date:
            raise InputError(
                f"pre-period of {pre_days} days needs data from {pre_start}; "
                f"panel starts {panel.start_date}"
            )
    return panel.window(pre_start, pre_end), panel.window(t0, post_end)


def run_analysis(
    panel: SeriesPanel,
    intervention_date,
    spec: ModelSpec = ModelSpec(),
    config: McmcConfig = McmcConfig(),
    pre_days: int | None = None,
    post_days: int = 42,
    level: float = 0.95,
) -> AnalysisResult:
    """Fit on the pre-period, predict the post-period, summarize the effect."""
    pre, post = split_periods(panel, intervention_date, pre_days, post_days)
    samples = fit(spec, pre, config)
    # separate stream from the sampler's chains
    draws = predict_counterfactual(samples, post, post_days, rng=[config.seed, config.chains, 1])
    report = compute_impact(post.treated, draws, level)
    report = _with_pre_period(report, pre, samples)
    return AnalysisResult(samples, draws, report)


def _with_pre_period(report: ImpactReport, pre: SeriesPanel, samples) -> ImpactReport:
    from dataclasses import replace

    return replace(
        report,
        pre_dates=pre.dates,
        pre_actual=np.asarray(pre.treated.values, dtype=float),
        pre_fitted=fitted_mean(samples),
    )
