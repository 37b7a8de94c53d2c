"""Holdout accuracy: MAPE, rolling-origin cross-validation and a configuration grid."""

from __future__ import annotations

import csv
import io
import json
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import AllZeroActuals, ImpactError, InputError, InsufficientData
from .gibbs import TRENDS, McmcConfig, ModelSpec, fit
from .impact import counterfactual_mean
from .series import DateIndexedSeries, SeriesPanel

MIN_TRAIN_DAYS = 90
PAPER_PRE_PERIODS = (84, 126, 183, 400)


class ExcludedDaysWarning(UserWarning):
    pass


def mape(actual, predicted) -> float:
    """Mean absolute percentage error in percent.

    Days whose actual value is zero or missing cannot be scored; they are
    dropped with a warning.
    """
    a = np.asarray(actual.values if isinstance(actual, DateIndexedSeries) else actual, float)
    p = np.asarray(
        predicted.values if isinstance(predicted, DateIndexedSeries) else predicted, float
    )
    if a.shape != p.shape or a.ndim != 1 or a.size == 0:
        raise InputError(f"need equal-length non-empty series, got {a.shape} and {p.shape}")
    keep = (a != 0) & ~np.isnan(a)
    if not keep.any():
        raise AllZeroActuals("every actual value is zero or missing; MAPE undefined")
    dropped = int(a.size - keep.sum())
    if dropped:
        warnings.warn(
            f"excluded {dropped} day(s) with zero or missing actual values from MAPE",
            ExcludedDaysWarning,
            stacklevel=2,
        )
    return float(100.0 * np.mean(np.abs(a[keep] - p[keep]) / np.abs(a[keep])))


def fold_origins(n: int, folds: int, horizon: int, min_train: int = MIN_TRAIN_DAYS) -> list[int]:
    """Evenly spaced forecast origins; the last holdout ends on day ``n``."""
    if folds < 1 or horizon < 1:
        raise InputError("folds and horizon must be >= 1")
    last = n - horizon
    if last < min_train:
        raise InsufficientData(
            f"{n} days cannot hold {min_train} training days plus a {horizon}-day holdout"
        )
    if folds == 1:
        return [last]
    return [int(round(x)) for x in np.linspace(min_train, last, folds)]


def _seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class Fold:
    origin: int  # index of the first holdout day
    train_start: int
    train_end: int  # exclusive; equals origin
    holdout_end: int  # exclusive
    mape: float


@dataclass(frozen=True)
class ValidationReport:
    folds: tuple[Fold, ...]
    horizon: int
    trend: str
    n_controls: int
    start_date: str = ""

    @property
    def fold_mapes(self) -> list[float]:
        return [f.mape for f in self.folds]

    @property
    def average(self) -> float:
        return float(np.mean(self.fold_mapes))

    def to_dict(self) -> dict:
        return {
            "trend": self.trend,
            "n_controls": self.n_controls,
            "horizon": self.horizon,
            "start_date": self.start_date,
            "average_mape": self.average,
            "folds": [
                {"origin": f.origin, "train_start": f.train_start, "train_end": f.train_end,
                 "holdout_end": f.holdout_end, "mape": f.mape}
                for f in self.folds
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["fold", "origin", "train_start", "train_end", "holdout_end", "mape"])
        for k, f in enumerate(self.folds):
            w.writerow([k, f.origin, f.train_start, f.train_end, f.holdout_end, repr(f.mape)])
        return buf.getvalue()


def _run_fold(args) -> Fold:
    spec, panel, origin, horizon, config = args
    train = panel.slice(0, origin)
    holdout = panel.slice(origin, origin + horizon)
    samples = fit(spec, train, config)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ExcludedDaysWarning)
        score = mape(holdout.treated, counterfactual_mean(samples, holdout, horizon))
    return Fold(origin, 0, origin, origin + horizon, score)


def _map(fn, items, n_jobs: int):
    if n_jobs == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=None if n_jobs < 1 else n_jobs) as pool:
        return list(pool.map(fn, items))


def cross_validate(
    spec: ModelSpec,
    panel: SeriesPanel,
    folds: int = 10,
    horizon: int = 42,
    config: McmcConfig = McmcConfig(),
    min_train: int = MIN_TRAIN_DAYS,
    n_jobs: int = 1,
) -> ValidationReport:
    """Rolling-origin validation.

    Each fold trains on every day before its origin and scores the
    posterior-mean counterfactual over the next ``horizon`` days.  Fold
    ``k`` uses its own seed derived from ``(config.seed, k)``.
    """
    origins = fold_origins(len(panel), folds, horizon, min_train)
    jobs = [
        (spec, panel, origin, horizon, replace(config, seed=_seed(config.seed, k)))
        for k, origin in enumerate(origins)
    ]
    results = _map(_run_fold, jobs, n_jobs)
    return ValidationReport(
        tuple(results), horizon, spec.trend, len(panel.regressors), panel.start_date.isoformat()
    )


@dataclass(frozen=True)
class GridSpec:
    pre_period_days: tuple[int, ...] = PAPER_PRE_PERIODS
    trends: tuple[str, ...] = TRENDS

    def __post_init__(self):
        object.__setattr__(self, "pre_period_days", tuple(int(d) for d in self.pre_period_days))
        object.__setattr__(self, "trends", tuple(self.trends))
        if not self.pre_period_days or not self.trends:
            raise InputError("grid axes must be non-empty")
        if min(self.pre_period_days) < 2:
            raise InputError("pre-period lengths must be >= 2 days")
        bad = set(self.trends) - set(TRENDS)
        if bad:
            raise InputError(f"unknown trends {sorted(bad)}")

    @property
    def cells(self) -> list[tuple[int, str]]:
        return [(d, t) for d in self.pre_period_days for t in self.trends]


@dataclass(frozen=True)
class GridCell:
    pre_period_days: int
    trend: str
    seed: int
    report: ValidationReport | None = None
    error: str | None = None

    @property
    def flagged(self) -> bool:
        return self.report is None

    @property
    def average(self) -> float:
        return float("nan") if self.report is None else self.report.average


@dataclass(frozen=True)
class GridResult:
    cells: tuple[GridCell, ...] = field(default=())

    @property
    def ranking(self) -> list[GridCell]:
        """Evaluated cells by average MAPE, then flagged cells in grid order."""
        ok = sorted((c for c in self.cells if not c.flagged),
                    key=lambda c: (c.average, c.pre_period_days, c.trend))
        return ok + [c for c in self.cells if c.flagged]

    def to_dict(self) -> dict:
        rows = []
        for rank, c in enumerate(self.ranking, start=1):
            rows.append({
                "rank": None if c.flagged else rank,
                "pre_period_days": c.pre_period_days,
                "trend": c.trend,
                "average_mape": None if c.flagged else c.average,
                "fold_mapes": None if c.flagged else c.report.fold_mapes,
                "flagged": c.flagged,
                "error": c.error,
                "seed": c.seed,
            })
        return {"cells": rows}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rank", "pre_period_days", "trend", "average_mape", "flagged", "error"])
        for row in self.to_dict()["cells"]:
            w.writerow([
                "" if row["rank"] is None else row["rank"],
                row["pre_period_days"],
                row["trend"],
                "" if row["average_mape"] is None else repr(row["average_mape"]),
                int(row["flagged"]),
                row["error"] or "",
            ])
        return buf.getvalue()


def _run_cell(args) -> GridCell:
    days, trend, panel, base_spec, config, folds, horizon, min_train, seed = args
    try:
        if len(panel) < days:
            raise InsufficientData(
                f"pre-period of {days} days requested, data covers {len(panel)}"
            )
        sub = panel.slice(len(panel) - days, len(panel))
        report = cross_validate(
            replace(base_spec, trend=trend), sub, folds, horizon,
            replace(config, seed=seed), min_train,
        )
        return GridCell(days, trend, seed, report)
    except ImpactError as exc:
        return GridCell(days, trend, seed, None, f"{type(exc).__name__}: {exc}")


def grid_search(
    grid: GridSpec,
    panel: SeriesPanel,
    config: McmcConfig = McmcConfig(),
    base_spec: ModelSpec = ModelSpec(),
    folds: int = 10,
    horizon: int = 42,
    min_train: int = MIN_TRAIN_DAYS,
    n_jobs: int = 1,
) -> GridResult:
    """Cross-validate every (pre-period length, trend) cell.

    A cell with pre-period length ``L`` uses the last ``L`` days of
    ``panel``.  Failing cells are flagged, not raised.
    """
    jobs = [
        (days, trend, panel, base_spec, config, folds, horizon, min_train,
         _seed(config.seed, days, TRENDS.index(trend)))
        for days, trend in grid.cells
    ]
    return GridResult(tuple(_map(_run_cell, jobs, n_jobs)))
