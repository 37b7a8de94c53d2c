"""Calendar-anchored daily series, panels and deterministic regressors.

Missing observations are stored as NaN.  Every series covers a contiguous
run of calendar days, so a gap in the data is always an explicit NaN and
never an omitted day.
"""

from __future__ import annotations

import datetime as dt
import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyIntersection, InputError, NoPoints, TooShort

logger = logging.getLogger(__name__)

ONE_DAY = dt.timedelta(days=1)


def to_date(value) -> dt.date:
    """Coerce an ISO string, ``datetime`` or ``numpy.datetime64`` to a date."""
    if isinstance(value, dt.datetime):
        return value.date()
    if isinstance(value, dt.date):
        return value
    if isinstance(value, np.datetime64):
        return value.astype("datetime64[D]").astype(dt.date)
    if isinstance(value, str):
        return dt.date.fromisoformat(value.strip()[:10])
    raise TypeError(f"cannot interpret {value!r} as a calendar date")


def date_range(start, end) -> list[dt.date]:
    """Inclusive list of days from ``start`` to ``end``."""
    start, end = to_date(start), to_date(end)
    return [start + dt.timedelta(days=k) for k in range((end - start).days + 1)]


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DateIndexedSeries:
    """A named daily series starting on ``start_date``; NaN marks a missing day."""

    name: str
    start_date: dt.date
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "start_date", to_date(self.start_date))
        values = _frozen(self.values)
        if values.ndim != 1 or values.size == 0:
            raise InputError(f"series {self.name!r} must be a non-empty 1-D sequence")
        if np.isinf(values).any():
            raise InputError(f"series {self.name!r} contains infinite values")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, DateIndexedSeries):
            return NotImplemented
        return (
            self.name == other.name
            and self.start_date == other.start_date
            and np.array_equal(self.values, other.values, equal_nan=True)
        )

    __hash__ = None

    @property
    def end_date(self) -> dt.date:
        return self.start_date + dt.timedelta(days=len(self) - 1)

    @property
    def dates(self) -> list[dt.date]:
        return date_range(self.start_date, self.end_date)

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.values)

    @property
    def n_present(self) -> int:
        return int((~self.missing).sum())

    def index_of(self, day) -> int:
        return (to_date(day) - self.start_date).days

    def window(self, start=None, end=None) -> "DateIndexedSeries":
        """Sub-series between two dates, inclusive on both ends."""
        start = self.start_date if start is None else to_date(start)
        end = self.end_date if end is None else to_date(end)
        i, j = self.index_of(start), self.index_of(end)
        if i < 0 or j >= len(self) or j < i:
            raise InputError(
                f"window {start}..{end} is outside {self.name!r} "
                f"({self.start_date}..{self.end_date})"
            )
        return DateIndexedSeries(self.name, start, self.values[i : j + 1])

    def head(self, n: int) -> "DateIndexedSeries":
        return DateIndexedSeries(self.name, self.start_date, self.values[:n])

    def with_values(self, values, name: str | None = None) -> "DateIndexedSeries":
        return DateIndexedSeries(self.name if name is None else name, self.start_date, values)

    def interpolated(self) -> "DateIndexedSeries":
        """Fill missing days linearly (flat beyond the first/last present day)."""
        mask = self.missing
        if not mask.any():
            return self
        if mask.all():
            raise InputError(f"series {self.name!r} has no present values")
        idx = np.arange(len(self))
        filled = np.interp(idx, idx[~mask], self.values[~mask])
        return self.with_values(filled)


@dataclass(frozen=True)
class SeriesPanel:
    """Treated series plus controls and covariates on one shared calendar."""

    treated: DateIndexedSeries
    controls: tuple[DateIndexedSeries, ...] = ()
    covariates: tuple[DateIndexedSeries, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "controls", tuple(self.controls))
        object.__setattr__(self, "covariates", tuple(self.covariates))
        for s in self.regressors:
            if s.start_date != self.treated.start_date or len(s) != len(self.treated):
                raise InputError(
                    f"series {s.name!r} is not aligned with treated series "
                    f"{self.treated.name!r}; use align()"
                )
        names = [s.name for s in self.regressors]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise InputError(f"duplicate control/covariate names: {dupes}")

    @property
    def regressors(self) -> tuple[DateIndexedSeries, ...]:
        return self.controls + self.covariates

    @property
    def start_date(self) -> dt.date:
        return self.treated.start_date

    @property
    def end_date(self) -> dt.date:
        return self.treated.end_date

    @property
    def dates(self) -> list[dt.date]:
        return self.treated.dates

    def __len__(self) -> int:
        return len(self.treated)

    def window(self, start=None, end=None) -> "SeriesPanel":
        return SeriesPanel(
            self.treated.window(start, end),
            tuple(s.window(start, end) for s in self.controls),
            tuple(s.window(start, end) for s in self.covariates),
        )

    def slice(self, i: int, j: int) -> "SeriesPanel":
        """Rows ``i`` (inclusive) to ``j`` (exclusive) by position."""
        n = len(self)
        if not 0 <= i < j <= n:
            raise InputError(f"slice [{i}, {j}) outside panel of length {n}")
        start = self.start_date + dt.timedelta(days=i)
        end = self.start_date + dt.timedelta(days=j - 1)
        return self.window(start, end)

    def with_controls(self, names: Iterable[str]) -> "SeriesPanel":
        keep = set(names)
        return SeriesPanel(
            self.treated, tuple(s for s in self.controls if s.name in keep), self.covariates
        )


def align(series, covariates: Sequence[DateIndexedSeries] = ()) -> SeriesPanel:
    """Trim every series to the common date range.

    ``series`` is either a list whose first element is the treated series
    (the rest are controls) or an existing :class:`SeriesPanel`.  Missing
    values in controls and covariates are linearly interpolated, since the
    regression design needs complete columns; a warning is logged when that
    happens.
    """
    if isinstance(series, SeriesPanel):
        covariates = tuple(series.covariates) + tuple(covariates)
        series = [series.treated, *series.controls]
    series = list(series)
    if not series:
        raise InputError("align() needs at least one series")
    everything = series + list(covariates)
    start = max(s.start_date for s in everything)
    end = min(s.end_date for s in everything)
    if end < start:
        raise EmptyIntersection(
            "series have no common dates: " + ", ".join(
                f"{s.name} {s.start_date}..{s.end_date}" for s in everything
            )
        )

    def _prep(s: DateIndexedSeries) -> DateIndexedSeries:
        s = s.window(start, end)
        if s.missing.any():
            logger.warning(
                "interpolating %d missing value(s) in regressor %r", int(s.missing.sum()), s.name
            )
            s = s.interpolated()
        return s

    treated = series[0].window(start, end)
    return SeriesPanel(
        treated,
        tuple(_prep(s) for s in series[1:]),
        tuple(_prep(s) for s in covariates),
    )


@dataclass(frozen=True)
class StandardizeParams:
    mean: float
    sd: float
    degenerate: bool = False

    @property
    def scale(self) -> float:
        """Multiplier used to map back; 1 for degenerate series."""
        return 1.0 if self.degenerate else self.sd

    def apply(self, values):
        values = np.asarray(values, dtype=float)
        if self.degenerate:
            return np.where(np.isnan(values), np.nan, 0.0)
        return (values - self.mean) / self.sd

    def invert(self, values):
        return np.asarray(values, dtype=float) * self.scale + self.mean


def fit_standardize(values) -> StandardizeParams:
    values = np.asarray(values, dtype=float)
    present = values[~np.isnan(values)]
    if present.size < 2:
        raise TooShort(f"need at least 2 present values to standardize, got {present.size}")
    mean = float(present.mean())
    sd = float(present.std(ddof=1))
    if not sd > 0.0:
        return StandardizeParams(mean, 0.0, True)
    return StandardizeParams(mean, sd, False)


def standardize(s: DateIndexedSeries) -> tuple[DateIndexedSeries, StandardizeParams]:
    """Centre and scale by the sample mean/sd of present values.

    A zero-variance series maps to all zeros with ``degenerate=True``.
    """
    params = fit_standardize(s.values)
    return s.with_values(params.apply(s.values)), params


def destandardize(s: DateIndexedSeries, params: StandardizeParams) -> DateIndexedSeries:
    return s.with_values(params.invert(s.values))


def interpolate_to_daily(points, start, end, name: str = "interpolated") -> DateIndexedSeries:
    """Piecewise-linear daily series through ``(date, value)`` knots.

    Values before the first knot and after the last one are held flat.
    Typical use is spreading a quarterly statistic over a daily calendar.
    """
    points = [(to_date(d), float(v)) for d, v in points]
    if not points:
        raise NoPoints("interpolate_to_daily() needs at least one point")
    knots = [d for d, _ in points]
    if any(b <= a for a, b in zip(knots, knots[1:])):
        raise InputError("interpolation points must be sorted by date with distinct dates")
    start, end = to_date(start), to_date(end)
    if end < start:
        raise InputError(f"empty calendar {start}..{end}")
    origin = knots[0]
    xk = np.array([(d - origin).days for d in knots], dtype=float)
    yk = np.array([v for _, v in points])
    xq = np.arange((start - origin).days, (end - origin).days + 1, dtype=float)
    return DateIndexedSeries(name, start, np.interp(xq, xk, yk))


MONTH_NAMES = (
    "jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec",
)


def month_regressors(start, end) -> list[DateIndexedSeries]:
    """11 month-of-year indicators; January is the baseline."""
    days = date_range(start, end)
    months = np.array([d.month for d in days])
    return [
        DateIndexedSeries(f"month_{MONTH_NAMES[m - 1]}", days[0], (months == m).astype(float))
        for m in range(2, 13)
    ]


def holiday_regressors(start, end, holidays) -> list[DateIndexedSeries]:
    """One 0/1 indicator per named holiday; dates outside the range are ignored."""
    days = date_range(start, end)
    if not days:
        raise InputError(f"empty calendar {start}..{end}")
    first = days[0]
    out = []
    for name, dates in holidays:
        values = np.zeros(len(days))
        for d in dates:
            k = (to_date(d) - first).days
            if 0 <= k < len(days):
                values[k] = 1.0
        out.append(DateIndexedSeries(f"holiday_{name}", first, values))
    return out


def seasonal_regressors(start, end, holidays=()) -> list[DateIndexedSeries]:
    """Month dummies followed by one indicator per holiday."""
    if to_date(end) < to_date(start):
        raise InputError(f"empty calendar {start}..{end}")
    return month_regressors(start, end) + holiday_regressors(start, end, holidays)
