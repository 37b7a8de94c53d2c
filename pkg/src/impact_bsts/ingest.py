"""Data acquisition: Wikimedia pageview aggregates (cached) and daily CSV files.

Referrer-split and geography-split pageviews are not available from the
public API, so private or pre-aggregated series come in through CSV.
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import logging
import math
import os
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
import requests

from .errors import (
    DuplicateColumn,
    HttpError,
    InputError,
    NetworkError,
    NonContiguousDates,
    ParseError,
    RangeTooLarge,
    UnparseableValue,
)
from .series import ONE_DAY, DateIndexedSeries, SeriesPanel, date_range, to_date

logger = logging.getLogger(__name__)

API_ROOT = "https://wikimedia.org/api/rest_v1"
ACCESS = ("all-access", "desktop", "mobile-web", "mobile-app")
AGENTS = ("all-agents", "user", "spider", "automated")
USER_AGENT = "impact-bsts/0.1 (causal impact analysis of daily pageviews; python-requests)"
CHUNK_DAYS = 365
MAX_RANGE_DAYS = 20 * 366
RETRY_STATUS = {429, 500, 502, 503, 504}


@dataclass(frozen=True)
class PageviewQuery:
    project: str
    start: dt.date
    end: dt.date
    access: str = "all-access"
    agent: str = "user"
    granularity: str = "daily"

    def __post_init__(self):
        object.__setattr__(self, "start", to_date(self.start))
        object.__setattr__(self, "end", to_date(self.end))
        if self.start > self.end:
            raise InputError(f"query start {self.start} is after end {self.end}")
        if self.access not in ACCESS:
            raise InputError(f"access must be one of {ACCESS}, got {self.access!r}")
        if self.agent not in AGENTS:
            raise InputError(f"agent must be one of {AGENTS}, got {self.agent!r}")
        if self.granularity != "daily":
            raise InputError("only daily granularity is supported")
        if not self.project or "/" in self.project:
            raise InputError(f"bad project name {self.project!r}")

    @property
    def name(self) -> str:
        return f"{self.project}:{self.access}:{self.agent}"

    def url(self, start: dt.date | None = None, end: dt.date | None = None) -> str:
        start = self.start if start is None else start
        end = self.end if end is None else end
        return (
            f"{API_ROOT}/metrics/pageviews/aggregate/{self.project}/{self.access}/"
            f"{self.agent}/daily/{start:%Y%m%d}00/{end:%Y%m%d}00"
        )

    def chunks(self) -> list[tuple[dt.date, dt.date]]:
        days = (self.end - self.start).days + 1
        if days > MAX_RANGE_DAYS:
            raise RangeTooLarge(f"{days} days requested; at most {MAX_RANGE_DAYS} supported")
        out = []
        s = self.start
        while s <= self.end:
            e = min(self.end, s + dt.timedelta(days=CHUNK_DAYS - 1))
            out.append((s, e))
            s = e + ONE_DAY
        return out


@dataclass(frozen=True)
class CacheEntry:
    key: str
    url: str
    fetched_at: str
    payload: str


def default_cache_dir() -> Path:
    env = os.environ.get("IMPACT_BSTS_CACHE")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "impact-bsts"


class ResponseCache:
    """One JSON file per canonical URL, written atomically."""

    def __init__(self, directory: str | os.PathLike | None = None):
        self.directory = Path(directory) if directory is not None else default_cache_dir()

    @staticmethod
    def key(url: str) -> str:
        return hashlib.sha256(url.encode("utf-8")).hexdigest()

    def path(self, url: str) -> Path:
        return self.directory / f"{self.key(url)}.json"

    def get(self, url: str) -> CacheEntry | None:
        p = self.path(url)
        try:
            doc = json.loads(p.read_text(encoding="utf-8"))
        except FileNotFoundError:
            return None
        except (OSError, ValueError):
            logger.warning("ignoring unreadable cache file %s", p)
            return None
        return CacheEntry(doc["key"], doc["url"], doc["fetched_at"], doc["payload"])

    def put(self, url: str, payload: str) -> CacheEntry:
        self.directory.mkdir(parents=True, exist_ok=True)
        entry = CacheEntry(
            self.key(url), url, dt.datetime.now(dt.timezone.utc).isoformat(), payload
        )
        fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(entry.__dict__, fh)
            os.replace(tmp, self.path(url))
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
        return entry


class PageviewClient:
    """Rate-limited, retrying client for the pageview aggregate endpoint."""

    def __init__(
        self,
        cache_dir=None,
        session: requests.Session | None = None,
        min_delay: float = 0.2,
        attempts: int = 3,
        backoff: float = 1.0,
        timeout: float = 30.0,
        user_agent: str = USER_AGENT,
        sleep=time.sleep,
        clock=time.monotonic,
    ):
        self.cache = ResponseCache(cache_dir)
        self.session = session if session is not None else requests.Session()
        self.min_delay = min_delay
        self.attempts = attempts
        self.backoff = backoff
        self.timeout = timeout
        self.headers = {"User-Agent": user_agent, "Accept": "application/json"}
        self._sleep = sleep
        self._clock = clock
        self._last_request: float | None = None
        self.network_calls = 0
        self.cache_hits = 0

    def _throttle(self):
        if self._last_request is not None:
            wait = self.min_delay - (self._clock() - self._last_request)
            if wait > 0:
                self._sleep(wait)
        self._last_request = self._clock()

    def get_text(self, url: str) -> str:
        cached = self.cache.get(url)
        if cached is not None:
            self.cache_hits += 1
            logger.info("cache hit for %s", url)
            return cached.payload
        last_exc: Exception | None = None
        for attempt in range(self.attempts):
            if attempt:
                self._sleep(self.backoff * 2 ** (attempt - 1))
            self._throttle()
            self.network_calls += 1
            try:
                resp = self.session.get(url, headers=self.headers, timeout=self.timeout)
            except requests.RequestException as exc:
                last_exc = NetworkError(f"request to {url} failed: {exc}")
                continue
            if resp.status_code == 200:
                self.cache.put(url, resp.text)
                return resp.text
            last_exc = HttpError(resp.status_code, url)
            if resp.status_code not in RETRY_STATUS:
                break
        raise last_exc

    def fetch_aggregate(self, query: PageviewQuery) -> DateIndexedSeries:
        values = {}
        for start, end in query.chunks():
            text = self.get_text(query.url(start, end))
            values.update(parse_items(text, start, end))
        days = date_range(query.start, query.end)
        series = np.array([values.get(d, np.nan) for d in days], dtype=float)
        return DateIndexedSeries(query.name, query.start, series)


def parse_items(text: str, start: dt.date, end: dt.date) -> dict[dt.date, float]:
    """Map day -> views from an aggregate response body."""
    try:
        doc = json.loads(text)
        items = doc["items"]
    except (ValueError, KeyError, TypeError) as exc:
        raise ParseError(f"response has no 'items' array: {exc}") from exc
    out = {}
    for item in items:
        try:
            ts = str(item["timestamp"])
            day = dt.date(int(ts[:4]), int(ts[4:6]), int(ts[6:8]))
            views = float(item["views"])
        except (KeyError, ValueError, TypeError) as exc:
            raise ParseError(f"malformed item {item!r}") from exc
        if start <= day <= end:
            out[day] = views
    return out


def fetch_aggregate(query: PageviewQuery, client: PageviewClient | None = None) -> DateIndexedSeries:
    """Daily pageviews for ``query``; days absent from the response are missing."""
    return (client or PageviewClient()).fetch_aggregate(query)


def _parse_value(text: str, row: int, column: str) -> float:
    s = text.strip()
    if s == "":
        return math.nan
    try:
        v = float(s)
    except ValueError:
        raise UnparseableValue(row, column, text) from None
    if math.isinf(v):
        raise UnparseableValue(row, column, text)
    return v


def load_csv(path, date_column: str = "date") -> list[DateIndexedSeries]:
    """Read one series per non-date column; rows must be consecutive days."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError(f"{path}: empty file, expected a header row") from None
        if date_column not in header:
            raise InputError(f"{path}: no {date_column!r} column in header {header}")
        seen = set()
        for h in header:
            if h in seen:
                raise DuplicateColumn(f"{path}: column {h!r} appears more than once")
            seen.add(h)
        di = header.index(date_column)
        names = [h for i, h in enumerate(header) if i != di]
        dates, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise InputError(
                    f"{path}: line {lineno} has {len(row)} fields, header has {len(header)}"
                )
            try:
                day = dt.date.fromisoformat(row[di].strip())
            except ValueError:
                raise UnparseableValue(lineno, date_column, row[di]) from None
            if dates and day != dates[-1] + ONE_DAY:
                raise NonContiguousDates(
                    f"{path}: line {lineno} has {day}, expected {dates[-1] + ONE_DAY} "
                    f"(gap after {dates[-1]})"
                )
            dates.append(day)
            rows.append([_parse_value(c, lineno, header[i]) for i, c in enumerate(row) if i != di])
    if not dates:
        raise InputError(f"{path}: no data rows")
    data = np.array(rows, dtype=float).reshape(len(dates), len(names))
    return [DateIndexedSeries(name, dates[0], data[:, j]) for j, name in enumerate(names)]


def write_csv(series: Iterable[DateIndexedSeries] | SeriesPanel, path,
              date_column: str = "date") -> Path:
    """Write aligned series as a daily CSV readable by :func:`load_csv`."""
    if isinstance(series, SeriesPanel):
        series = [series.treated, *series.regressors]
    series = list(series)
    if not series:
        raise InputError("nothing to write")
    first = series[0]
    for s in series[1:]:
        if s.start_date != first.start_date or len(s) != len(first):
            raise InputError(f"series {s.name!r} is not aligned with {first.name!r}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([date_column] + [s.name for s in series])
        for i, day in enumerate(first.dates):
            cells = []
            for s in series:
                v = s.values[i]
                cells.append("" if np.isnan(v) else repr(float(v)))
            w.writerow([day.isoformat()] + cells)
    return path
