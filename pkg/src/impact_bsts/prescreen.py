"""Trim a large pool of candidate controls with correlation and DTW."""

from __future__ import annotations

import csv
import io
import json
import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from . import _kernels
from .errors import ConstantSeries, InputError
from .series import DateIndexedSeries

logger = logging.getLogger(__name__)

MIN_CONTROLS = 3
MAX_CONTROLS = 50


class ScreeningWarning(UserWarning):
    pass


def _values(x) -> np.ndarray:
    if isinstance(x, DateIndexedSeries):
        return np.asarray(x.values, dtype=float)
    return np.asarray(x, dtype=float).ravel()


def pearson(a, b) -> float:
    """Sample correlation over the days where both series are present."""
    if isinstance(a, DateIndexedSeries) and isinstance(b, DateIndexedSeries):
        if a.start_date != b.start_date or len(a) != len(b):
            raise InputError(f"series {a.name!r} and {b.name!r} are not aligned")
    x, y = _values(a), _values(b)
    if x.size != y.size:
        raise InputError(f"length mismatch: {x.size} vs {y.size}")
    keep = ~(np.isnan(x) | np.isnan(y))
    x, y = x[keep], y[keep]
    if x.size < 2:
        raise InputError(f"need at least 2 common present days, got {x.size}")
    x = x - x.mean()
    y = y - y.mean()
    sxx, syy = float(x @ x), float(y @ y)
    if sxx == 0.0 or syy == 0.0:
        raise ConstantSeries("correlation undefined: one of the series is constant")
    r = float(x @ y) / np.sqrt(sxx * syy)
    return float(np.clip(r, -1.0, 1.0))


def zscore(values) -> np.ndarray:
    """Centre and scale by the sample sd; constant or single-point input maps to zeros."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return np.zeros_like(v)
    sd = v.std(ddof=1)
    if not sd > 0:
        return np.zeros_like(v)
    return (v - v.mean()) / sd


def _fill(v: np.ndarray) -> np.ndarray:
    bad = np.isnan(v)
    if not bad.any():
        return v
    if bad.all():
        raise InputError("series has no present values")
    idx = np.arange(v.size)
    return np.interp(idx, idx[~bad], v[~bad])


def dtw_distance(a, b, window: int | None = None, standardize: bool = True) -> float:
    """Dynamic time warping cost with absolute-difference local cost.

    Steps are (1,0), (0,1) and (1,1); ``window`` adds an optional
    Sakoe-Chiba band.  Inputs are z-scored first unless ``standardize`` is
    False; missing values are linearly interpolated.
    """
    x, y = _fill(_values(a)), _fill(_values(b))
    if x.size == 0 or y.size == 0:
        raise InputError("DTW needs non-empty series")
    if standardize:
        x, y = zscore(x), zscore(y)
    w = -1 if window is None else int(window)
    if w >= 0:
        w = max(w, abs(x.size - y.size))
    return float(_kernels.dtw_cost(np.ascontiguousarray(x), np.ascontiguousarray(y), w))


@dataclass(frozen=True)
class CandidateScore:
    name: str
    pearson: float
    dtw: float
    pearson_rank: float
    dtw_rank: float
    combined_rank: float
    selected: bool


@dataclass(frozen=True)
class ScreeningReport:
    scores: tuple[CandidateScore, ...]  # best first
    selected: tuple[str, ...]
    excluded: tuple[str, ...] = ()
    max_k: int = MAX_CONTROLS
    window: int | None = None

    def to_dict(self) -> dict:
        return {
            "limits": {"min_k": MIN_CONTROLS, "max_k": self.max_k, "dtw_window": self.window},
            "selected": list(self.selected),
            "excluded": list(self.excluded),
            "candidates": [
                {
                    "name": s.name,
                    "pearson": s.pearson,
                    "dtw": s.dtw,
                    "pearson_rank": s.pearson_rank,
                    "dtw_rank": s.dtw_rank,
                    "combined_rank": s.combined_rank,
                    "selected": s.selected,
                }
                for s in self.scores
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "pearson", "dtw", "pearson_rank", "dtw_rank", "combined_rank",
                    "selected"])
        for s in self.scores:
            w.writerow([s.name, repr(s.pearson), repr(s.dtw), s.pearson_rank, s.dtw_rank,
                        s.combined_rank, int(s.selected)])
        return buf.getvalue()


def rank_controls(
    treated: DateIndexedSeries,
    candidates,
    max_k: int = MAX_CONTROLS,
    window: int | None = None,
) -> ScreeningReport:
    """Score candidates by |r| (descending) and DTW (ascending); keep the top ``max_k``.

    The combined rank is the mean of the two ranks (ties share the average
    rank); remaining ties are broken by name.  Constant candidates cannot be
    correlated and are excluded.
    """
    if not 1 <= max_k <= MAX_CONTROLS:
        raise InputError(f"max_k must lie in [1, {MAX_CONTROLS}], got {max_k}")
    candidates = list(candidates)
    names = [c.name for c in candidates]
    if len(set(names)) != len(names):
        raise InputError("candidate names must be unique")

    kept, rs, ds, excluded = [], [], [], []
    for c in candidates:
        try:
            r = pearson(treated, c)
        except (ConstantSeries, InputError) as exc:
            logger.warning("excluding candidate %r: %s", c.name, exc)
            excluded.append(c.name)
            continue
        kept.append(c.name)
        rs.append(r)
        ds.append(dtw_distance(treated, c, window))

    if kept:
        r_rank = rankdata(-np.abs(rs), method="average")
        d_rank = rankdata(ds, method="average")
        combined = (r_rank + d_rank) / 2.0
        order = sorted(range(len(kept)), key=lambda i: (combined[i], kept[i]))
    else:
        order = []
    chosen = {kept[i] for i in order[:max_k]}
    scores = tuple(
        CandidateScore(kept[i], rs[i], ds[i], float(r_rank[i]), float(d_rank[i]),
                       float(combined[i]), kept[i] in chosen)
        for i in order
    )
    selected = tuple(s.name for s in scores if s.selected)
    if len(selected) < MIN_CONTROLS:
        warnings.warn(
            f"only {len(selected)} control candidate(s) available; at least {MIN_CONTROLS} "
            "are recommended",
            ScreeningWarning,
            stacklevel=2,
        )
    return ScreeningReport(scores, selected, tuple(excluded), max_k, window)
