"""Holiday calendars: bundled JSON files or user-supplied ones in the same format.

A calendar file looks like::

    {"name": "western", "holidays": {"christmas": ["2023-12-25", ...], ...}}
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .errors import InputError
from .series import to_date

BUNDLED = ("in-hindu", "western")


def _parse(doc: dict, source: str) -> tuple[tuple[str, tuple], ...]:
    try:
        holidays = doc["holidays"]
        return tuple(
            (str(name), tuple(sorted(to_date(d) for d in dates)))
            for name, dates in holidays.items()
        )
    except (KeyError, TypeError, AttributeError, ValueError) as exc:
        raise InputError(f"malformed holiday calendar {source}: {exc}") from exc


def load_calendar(name_or_path) -> tuple[tuple[str, tuple], ...]:
    """``((holiday name, dates), ...)`` for a bundled calendar name or a JSON file path."""
    key = str(name_or_path)
    if key in BUNDLED:
        text = resources.files("impact_bsts.data").joinpath(f"{key}.json").read_text("utf-8")
        return _parse(json.loads(text), key)
    path = Path(name_or_path)
    if not path.is_file():
        raise InputError(f"unknown holiday calendar {key!r}; bundled: {', '.join(BUNDLED)}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise InputError(f"holiday calendar {path} is not valid JSON: {exc}") from exc
    return _parse(doc, str(path))


def merge(*calendars) -> tuple[tuple[str, tuple], ...]:
    """Union of calendars; dates of same-named holidays are pooled."""
    pooled: dict[str, set] = {}
    for cal in calendars:
        for name, dates in cal:
            pooled.setdefault(name, set()).update(dates)
    return tuple((name, tuple(sorted(d))) for name, d in pooled.items())
