import datetime as dt
import xml.etree.ElementTree as ET

import numpy as np

from impact_bsts.impact import compute_impact
from impact_bsts.plotting import render_impact, write_impact_svg
from impact_bsts.series import DateIndexedSeries


def report():
    rng = np.random.default_rng(0)
    draws = 100 + rng.normal(0, 2, size=(200, 14))
    actual = DateIndexedSeries("y", dt.date(2023, 3, 1), np.full(14, 95.0))
    return compute_impact(actual, draws)


def test_valid_svg_with_panels():
    svg = render_impact(report())
    ET.fromstring(svg.encode())
    assert "cumulative effect" in svg and "pointwise effect" not in svg
    assert "pointwise effect" in render_impact(report(), pointwise_panel=True)


def test_byte_stable(tmp_path):
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    write_impact_svg(report(), a)
    write_impact_svg(report(), b)
    assert a.read_bytes() == b.read_bytes()
    assert "<dc:date>" not in a.read_text()
