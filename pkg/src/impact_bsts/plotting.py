"""SVG figure for an impact report."""

from __future__ import annotations

import io

import matplotlib
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

from .impact import ImpactReport

BAND = "#9ecae1"
LINE = "#1f5fa8"


def _intervention_line(ax, report: ImpactReport):
    ax.axvline(report.intervention_date, color="0.35", linestyle=":", linewidth=1)


def render_impact(report: ImpactReport, pointwise_panel: bool = False) -> str:
    """Actual vs counterfactual, then the cumulative effect; returns SVG text.

    Output is byte-stable for a given report: element ids use a fixed hash
    salt and no creation date is embedded.
    """
    n_panels = 3 if pointwise_panel else 2
    fig = Figure(figsize=(9, 3.0 * n_panels))
    FigureCanvasSVG(fig)
    axes = fig.subplots(n_panels, 1, sharex=True)
    post = report.dates

    ax = axes[0]
    if report.pre_actual is not None:
        ax.plot(report.pre_dates, report.pre_actual, color="black", linewidth=1)
        if report.pre_fitted is not None:
            ax.plot(report.pre_dates, report.pre_fitted, color=LINE, linestyle="--", linewidth=1)
    ax.fill_between(post, report.counterfactual.lower, report.counterfactual.upper,
                    color=BAND, alpha=0.6, linewidth=0,
                    label=f"{round(100 * report.credible_level)}% interval")
    ax.plot(post, report.actual, color="black", linewidth=1, label="actual")
    ax.plot(post, report.counterfactual.mean, color=LINE, linestyle="--", linewidth=1.2,
            label="counterfactual")
    _intervention_line(ax, report)
    ax.set_ylabel("daily value")
    ax.legend(loc="upper left", fontsize="small", frameon=False)

    panels = [("pointwise", report.pointwise)] if pointwise_panel else []
    panels.append(("cumulative", report.cumulative))
    for ax, (label, band) in zip(axes[1:], panels):
        ax.fill_between(post, band.lower, band.upper, color=BAND, alpha=0.6, linewidth=0)
        ax.plot(post, band.mean, color=LINE, linestyle="--", linewidth=1.2)
        ax.axhline(0.0, color="0.5", linewidth=0.8)
        _intervention_line(ax, report)
        ax.set_ylabel(f"{label} effect")
    fig.autofmt_xdate()
    fig.tight_layout()

    buf = io.StringIO()
    with matplotlib.rc_context({"svg.hashsalt": "impact-bsts", "svg.fonttype": "none"}):
        fig.savefig(buf, format="svg", metadata={"Date": None})
    return buf.getvalue()


def write_impact_svg(report: ImpactReport, path, pointwise_panel: bool = False) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_impact(report, pointwise_panel))
