"""``impact-bsts`` command line.

Every command reads one JSON config.  Relative paths inside the config are
resolved against the config file's directory; ``--out`` is taken as given.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import calendars
from .errors import ImpactError, InputError, NetworkError, NumericalError
from .gibbs import (
    TRENDS,
    McmcConfig,
    ModelSpec,
    fit,
    inclusion_probabilities,
    standardized_coefficients,
)
from .impact import run_analysis
from .ingest import PageviewClient, PageviewQuery, load_csv, write_csv
from .plotting import render_impact
from .prescreen import MAX_CONTROLS, rank_controls
from .series import DateIndexedSeries, SeriesPanel, align, to_date
from .synth import ControlRecipe, Intervention, SynthSpec, generate, with_intervention
from .validate import MIN_TRAIN_DAYS, PAPER_PRE_PERIODS, GridSpec, cross_validate, grid_search

logger = logging.getLogger("impact_bsts")

COMMANDS = ("prescreen", "fit", "impact", "validate", "grid", "simulate", "fetch")
EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL, EXIT_NETWORK = 0, 2, 3, 4


def _section(doc: dict, key: str) -> dict:
    value = doc.get(key) or {}
    if not isinstance(value, dict):
        raise InputError(f"config field {key!r} must be an object")
    return value


@dataclass
class AnalysisConfig:
    base_dir: Path
    treated: dict | None = None
    controls: list = field(default_factory=list)
    covariates: list = field(default_factory=list)
    intervention_date: dt.date | None = None
    pre_period_days: int | None = None
    post_period_days: int = 42
    weekly: bool = True
    monthly: bool = True
    holidays: tuple = ()
    trend: str = "local_level"
    prescreen: dict = field(default_factory=dict)
    spike_slab: dict = field(default_factory=dict)
    state_prior: dict = field(default_factory=dict)
    mcmc: McmcConfig = McmcConfig()
    credible_level: float = 0.95
    validation: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    simulate: dict = field(default_factory=dict)
    fetch: dict = field(default_factory=dict)
    cache_dir: Path | None = None
    output_dir: Path = Path("out")

    @classmethod
    def load(cls, path) -> "AnalysisConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise InputError(f"config file not found: {path}") from None
        except ValueError as exc:
            raise InputError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise InputError("config must be a JSON object")
        return cls.from_dict(doc, path.resolve().parent)

    @classmethod
    def from_dict(cls, doc: dict, base_dir: Path) -> "AnalysisConfig":
        known = {
            "treated", "controls", "covariates", "intervention_date", "pre_period_days",
            "post_period_days", "seasonality", "holidays", "trend", "prescreen", "spike_slab",
            "state_prior", "mcmc", "credible_level", "validation", "grid", "simulate", "fetch",
            "cache_dir", "output_dir",
        }
        unknown = set(doc) - known
        if unknown:
            raise InputError(f"unknown config fields: {sorted(unknown)}")
        season = _section(doc, "seasonality")
        try:
            mcmc = McmcConfig(**_section(doc, "mcmc"))
        except TypeError as exc:
            raise InputError(f"bad mcmc section: {exc}") from exc
        cfg = cls(
            base_dir=base_dir,
            treated=doc.get("treated"),
            controls=_as_list(doc.get("controls")),
            covariates=_as_list(doc.get("covariates")),
            intervention_date=(
                to_date(doc["intervention_date"]) if doc.get("intervention_date") else None
            ),
            pre_period_days=doc.get("pre_period_days"),
            post_period_days=int(doc.get("post_period_days", 42)),
            weekly=bool(season.get("weekly", True)),
            monthly=bool(season.get("monthly", True)),
            holidays=_holidays(doc.get("holidays"), base_dir),
            trend=doc.get("trend", "local_level"),
            prescreen=_section(doc, "prescreen"),
            spike_slab=_section(doc, "spike_slab"),
            state_prior=_section(doc, "state_prior"),
            mcmc=mcmc,
            credible_level=float(doc.get("credible_level", 0.95)),
            validation=_section(doc, "validation"),
            grid=_section(doc, "grid"),
            simulate=_section(doc, "simulate"),
            fetch=_section(doc, "fetch"),
            cache_dir=base_dir / doc["cache_dir"] if doc.get("cache_dir") else None,
            output_dir=base_dir / doc.get("output_dir", "out"),
        )
        if cfg.trend not in TRENDS:
            raise InputError(f"trend must be one of {TRENDS}, got {cfg.trend!r}")
        return cfg

    def model_spec(self, trend: str | None = None) -> ModelSpec:
        ss = self.spike_slab
        sp = self.state_prior
        unknown = set(ss) - {"expected_model_size", "prior_inclusion", "information_weight",
                             "residual_df", "residual_sd", "prior_sample_size"}
        if unknown:
            raise InputError(f"unknown spike_slab fields: {sorted(unknown)}")
        return ModelSpec(
            trend=trend or self.trend,
            weekly_seasonal=self.weekly,
            monthly=self.monthly,
            holidays=self.holidays,
            state_sd_guess=float(sp.get("sd_guess", 0.01)),
            state_prior_df=float(sp.get("df", 3.0)),
            **ss,
        )

    def resolve(self, p) -> Path:
        return self.base_dir / p


def _as_list(value) -> list:
    if value is None:
        return []
    return value if isinstance(value, list) else [value]


def _holidays(value, base_dir: Path) -> tuple:
    if not value:
        return ()
    if isinstance(value, dict):
        return tuple((name, tuple(to_date(d) for d in dates)) for name, dates in value.items())
    cals = []
    for item in _as_list(value):
        item = str(item)
        cals.append(calendars.load_calendar(
            item if item in calendars.BUNDLED else base_dir / item
        ))
    return calendars.merge(*cals)


class SourceLoader:
    """Resolves config source entries into series, reading each CSV once."""

    def __init__(self, cfg: AnalysisConfig, client: PageviewClient | None = None):
        self.cfg = cfg
        self._csv: dict[tuple, list[DateIndexedSeries]] = {}
        self._client = client

    @property
    def client(self) -> PageviewClient:
        if self._client is None:
            self._client = PageviewClient(cache_dir=self.cfg.cache_dir)
        return self._client

    def _csv_series(self, path: str, date_column: str) -> list[DateIndexedSeries]:
        full = self.cfg.resolve(path)
        key = (str(full), date_column)
        if key not in self._csv:
            if not full.is_file():
                raise InputError(f"source file not found: {full}")
            self._csv[key] = load_csv(full, date_column)
        return self._csv[key]

    def _pageview_range(self) -> tuple[dt.date, dt.date]:
        cfg = self.cfg
        if cfg.intervention_date is None:
            raise InputError("pageview sources need intervention_date to derive a date range")
        end = cfg.intervention_date + dt.timedelta(days=cfg.post_period_days - 1)
        start = cfg.intervention_date - dt.timedelta(days=cfg.pre_period_days or 400)
        return start, end

    def load(self, entry, exclude=()) -> list[DateIndexedSeries]:
        if not isinstance(entry, dict):
            raise InputError(f"source entries must be objects, got {entry!r}")
        if "csv" in entry:
            series = self._csv_series(entry["csv"], entry.get("date_column", "date"))
            by_name = {s.name: s for s in series}
            if "column" in entry:
                wanted = [entry["column"]]
            elif "columns" in entry:
                wanted = list(entry["columns"])
            else:
                wanted = [s.name for s in series if s.name not in exclude]
            missing = [c for c in wanted if c not in by_name]
            if missing:
                raise InputError(f"columns {missing} not found in {entry['csv']}")
            return [by_name[c] for c in wanted]
        if "pageviews" in entry:
            pv = dict(entry["pageviews"])
            start, end = self._pageview_range()
            pv.setdefault("start", start)
            pv.setdefault("end", end)
            s = self.client.fetch_aggregate(PageviewQuery(**pv))
            return [s.with_values(s.values, name=entry.get("name", s.name))]
        raise InputError(f"source entry needs 'csv' or 'pageviews': {entry!r}")

    def panel(self) -> SeriesPanel:
        cfg = self.cfg
        if not cfg.treated:
            raise InputError("config has no 'treated' source")
        treated = self.load(cfg.treated)
        if len(treated) != 1:
            raise InputError("the treated source must name exactly one column")
        exclude = {treated[0].name}
        controls = [s for e in cfg.controls for s in self.load(e, exclude)]
        covs = [s for e in cfg.covariates for s in self.load(e, exclude)]
        cov_names = {s.name for s in covs}
        controls = [s for s in controls if s.name not in cov_names]
        return align([treated[0], *controls], covs)


def _pre_window(cfg: AnalysisConfig, panel: SeriesPanel) -> SeriesPanel:
    """Data strictly before the intervention (all data if no date is set)."""
    if cfg.intervention_date is None:
        if cfg.pre_period_days:
            return panel.slice(max(0, len(panel) - cfg.pre_period_days), len(panel))
        return panel
    end = cfg.intervention_date - dt.timedelta(days=1)
    start = panel.start_date
    if cfg.pre_period_days:
        start = cfg.intervention_date - dt.timedelta(days=cfg.pre_period_days)
    if start < panel.start_date or end > panel.end_date or end < start:
        raise InputError(
            f"pre-period {start}..{end} is not covered by data {panel.start_date}..{panel.end_date}"
        )
    return panel.window(start, end)


def _screen(cfg: AnalysisConfig, panel: SeriesPanel):
    pre = _pre_window(cfg, panel)
    opts = cfg.prescreen
    return rank_controls(
        pre.treated, pre.controls,
        max_k=int(opts.get("max_k", MAX_CONTROLS)),
        window=opts.get("dtw_window"),
    )


def _screened_panel(cfg: AnalysisConfig, panel: SeriesPanel) -> SeriesPanel:
    if not cfg.prescreen.get("enabled", False) or not panel.controls:
        return panel
    report = _screen(cfg, panel)
    return panel.with_controls(report.selected)


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    p = out / name
    p.write_text(text, encoding="utf-8")
    logger.info("wrote %s", p)
    return p


def _dump(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _fit_summary(samples) -> dict:
    labels = samples.model.noise_labels
    return {
        "trend": samples.spec.trend,
        "pre_period": {"start": samples.start_date.isoformat(),
                       "end": samples.end_date.isoformat(), "days": samples.n_obs},
        "draws": samples.n_draws,
        "forced_regressors": list(samples.layout.forced_names),
        "inclusion_probabilities": inclusion_probabilities(samples),
        "standardized_coefficients": standardized_coefficients(samples),
        "state_variances_mean": {
            lab: float(samples.state_variances[:, k].mean()) for k, lab in enumerate(labels)
        },
        "observation_variance_mean": float(samples.obs_variance.mean()),
        "slope_ar_coefficient_mean": (
            None if samples.ar_coef is None else float(samples.ar_coef.mean())
        ),
        "standardization": {"mean": samples.treated_params.mean,
                            "sd": samples.treated_params.sd},
    }


def cmd_prescreen(cfg: AnalysisConfig, args) -> int:
    panel = SourceLoader(cfg).panel()
    if not panel.controls:
        logger.warning("no control candidates configured; selection is empty")
    report = _screen(cfg, panel)
    _write(cfg.output_dir, "screening.json", report.to_json())
    _write(cfg.output_dir, "screening.csv", report.to_csv())
    return EXIT_OK


def cmd_fit(cfg: AnalysisConfig, args) -> int:
    panel = _screened_panel(cfg, SourceLoader(cfg).panel())
    samples = fit(cfg.model_spec(), _pre_window(cfg, panel), cfg.mcmc)
    _write(cfg.output_dir, "fit.json", _dump(_fit_summary(samples)))
    return EXIT_OK


def cmd_impact(cfg: AnalysisConfig, args) -> int:
    if cfg.intervention_date is None:
        raise InputError("impact needs intervention_date in the config")
    panel = _screened_panel(cfg, SourceLoader(cfg).panel())
    result = run_analysis(
        panel, cfg.intervention_date, cfg.model_spec(), cfg.mcmc,
        pre_days=cfg.pre_period_days, post_days=cfg.post_period_days,
        level=cfg.credible_level,
    )
    report = result.report
    doc = report.summary()
    doc["model"] = _fit_summary(result.samples)
    _write(cfg.output_dir, "impact.json", _dump(doc))
    _write(cfg.output_dir, "impact.csv", report.to_csv())
    _write(cfg.output_dir, "impact.svg", render_impact(report, args.pointwise_panel))
    print(doc["verdict"])
    return EXIT_OK


def _validation_opts(cfg: AnalysisConfig) -> dict:
    v = cfg.validation
    return {
        "folds": int(v.get("folds", 10)),
        "horizon": int(v.get("horizon", cfg.post_period_days)),
        "min_train": int(v.get("min_train", MIN_TRAIN_DAYS)),
        "n_jobs": int(v.get("n_jobs", 1)),
    }


def cmd_validate(cfg: AnalysisConfig, args) -> int:
    panel = _screened_panel(cfg, SourceLoader(cfg).panel())
    pre = _pre_window(cfg, panel)
    report = cross_validate(cfg.model_spec(), pre, config=cfg.mcmc, **_validation_opts(cfg))
    _write(cfg.output_dir, "validation.json", report.to_json())
    _write(cfg.output_dir, "validation.csv", report.to_csv())
    return EXIT_OK


def cmd_grid(cfg: AnalysisConfig, args) -> int:
    panel = _screened_panel(cfg, SourceLoader(cfg).panel())
    pre = _pre_window(cfg, panel)
    g = cfg.grid
    grid = GridSpec(
        tuple(g.get("pre_period_days", PAPER_PRE_PERIODS)), tuple(g.get("trends", TRENDS))
    )
    result = grid_search(grid, pre, cfg.mcmc, cfg.model_spec(), **_validation_opts(cfg))
    _write(cfg.output_dir, "grid.json", result.to_json())
    _write(cfg.output_dir, "grid.csv", result.to_csv())
    return EXIT_OK


def synth_spec_from(doc: dict, seed: int | None) -> tuple[SynthSpec, Intervention | None]:
    doc = dict(doc)
    recipes = tuple(ControlRecipe(**c) for c in doc.pop("controls", []))
    iv = doc.pop("intervention", None)
    doc.pop("file", None)
    doc.pop("truth_file", None)
    if "weekly_pattern" in doc and doc["weekly_pattern"] is not None:
        doc["weekly_pattern"] = tuple(doc["weekly_pattern"])
    if seed is not None:
        doc["seed"] = seed
    try:
        spec = SynthSpec(controls=recipes, **doc)
        intervention = Intervention(**iv) if iv else None
    except TypeError as exc:
        raise InputError(f"bad simulate section: {exc}") from exc
    return spec, intervention


def cmd_simulate(cfg: AnalysisConfig, args) -> int:
    if not cfg.simulate:
        raise InputError("config has no 'simulate' section")
    spec, intervention = synth_spec_from(cfg.simulate, args.seed)
    panel, truth = generate(spec)
    if intervention is not None:
        panel = with_intervention(panel, intervention)
    out = cfg.output_dir
    write_csv(panel, out / cfg.simulate.get("file", "simulated.csv"))
    comps = [
        DateIndexedSeries(name, spec.start, values)
        for name, values in (("level", truth.level), ("slope", truth.slope),
                             ("seasonal", truth.seasonal), ("regression", truth.regression),
                             ("noise", truth.noise))
    ]
    write_csv(comps, out / cfg.simulate.get("truth_file", "truth.csv"))
    logger.info("wrote simulated panel and truth to %s", out)
    return EXIT_OK


def cmd_fetch(cfg: AnalysisConfig, args) -> int:
    loader = SourceLoader(cfg)
    series = []
    if cfg.fetch:
        f = dict(cfg.fetch)
        f.pop("file", None)
        try:
            series.append(loader.client.fetch_aggregate(PageviewQuery(**f)))
        except TypeError as exc:
            raise InputError(f"bad fetch section: {exc}") from exc
    else:
        entries = [e for e in [cfg.treated, *cfg.controls, *cfg.covariates]
                   if isinstance(e, dict) and "pageviews" in e]
        if not entries:
            raise InputError("nothing to fetch: add a 'fetch' section or pageview sources")
        for e in entries:
            series.extend(loader.load(e))
    client = loader.client
    if client.network_calls == 0:
        logger.info("all requests served from cache (%d hit(s)); no network calls",
                    client.cache_hits)
    if len(series) > 1:
        # common date range, gaps kept as missing
        start = max(s.start_date for s in series)
        end = min(s.end_date for s in series)
        if end < start:
            raise InputError("fetched series do not overlap")
        series = [s.window(start, end) for s in series]
    write_csv(series, cfg.output_dir / cfg.fetch.get("file", "pageviews.csv"))
    return EXIT_OK


HANDLERS = {
    "prescreen": cmd_prescreen,
    "fit": cmd_fit,
    "impact": cmd_impact,
    "validate": cmd_validate,
    "grid": cmd_grid,
    "simulate": cmd_simulate,
    "fetch": cmd_fetch,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="impact-bsts",
        description="Causal impact analysis of daily series with Bayesian structural time series.",
    )
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON config file")
    p.add_argument("--seed", type=int, default=None, help="override the MCMC / simulation seed")
    p.add_argument("--out", default=None, help="output directory (overrides the config)")
    p.add_argument("--pointwise-panel", action="store_true",
                   help="add a point-wise effect panel to impact.svg")
    p.add_argument("-q", "--quiet", action="store_true", help="only log warnings and errors")
    return p


def _setup_logging(quiet: bool) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
    logger.handlers[:] = [handler]
    logger.setLevel(logging.WARNING if quiet else logging.INFO)
    logger.propagate = False
    logging.captureWarnings(True)
    wlog = logging.getLogger("py.warnings")
    wlog.handlers[:] = [handler]
    wlog.propagate = False


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.quiet)
    try:
        cfg = AnalysisConfig.load(args.config)
        if args.seed is not None:
            cfg.mcmc = replace(cfg.mcmc, seed=args.seed)
        if args.out is not None:
            cfg.output_dir = Path(args.out)
        return HANDLERS[args.command](cfg, args)
    except NumericalError as exc:
        logger.error("sampler failure: %s", exc)
        return EXIT_NUMERICAL
    except NetworkError as exc:
        logger.error("network failure: %s", exc)
        return EXIT_NETWORK
    except (ImpactError, ValueError, TypeError, OSError) as exc:
        logger.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
