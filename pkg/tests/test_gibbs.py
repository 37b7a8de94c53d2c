import dataclasses
import datetime as dt

import numpy as np
import pytest

from impact_bsts import gibbs
from impact_bsts.errors import InputError, MissingPostCovariate, NumericalFailure
from impact_bsts.gibbs import (
    McmcConfig,
    ModelSpec,
    fit,
    inclusion_probabilities,
    standardized_coefficients,
    variance_prior,
)
from impact_bsts.series import DateIndexedSeries, SeriesPanel
from impact_bsts.state_space import kalman_smoother

START = dt.date(2021, 1, 1)


def make_panel(n=300, n_controls=2, seed=0, beta=(1.5,), missing=()):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, n_controls))
    level = 50 + np.cumsum(rng.normal(0, 0.2, n))
    y = level + X[:, : len(beta)] @ np.array(beta) + rng.normal(0, 0.5, n)
    y[list(missing)] = np.nan
    controls = tuple(DateIndexedSeries(f"c{j}", START, X[:, j]) for j in range(n_controls))
    return SeriesPanel(DateIndexedSeries("y", START, y), controls)


PLAIN = ModelSpec(weekly_seasonal=False, monthly=False)


class TestConfig:
    def test_burn_in_must_be_below_iterations(self):
        with pytest.raises(InputError):
            McmcConfig(iterations=10, burn_in=10)

    def test_unknown_trend(self):
        with pytest.raises(InputError):
            ModelSpec(trend="quadratic")


class TestVariancePrior:
    def test_default_mode(self):
        assert variance_prior("level").sd_mode == pytest.approx(0.01)

    def test_doubling_guess_doubles_mode(self):
        a = variance_prior("level", 0.01).sd_mode
        b = variance_prior("level", 0.02).sd_mode
        assert b == pytest.approx(2 * a)

    def test_df_fixed(self):
        assert variance_prior("seasonal", 0.5).shape == variance_prior("level", 0.001).shape == 1.5

    def test_rejects_nonpositive(self):
        with pytest.raises(InputError):
            variance_prior("level", 0.0)


class TestFit:
    def test_draw_count_and_shapes(self):
        panel = make_panel(n=120)
        s = fit(ModelSpec(trend="local_linear"), panel, McmcConfig(30, 10, seed=1, chains=2))
        assert s.n_draws == 2 * 20
        assert s.state_paths.shape == (40, 120, s.model.m)
        assert s.beta.shape == s.gamma.shape == (40, len(s.layout.names))
        assert s.chain.tolist() == [0] * 20 + [1] * 20

    def test_deterministic(self):
        panel = make_panel(n=150)
        cfg = McmcConfig(40, 10, seed=7)
        a = fit(ModelSpec(), panel, cfg)
        b = fit(ModelSpec(), panel, cfg)
        for f in ("state_paths", "state_variances", "obs_variance", "gamma", "beta"):
            assert np.array_equal(getattr(a, f), getattr(b, f))

    def test_seed_changes_output(self):
        panel = make_panel(n=150)
        a = fit(PLAIN, panel, McmcConfig(20, 5, seed=1))
        b = fit(PLAIN, panel, McmcConfig(20, 5, seed=2))
        assert not np.array_equal(a.obs_variance, b.obs_variance)

    def test_sparsity_contract(self):
        panel = make_panel(n=200, n_controls=6, beta=(1.0,))
        s = fit(PLAIN, panel, McmcConfig(200, 50, seed=3))
        k = s.layout.n_forced
        zero_frac = (s.beta[:, k:] == 0).mean(axis=0)
        pip = np.array(list(inclusion_probabilities(s).values()))
        np.testing.assert_array_equal(zero_frac, 1 - pip)

    def test_constant_series_noise_vanishes(self):
        y = DateIndexedSeries("flat", START, np.full(400, 17.0))
        spec = ModelSpec(trend="static_intercept", weekly_seasonal=False, monthly=False)
        s = fit(spec, SeriesPanel(y), McmcConfig(300, 100, seed=0))
        assert s.obs_variance.mean() < 1e-3

    def test_missing_treated_days(self):
        panel = make_panel(n=150, missing=(20, 21, 80))
        s = fit(ModelSpec(), panel, McmcConfig(30, 10, seed=0))
        assert np.isfinite(s.state_paths).all()

    def test_semi_local_coefficient_inside_unit_interval(self):
        s = fit(ModelSpec(trend="semi_local_linear"), make_panel(n=150), McmcConfig(60, 10))
        assert s.ar_coef is not None
        assert np.all(np.abs(s.ar_coef) < 1)

    def test_degenerate_control_never_selected(self):
        panel = make_panel(n=150)
        flat = DateIndexedSeries("flat", START, np.full(150, 3.0))
        panel = SeriesPanel(panel.treated, panel.controls + (flat,))
        s = fit(PLAIN, panel, McmcConfig(60, 10))
        assert inclusion_probabilities(s)["flat"] == 0.0

    def test_month_dummies_drop_collinear_column(self):
        # Feb..Apr only: no January baseline rows
        n = 89
        rng = np.random.default_rng(0)
        y = DateIndexedSeries("y", dt.date(2021, 2, 1), 10 + rng.normal(size=n))
        s = fit(ModelSpec(weekly_seasonal=False), SeriesPanel(y), McmcConfig(20, 5))
        assert s.layout.forced_names == ("month_mar", "month_apr")

    def test_holidays_enter_as_forced_columns(self):
        spec = ModelSpec(monthly=False, holidays=(("diwali", ("2021-02-10",)),))
        s = fit(spec, make_panel(n=100), McmcConfig(20, 5))
        assert s.layout.forced_names == ("holiday_diwali",)
        assert s.gamma[:, 0].all()

    def test_numerical_error_reports_iteration(self, monkeypatch):
        real = gibbs.draw_states
        calls = {"n": 0}

        def flaky(*args, **kwargs):
            calls["n"] += 1
            if calls["n"] == 4:
                raise NumericalFailure("negative prediction variance on day 5")
            return real(*args, **kwargs)

        monkeypatch.setattr(gibbs, "draw_states", flaky)
        with pytest.raises(NumericalFailure) as info:
            fit(PLAIN, make_panel(n=80), McmcConfig(10, 2))
        assert info.value.iteration == 3
        assert "MCMC iteration 3" in str(info.value)

    def test_post_design_requires_included_controls(self):
        panel = make_panel(n=200, beta=(3.0,))
        s = fit(PLAIN, panel.slice(0, 150), McmcConfig(60, 10))
        post = panel.slice(150, 200)
        X = s.post_design(post, 50)
        assert X.shape == (50, 2)
        broken = SeriesPanel(post.treated, (post.controls[1],))
        with pytest.raises(MissingPostCovariate):
            s.post_design(broken, 50)


@pytest.fixture(scope="module")
def samples():
    return fit(PLAIN, make_panel(n=100, n_controls=3), McmcConfig(12, 2))


class TestSummaries:
    def test_inclusion_all_none_half(self, samples):
        g = np.zeros_like(samples.gamma)
        g[:, 0] = True
        g[::2, 1] = True
        s = dataclasses.replace(samples, gamma=g)
        pip = inclusion_probabilities(s)
        assert pip == {"c0": 1.0, "c1": 0.5, "c2": 0.0}

    def test_standardized_coefficients(self, samples):
        b = np.zeros_like(samples.beta)
        b[:, 0] = 0.65
        b[::2, 1] = 1.0
        s = dataclasses.replace(samples, beta=b)
        coef = standardized_coefficients(s)
        assert coef["c0"] == pytest.approx(0.65)
        assert coef["c1"] == pytest.approx(0.5)
        assert coef["c2"] == 0.0


def test_pure_structural_fit_matches_smoother():
    """No regressors: the sampled signal mean tracks the smoother at posterior-mean variances."""
    rng = np.random.default_rng(11)
    n = 400
    y = 10 + np.cumsum(rng.normal(0, 0.3, n)) + rng.normal(0, 1.0, n)
    spec = ModelSpec(weekly_seasonal=False, monthly=False)
    s = fit(spec, SeriesPanel(DateIndexedSeries("y", START, y)), McmcConfig(600, 100, seed=4))
    assert s.design.shape == (n, 0)
    sampled = (s.state_paths @ s.model.Z).mean(axis=0)
    model = s.model.with_params(Q=s.state_variances.mean(0), H=s.obs_variance.mean())
    direct = kalman_smoother(model, s.y_std).mean @ s.model.Z
    assert np.mean(np.abs(sampled - direct)) < 0.1


def test_chains_agree():
    panel = make_panel(n=300, n_controls=3, seed=5)
    s = fit(PLAIN, panel, McmcConfig(600, 150, seed=9, chains=2))
    h = s.obs_variance
    a, b = h[s.chain == 0].mean(), h[s.chain == 1].mean()
    assert abs(a - b) / max(a, b) < 0.10


@pytest.mark.slow
def test_coefficient_interval_calibration():
    """95% posterior interval of a true coefficient of 0.8 covers it in >= 90 of 100 runs."""
    covered = 0
    for rep in range(100):
        rng = np.random.default_rng(1000 + rep)
        n = 400
        x = rng.normal(size=n)
        x = (x - x.mean()) / x.std(ddof=1)
        y = np.cumsum(rng.normal(0, 0.1, n)) + 0.8 * x + rng.normal(0, 0.5, n)
        panel = SeriesPanel(
            DateIndexedSeries("y", START, y), (DateIndexedSeries("x", START, x),)
        )
        s = fit(PLAIN, panel, McmcConfig(1000, 200, seed=rep))
        raw = s.beta[:, -1] * s.treated_params.sd
        lo, hi = np.quantile(raw, [0.025, 0.975])
        covered += lo <= 0.8 <= hi
    assert covered >= 90
