from dataclasses import replace

import numpy as np
import pytest

from impact_bsts.errors import DuplicateSeasonal, DuplicateTrend, InputError
from impact_bsts.state_space import (
    LocalLevel,
    LocalLinear,
    Regression,
    SemiLocalLinear,
    StaticIntercept,
    WeeklySeasonal,
    assemble,
    forecast,
    kalman_filter,
    kalman_smoother,
    simulation_smoother,
)

from oracles import dense_conditional, dense_loglik


def random_model(rng, n):
    """Random model with m <= 8 and a proper (non-diffuse) initial state."""
    trend = rng.integers(4)
    seasonal_period = int(rng.choice([0, 2, 3, 4, 5, 7]))
    sd = lambda: float(rng.uniform(0.05, 1.0))
    comps = [
        [LocalLevel(sd()), LocalLinear(sd(), sd()),
         SemiLocalLinear(sd(), sd(), float(rng.uniform(-0.9, 0.9)), float(rng.normal())),
         StaticIntercept()][trend]
    ]
    if seasonal_period:
        comps.append(WeeklySeasonal(sd(), period=seasonal_period))
    if rng.random() < 0.5:
        X = rng.normal(size=(n, 2))
        comps.append(Regression(X, rng.normal(size=2)))
    model = assemble(comps, obs_variance=float(rng.uniform(0.1, 1.0)))
    if model.m > 8:
        return random_model(rng, n)
    A = rng.normal(size=(model.m, model.m))
    P1 = A @ A.T / model.m + np.eye(model.m)
    return replace(model, P1=P1, a1=rng.normal(size=model.m))


def local_level_fixture(n=10, sigma_level=0.5, sigma_obs=0.8, seed=0, P1=2.0):
    rng = np.random.default_rng(seed)
    model = assemble([LocalLevel(sigma_level)], obs_variance=sigma_obs**2)
    model = replace(model, P1=np.array([[P1]]), a1=np.array([1.0]))
    y = 1.0 + np.cumsum(rng.normal(0, sigma_level, n)) + rng.normal(0, sigma_obs, n)
    return model, y


class TestAssemble:
    def test_local_level(self):
        m = assemble([LocalLevel(0.1)])
        assert m.m == 1
        assert m.T.tolist() == [[1.0]] and m.Z.tolist() == [1.0]

    def test_local_linear(self):
        m = assemble([LocalLinear(0.1, 0.2)])
        assert m.m == 2
        assert m.T.tolist() == [[1, 1], [0, 1]]
        np.testing.assert_allclose(m.Q, [0.01, 0.04])

    def test_level_plus_weekly(self):
        m = assemble([LocalLevel(0.1), WeeklySeasonal(0.1)])
        assert m.m == 7
        sl = m.block("seasonal")
        assert m.T[sl.start, sl].tolist() == [-1.0] * 6
        np.testing.assert_array_equal(m.T[sl.start + 1 :, sl][:, :-1], np.eye(5))
        assert m.Z.tolist() == [1, 1, 0, 0, 0, 0, 0]

    def test_semi_local_linear(self):
        m = assemble([SemiLocalLinear(0.1, 0.1, ar_coef=0.6, long_run_slope=0.3)])
        np.testing.assert_allclose(m.T, [[1, 1, 0], [0, 0.6, 0.4], [0, 0, 1]])
        assert m.a1.tolist() == [0.0, 0.0, 0.3]
        m2 = m.with_params(ar_coef=-0.2)
        np.testing.assert_allclose(m2.T[1], [0, -0.2, 1.2])

    def test_static_intercept_has_no_noise(self):
        m = assemble([StaticIntercept()])
        assert m.R.shape == (1, 0) and m.RQR.tolist() == [[0.0]]

    def test_duplicates(self):
        with pytest.raises(DuplicateTrend):
            assemble([LocalLevel(), StaticIntercept()])
        with pytest.raises(DuplicateSeasonal):
            assemble([LocalLevel(), WeeklySeasonal(), WeeklySeasonal()])

    def test_invalid_parameters(self):
        with pytest.raises(InputError):
            assemble([LocalLevel(-1.0)])
        with pytest.raises(InputError):
            assemble([SemiLocalLinear(ar_coef=1.0)])
        with pytest.raises(InputError):
            assemble([])

    def test_diffuse_default(self):
        m = assemble([LocalLinear()])
        np.testing.assert_array_equal(m.P1, 1e6 * np.eye(2))
        assert m.a1.tolist() == [0.0, 0.0]

    def test_regression_offset(self):
        X = np.arange(6.0).reshape(3, 2)
        m = assemble([LocalLevel(), Regression(X, [1.0, -1.0])])
        assert m.offset.tolist() == [-1.0, -1.0, -1.0]


class TestFilter:
    def test_local_level_matches_dense_oracle(self):
        model, y = local_level_fixture()
        res = kalman_filter(model, y)
        assert res.loglik == pytest.approx(dense_loglik(model, y), rel=1e-8)

    def test_filtered_moments_match_oracle(self):
        model, y = local_level_fixture(n=8)
        res = kalman_filter(model, y)
        for t in range(8):
            mean, cov = dense_conditional(model, y, upto=t + 1)
            assert res.filtered_mean[t, 0] == pytest.approx(mean[t, 0], rel=1e-8)
            assert res.filtered_cov[t, 0, 0] == pytest.approx(cov[t, 0, 0], rel=1e-8)

    def test_noiseless_observation_tracks_data(self):
        model = assemble([LocalLevel(0.3)], obs_variance=0.0)
        y = np.array([3.0, 1.0, 4.0, 1.0, 5.0])
        res = kalman_filter(model, y)
        np.testing.assert_allclose(res.filtered_mean[:, 0], y, atol=1e-9)

    def test_all_missing(self):
        model = assemble([LocalLinear(0.1, 0.1)], obs_variance=1.0)
        res = kalman_filter(model, np.full(5, np.nan))
        assert res.loglik == 0.0
        P = model.P1
        for t in range(5):
            np.testing.assert_allclose(res.predicted_cov[t], P)
            P = model.T @ P @ model.T.T + model.RQR

    def test_missing_values_match_oracle(self):
        model, y = local_level_fixture(n=12, seed=3)
        y[[2, 3, 9]] = np.nan
        res = kalman_filter(model, y)
        assert res.loglik == pytest.approx(dense_loglik(model, y), rel=1e-8)
        assert not res.used[[2, 3, 9]].any()

    def test_covariances_symmetric_psd(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            model = random_model(rng, 20)
            y = rng.normal(size=20)
            res = kalman_filter(model, y)
            for P in np.concatenate([res.filtered_cov, res.predicted_cov]):
                np.testing.assert_allclose(P, P.T, atol=1e-8)
                assert np.linalg.eigvalsh(P).min() >= -1e-8

    @pytest.mark.parametrize("seed", range(5))
    def test_random_models_match_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(5, 21))
        model = random_model(rng, n)
        y = rng.normal(size=n) * 2
        y[rng.random(n) < 0.15] = np.nan
        res = kalman_filter(model, y)
        assert res.loglik == pytest.approx(dense_loglik(model, y), rel=1e-8)


class TestSmoother:
    def test_last_day_equals_filter(self):
        model, y = local_level_fixture(n=30)
        f = kalman_filter(model, y)
        s = kalman_smoother(model, y)
        assert s.mean[-1, 0] == pytest.approx(f.filtered_mean[-1, 0], rel=1e-12)
        assert s.cov[-1, 0, 0] == pytest.approx(f.filtered_cov[-1, 0, 0], rel=1e-10)

    def test_local_level_matches_dense_oracle(self):
        model, y = local_level_fixture()
        s = kalman_smoother(model, y)
        mean, cov = dense_conditional(model, y)
        np.testing.assert_allclose(s.mean, mean, rtol=1e-8, atol=1e-12)
        np.testing.assert_allclose(s.cov, cov, rtol=1e-8, atol=1e-12)

    def test_static_intercept_constant(self):
        model = assemble([StaticIntercept()], obs_variance=1.0)
        y = np.random.default_rng(0).normal(3.0, 1.0, 50)
        s = kalman_smoother(model, y)
        np.testing.assert_allclose(s.mean[:, 0], s.mean[0, 0], rtol=1e-10)
        assert s.mean[0, 0] == pytest.approx(y.mean(), rel=1e-4)

    @pytest.mark.parametrize("seed", range(5))
    def test_random_models_match_oracle(self, seed):
        rng = np.random.default_rng(100 + seed)
        n = int(rng.integers(5, 21))
        model = random_model(rng, n)
        y = rng.normal(size=n)
        y[rng.random(n) < 0.15] = np.nan
        s = kalman_smoother(model, y)
        mean, cov = dense_conditional(model, y)
        np.testing.assert_allclose(s.mean, mean, rtol=1e-8, atol=1e-9)
        np.testing.assert_allclose(s.cov, cov, rtol=1e-7, atol=1e-9)


class TestSimulationSmoother:
    def test_deterministic(self):
        model, y = local_level_fixture(n=40)
        a = simulation_smoother(model, y, 123)
        b = simulation_smoother(model, y, 123)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, simulation_smoother(model, y, 124))

    def test_zero_variance_gives_smoothed_path(self):
        model = assemble([LocalLevel(0.0)], obs_variance=0.0)
        y = np.full(20, 2.5)
        draw = simulation_smoother(model, y, 0)
        np.testing.assert_allclose(draw[:, 0], kalman_smoother(model, y).mean[:, 0], atol=1e-9)
        np.testing.assert_allclose(draw[:, 0], 2.5, atol=1e-9)

    def test_moments_match_smoother(self):
        model, y = local_level_fixture(n=25, seed=5)
        y[7] = np.nan
        n_draws = 5000
        rng = np.random.default_rng(2024)
        draws = np.array([simulation_smoother(model, y, rng)[:, 0] for _ in range(n_draws)])
        s = kalman_smoother(model, y)
        mean, var = s.mean[:, 0], s.cov[:, 0, 0]
        se_mean = np.sqrt(var / n_draws)
        assert np.all(np.abs(draws.mean(0) - mean) < 3 * se_mean)
        se_var = var * np.sqrt(2.0 / (n_draws - 1))
        assert np.all(np.abs(draws.var(0, ddof=1) - var) < 4 * se_var)

    def test_seasonal_sums_to_zero(self):
        rng = np.random.default_rng(8)
        pattern = np.array([3.0, -1.0, 0.5, -2.0, 1.0, -0.5, -1.0])
        n = 140
        y = np.tile(pattern, n // 7) + rng.normal(0, 0.3, n)
        model = assemble([StaticIntercept(), WeeklySeasonal(0.01)], obs_variance=0.09)
        sl = model.block("seasonal")
        n_draws = 500
        sums = []
        for _ in range(n_draws):
            tau = simulation_smoother(model, y, rng)[:, sl.start]
            sums.append(np.convolve(tau, np.ones(7), "valid").mean())
        sums = np.array(sums)
        assert abs(sums.mean()) < 3 * sums.std(ddof=1) / np.sqrt(n_draws) + 1e-12


class TestForecast:
    def test_static_intercept_zero_variance(self):
        model = assemble([StaticIntercept()], obs_variance=0.25)
        fc = forecast(model, np.array([4.0]), np.zeros((1, 1)), 10)
        np.testing.assert_allclose(fc.mean, 4.0)
        np.testing.assert_allclose(fc.var, 0.25)

    def test_local_level_variance_closed_form(self):
        model, y = local_level_fixture(n=50)
        f = kalman_filter(model, y)
        P_T = f.filtered_cov[-1, 0, 0]
        fc = forecast(model, f.filtered_mean[-1], f.filtered_cov[-1], 42)
        h = np.arange(1, 43)
        np.testing.assert_allclose(fc.var, P_T + h * model.Q[0] + model.H, rtol=1e-12)
        assert np.all(np.diff(fc.var) >= 0)

    def test_horizon_one_matches_filter(self):
        model, y = local_level_fixture(n=50)
        model = assemble([LocalLinear(0.2, 0.05), WeeklySeasonal(0.1)], obs_variance=0.5)
        f = kalman_filter(model, y)
        fc = forecast(model, f.filtered_mean[-1], f.filtered_cov[-1], 1)
        assert fc.mean[0] == pytest.approx(model.Z @ f.predicted_mean[-1])
        assert fc.var[0] == pytest.approx(model.Z @ f.predicted_cov[-1] @ model.Z + model.H)

    def test_sampled_paths(self):
        model, y = local_level_fixture(n=50)
        f = kalman_filter(model, y)
        fc = forecast(model, f.filtered_mean[-1], f.filtered_cov[-1], 5, n_paths=20000, rng=1)
        assert fc.paths.shape == (20000, 5)
        se = np.sqrt(fc.var / 20000)
        assert np.all(np.abs(fc.paths.mean(0) - fc.mean) < 4 * se)

    def test_bad_horizon(self):
        model = assemble([LocalLevel()])
        with pytest.raises(InputError):
            forecast(model, np.zeros(1), np.eye(1), 0)
