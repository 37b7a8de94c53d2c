import numpy as np
import pytest

from impact_bsts.errors import SingularInformation
from impact_bsts.spike_slab import (
    RegressionState,
    SpikeSlabSampler,
    build_prior,
    default_prior,
    run_regression,
    sample_coefficients,
    sample_inclusion,
)


def standardized(X):
    return (X - X.mean(0)) / X.std(0, ddof=1)


class TestDefaultPrior:
    def test_twenty_controls(self):
        p = default_prior(20)
        assert p.expected_model_size == 2
        np.testing.assert_allclose(p.inclusion_prob, 0.1)

    def test_cap_at_five(self):
        p = default_prior(100)
        assert p.expected_model_size == 5
        np.testing.assert_allclose(p.inclusion_prob, 0.05)

    def test_single_control(self):
        p = default_prior(1)
        assert p.expected_model_size == 1
        assert p.inclusion_prob.tolist() == [1.0]

    def test_constants(self):
        p = default_prior(7)
        assert (p.information_weight, p.residual_df, p.residual_sd) == (0.5, 0.01, 0.3)
        assert p.prior_sample_size == 0.01

    def test_no_controls(self):
        assert default_prior(0).inclusion_prob.size == 0

    def test_forced_columns_have_probability_one(self):
        p = build_prior(3, 10)
        assert p.inclusion_prob[:3].tolist() == [1.0, 1.0, 1.0]
        assert p.forced_in == frozenset({0, 1, 2})


class TestInclusion:
    def test_zero_prior_probability_never_included(self):
        rng = np.random.default_rng(0)
        X = standardized(rng.normal(size=(100, 3)))
        y = 3 * X[:, 1] + rng.normal(0, 0.1, 100)
        prior = build_prior(0, 3, inclusion_probs=[0.5, 0.0, 0.5])
        state = RegressionState(np.array([True, False, True]), np.zeros(3), 1.0)
        gamma = state.gamma
        for k in range(50):
            gamma = sample_inclusion(RegressionState(gamma, np.zeros(3), 1.0), prior, X, y, k)
            assert not gamma[1]

    def test_forced_never_toggled(self):
        rng = np.random.default_rng(1)
        X = standardized(rng.normal(size=(100, 4)))
        y = rng.normal(size=100)
        prior = build_prior(2, 2)
        gamma = np.zeros(4, dtype=bool)
        for k in range(30):
            gamma = sample_inclusion(RegressionState(gamma, np.zeros(4), 1.0), prior, X, y, k)
            assert gamma[:2].all()

    def test_true_signal_found(self):
        rng = np.random.default_rng(2)
        n = 400
        X = standardized(rng.normal(size=(n, 11)))
        y = 2 * X[:, 0] + rng.normal(0, 0.1, n)
        gammas, _, _ = run_regression(default_prior(11), X, y, 1100, burn_in=100, rng=3)
        assert gammas[:, 0].mean() >= 0.95

    def test_pure_noise_prior_dominates(self):
        rng = np.random.default_rng(4)
        n = 400
        X = standardized(rng.normal(size=(n, 10)))
        y = rng.normal(size=n)
        prior = default_prior(10)
        gammas, _, _ = run_regression(prior, X, y, 1100, burn_in=100, rng=5)
        assert gammas.mean() <= 2 * prior.inclusion_prob[0]

    def test_singular_information(self):
        X = np.zeros((20, 1))
        prior = build_prior(1, 0)
        with pytest.raises(SingularInformation):
            sample_coefficients(np.array([True]), prior, X, np.ones(20), 0)

    def test_exact_conditional_by_enumeration(self):
        """Sweep transition frequencies match the enumerated posterior over 2^3 models."""
        rng = np.random.default_rng(6)
        n = 30
        X = standardized(rng.normal(size=(n, 3)))
        y = 0.3 * X[:, 0] + rng.normal(0, 1.0, n)
        prior = build_prior(0, 3, inclusion_probs=[0.5, 0.5, 0.5])
        s = SpikeSlabSampler(prior, X)
        stats = s.stats(y)
        models = [np.array([(k >> b) & 1 for b in range(3)], dtype=bool) for k in range(8)]
        lp = np.array([s.log_posterior(g, *stats) for g in models])
        post = np.exp(lp - lp.max())
        post /= post.sum()
        exact_pip = sum(p * g for p, g in zip(post, models))
        gammas, _, _ = run_regression(prior, X, y, 20000, burn_in=100, rng=7)
        np.testing.assert_allclose(gammas.mean(0), exact_pip, atol=0.03)


class TestCoefficients:
    def test_empty_model(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(50, 3))
        y = rng.normal(size=50)
        prior = default_prior(3)
        gamma = np.zeros(3, dtype=bool)
        beta, sigma2 = sample_coefficients(gamma, prior, X, y, 1)
        assert beta.tolist() == [0.0, 0.0, 0.0]
        # sigma2 ~ IG((nu + n)/2, (nu s^2 + y'y)/2)
        nu, s = prior.residual_df, prior.residual_sd
        shape = (nu + 50) / 2
        scale = (nu * s**2 + y @ y) / 2
        draws = [sample_coefficients(gamma, prior, X, y, k)[1] for k in range(4000)]
        mean = scale / (shape - 1)
        sd = mean / np.sqrt(shape - 2)
        assert abs(np.mean(draws) - mean) < 4 * sd / np.sqrt(4000)

    def test_matches_ols_orthonormal(self):
        rng = np.random.default_rng(1)
        n = 10_000
        Q, _ = np.linalg.qr(rng.normal(size=(n, 3)))
        beta_true = np.array([1.0, -2.0, 0.5])
        y = Q @ beta_true + rng.normal(0, 0.01, n)
        ols = np.linalg.lstsq(Q, y, rcond=None)[0]
        prior = default_prior(3)
        gamma = np.ones(3, dtype=bool)
        draws = np.array([sample_coefficients(gamma, prior, Q, y, k)[0] for k in range(200)])
        np.testing.assert_allclose(draws.mean(0), ols, atol=0.01)

    def test_deterministic(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(40, 2))
        y = rng.normal(size=40)
        g = np.array([True, True])
        a = sample_coefficients(g, default_prior(2), X, y, 99)
        b = sample_coefficients(g, default_prior(2), X, y, 99)
        assert np.array_equal(a[0], b[0]) and a[1] == b[1]

    def test_sparsity_contract(self):
        rng = np.random.default_rng(3)
        X = standardized(rng.normal(size=(200, 8)))
        y = X[:, 2] - X[:, 5] + rng.normal(0, 0.5, 200)
        gammas, betas, _ = run_regression(default_prior(8), X, y, 300, rng=4)
        assert np.all(betas[~gammas] == 0.0)
        assert np.all((betas == 0.0).mean(0) == 1 - gammas.mean(0))


def test_scale_coherence():
    rng = np.random.default_rng(10)
    n = 300
    X = standardized(rng.normal(size=(n, 5)))
    y = 0.15 * X[:, 0] + 0.8 * X[:, 1] + rng.normal(0, 1.0, n)
    c = 7.5
    Xs = X.copy()
    Xs[:, 0] *= c
    prior = default_prior(5)
    g1, b1, _ = run_regression(prior, X, y, 3000, burn_in=200, rng=11)
    g2, b2, _ = run_regression(prior, Xs, y, 3000, burn_in=200, rng=11)
    # the slab precision scales with the column, so p(gamma | y) is unchanged
    s1 = SpikeSlabSampler(prior, X)
    s2 = SpikeSlabSampler(prior, Xs)
    g = np.array([True, True, False, False, True])
    assert s1.log_posterior(g, *s1.stats(y)) == pytest.approx(
        s2.log_posterior(g, *s2.stats(y)), rel=1e-9
    )
    assert abs(g1[:, 0].mean() - g2[:, 0].mean()) < 0.02
    assert b2[:, 0].mean() == pytest.approx(b1[:, 0].mean() / c, rel=1e-6)
