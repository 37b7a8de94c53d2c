"""Spike-and-slab regression with a conjugate Gaussian / inverse-gamma slab.

Given inclusion indicators ``gamma`` the model for the targets is::

    beta_g | sigma2 ~ N(0, sigma2 * Omega_g^-1)
    1 / sigma2      ~ Gamma(nu / 2, nu * s**2 / 2)
    y | beta, sigma2 ~ N(X_g beta_g, sigma2 I)

with prior precision ``Omega^-1 = g * (w * X'X / n + (1 - w) * diag(X'X / n))``
(``g`` = prior observations' worth of information, ``w`` = information
weight).  Both ``beta`` and ``sigma2`` integrate out analytically, so each
indicator is drawn from its exact conditional given the others.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular

from .errors import InputError, SingularInformation

MAX_EXPECTED_MODEL_SIZE = 5


@dataclass(frozen=True, eq=False)
class SpikeSlabPrior:
    inclusion_prob: np.ndarray
    expected_model_size: float
    information_weight: float = 0.5
    # weak defaults: with controls that explain most of the target, a heavier
    # slab or residual prior pulls variance from the level into the noise
    residual_df: float = 0.01
    residual_sd: float = 0.3
    prior_sample_size: float = 0.01
    forced_in: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        pi = np.array(self.inclusion_prob, dtype=float).ravel()
        forced = frozenset(int(j) for j in self.forced_in)
        if forced and max(forced) >= pi.size:
            raise InputError("forced_in index out of range")
        pi[list(forced)] = 1.0
        if np.any((pi < 0) | (pi > 1)):
            raise InputError("inclusion probabilities must lie in [0, 1]")
        if not 0.0 <= self.information_weight <= 1.0:
            raise InputError("information weight must lie in [0, 1]")
        if self.residual_df <= 0 or self.residual_sd <= 0 or self.prior_sample_size <= 0:
            raise InputError("residual prior df, residual sd guess and prior sample size must be > 0")
        pi.setflags(write=False)
        object.__setattr__(self, "inclusion_prob", pi)
        object.__setattr__(self, "forced_in", forced)

    @property
    def n_columns(self) -> int:
        return self.inclusion_prob.size


def expected_model_size(n_selectable: int) -> int:
    """10% of the selectable columns, at least 1 and at most 5."""
    if n_selectable <= 0:
        return 0
    return max(1, min(math.ceil(0.1 * n_selectable), MAX_EXPECTED_MODEL_SIZE))


def build_prior(
    n_forced: int,
    n_selectable: int,
    model_size: float | None = None,
    inclusion_probs=None,
    **kwargs,
) -> SpikeSlabPrior:
    """Prior over ``n_forced`` always-in columns followed by selectable ones.

    ``inclusion_probs`` (length ``n_selectable``) overrides the uniform
    ``model_size / n_selectable`` default.
    """
    if n_forced < 0 or n_selectable < 0:
        raise InputError("column counts must be >= 0")
    M = expected_model_size(n_selectable) if model_size is None else float(model_size)
    if inclusion_probs is None:
        p = min(M / n_selectable, 1.0) if n_selectable else 0.0
        sel = np.full(n_selectable, p)
    else:
        sel = np.asarray(inclusion_probs, dtype=float).ravel()
        if sel.size != n_selectable:
            raise InputError(f"need {n_selectable} inclusion probabilities, got {sel.size}")
        M = float(sel.sum())
    pi = np.concatenate([np.ones(n_forced), sel])
    return SpikeSlabPrior(pi, M, forced_in=frozenset(range(n_forced)), **kwargs)


def default_prior(n_selectable: int) -> SpikeSlabPrior:
    return build_prior(0, n_selectable)


@dataclass(frozen=True, eq=False)
class RegressionState:
    gamma: np.ndarray
    beta: np.ndarray
    sigma2: float


class SpikeSlabSampler:
    """Gibbs moves for one fixed design matrix.

    Targets change between calls (inside the structural sampler they are
    the residuals after removing the states), so the sufficient statistics
    ``X'y``, ``y'y`` and ``n`` are passed to each move.
    """

    def __init__(self, prior: SpikeSlabPrior, design: np.ndarray):
        X = np.asarray(design, dtype=float)
        if X.ndim != 2 or X.shape[1] != prior.n_columns:
            raise InputError(
                f"design has shape {X.shape}, prior expects {prior.n_columns} columns"
            )
        self.prior = prior
        self.X = X
        self.n = X.shape[0]
        self.XtX = X.T @ X
        info = self.XtX / max(self.n, 1)
        w = prior.information_weight
        self.omega_inv = prior.prior_sample_size * (w * info + (1.0 - w) * np.diag(np.diag(info)))
        pi = prior.inclusion_prob
        with np.errstate(divide="ignore"):
            self._log_pi = np.log(pi)
            self._log_1m_pi = np.log1p(-pi)
        self.selectable = np.flatnonzero((pi > 0) & (pi < 1))
        self.always = np.flatnonzero(pi >= 1)
        self.never = np.flatnonzero(pi <= 0)

    def stats(self, targets: np.ndarray) -> tuple[np.ndarray, float, int]:
        y = np.asarray(targets, dtype=float)
        if y.shape != (self.n,):
            raise InputError(f"targets have shape {y.shape}, design has {self.n} rows")
        return self.X.T @ y, float(y @ y), self.n

    def _posterior(self, idx, Xty, yty, n):
        """(log marginal likelihood, beta mean, chol of posterior precision, SS)."""
        p = self.prior
        ss0 = p.residual_df * p.residual_sd**2
        if idx.size == 0:
            ss = ss0 + yty
            return -0.5 * (p.residual_df + n) * math.log(ss / 2.0), None, None, ss
        O = self.omega_inv[np.ix_(idx, idx)]
        V_inv = self.XtX[np.ix_(idx, idx)] + O
        try:
            L_O = cholesky(O, lower=True)
            L = cholesky(V_inv, lower=True)
        except LinAlgError as exc:
            raise SingularInformation(
                f"information matrix for columns {idx.tolist()} is singular "
                "(collinear or all-zero regressors)"
            ) from exc
        xy = Xty[idx]
        mean = cho_solve((L, True), xy)
        ss = max(ss0 + yty - float(mean @ xy), 1e-300)
        logml = (
            np.log(np.diag(L_O)).sum()
            - np.log(np.diag(L)).sum()
            - 0.5 * (p.residual_df + n) * math.log(ss / 2.0)
        )
        return logml, mean, L, ss

    def log_posterior(self, gamma: np.ndarray, Xty, yty, n) -> float:
        """Unnormalised log p(gamma | y)."""
        g = np.asarray(gamma, dtype=bool)
        logml = self._posterior(np.flatnonzero(g), Xty, yty, n)[0]
        with np.errstate(invalid="ignore"):
            lp = np.where(g, self._log_pi, self._log_1m_pi).sum()
        return logml + lp

    def sweep(self, gamma: np.ndarray, Xty, yty, n, rng: np.random.Generator) -> np.ndarray:
        """One single-site Gibbs pass over the selectable columns, random order."""
        g = np.array(gamma, dtype=bool)
        g[self.always] = True
        g[self.never] = False
        if self.selectable.size == 0:
            return g
        current = self.log_posterior(g, Xty, yty, n)
        for j in rng.permutation(self.selectable):
            g[j] = not g[j]
            flipped = self.log_posterior(g, Xty, yty, n)
            if g[j]:
                lp1, lp0 = flipped, current
            else:
                lp1, lp0 = current, flipped
            # P(gamma_j = 1 | rest)
            prob = 1.0 / (1.0 + math.exp(min(lp0 - lp1, 700.0)))
            g[j] = rng.random() < prob
            current = lp1 if g[j] else lp0
        return g

    def draw(self, gamma: np.ndarray, Xty, yty, n, rng: np.random.Generator):
        """Draw ``(beta, sigma2)`` given the indicators; excluded betas are exactly 0."""
        g = np.asarray(gamma, dtype=bool)
        idx = np.flatnonzero(g)
        _, mean, L, ss = self._posterior(idx, Xty, yty, n)
        shape = 0.5 * (self.prior.residual_df + n)
        sigma2 = 0.5 * ss / rng.gamma(shape)
        beta = np.zeros(self.prior.n_columns)
        if idx.size:
            z = rng.standard_normal(idx.size)
            beta[idx] = mean + math.sqrt(sigma2) * solve_triangular(L, z, lower=True, trans="T")
        return beta, sigma2


def sample_inclusion(
    state: RegressionState, prior: SpikeSlabPrior, design, targets, rng
) -> np.ndarray:
    """Gibbs sweep over inclusion indicators with beta and sigma2 integrated out."""
    rng = np.random.default_rng(rng)
    sampler = SpikeSlabSampler(prior, design)
    return sampler.sweep(state.gamma, *sampler.stats(targets), rng)


def sample_coefficients(gamma, prior: SpikeSlabPrior, design, targets, rng):
    """Draw ``(beta, sigma2)`` from their conditional posterior given ``gamma``."""
    rng = np.random.default_rng(rng)
    sampler = SpikeSlabSampler(prior, design)
    return sampler.draw(gamma, *sampler.stats(targets), rng)


def run_regression(
    prior: SpikeSlabPrior,
    design,
    targets,
    iterations: int,
    burn_in: int = 0,
    rng=None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stand-alone sampler for a plain regression; returns (gammas, betas, sigma2s)."""
    rng = np.random.default_rng(rng)
    sampler = SpikeSlabSampler(prior, design)
    stats = sampler.stats(targets)
    gamma = np.zeros(prior.n_columns, dtype=bool)
    gammas, betas, sigmas = [], [], []
    for it in range(iterations):
        gamma = sampler.sweep(gamma, *stats, rng)
        beta, sigma2 = sampler.draw(gamma, *stats, rng)
        if it >= burn_in:
            gammas.append(gamma)
            betas.append(beta)
            sigmas.append(sigma2)
    return np.array(gammas), np.array(betas), np.array(sigmas)
