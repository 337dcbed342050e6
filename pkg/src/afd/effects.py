"""Average-effect estimating functions built from the posterior predictive.

The target is mu0 = E[mu(X, A, theta0)] for a known functional mu of the
latent heterogeneity.  The baseline estimating function replaces A by its
posterior distribution given the observed outcome; regularized versions
multiply that baseline by the truncated-inverse polynomials

    htilde_q(lam) = sum_{r=0}^{q} (1 - lam)^r  =  (1 - (1-lam)^{q+1}) / lam,

which approximate 1/lam away from zero while staying polynomial in Q, and
the q -> infinity member applies the spectral pseudo-inverse directly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError
from .prior import AlphaGrid
from .spectral import SpectralQ

CONDITION_WARN = 1e12


class EffectConditionWarning(UserWarning):
    """Retained spectrum of the pseudo-inverse is badly conditioned."""


@dataclass(frozen=True)
class EffectSpec:
    """Average-effect functional mu(x, alpha, theta), vectorized in alpha.

    ``nu`` optionally certifies that mu is an outcome-weighted combination
    of likelihood values, mu(x, alpha, theta) = sum_y nu(y) f(y | x, alpha,
    theta), the case in which the pseudo-inverse estimating function is
    exactly unbiased.
    """

    mu: object
    nu: object = None
    label: str = "effect"


def average_partial_effect() -> EffectSpec:
    """Per-period effect of switching the regressor on: F(theta+a) - F(a)."""

    def mu(model, x, alphas, theta):
        th = float(np.atleast_1d(theta)[0])
        return model.error.cdf(th + alphas) - model.error.cdf(alphas)

    return EffectSpec(mu=mu, label="partial_effect")


def _mu_values(effect: EffectSpec, model, x, alphas, theta):
    vals = np.asarray(effect.mu(model, x, np.asarray(alphas, float), theta),
                      dtype=float)
    if vals.shape != np.shape(alphas):
        raise DomainError("effect functional must return one value per grid point")
    return vals


def baseline_effect_kernel(spec: SpectralQ, effect: EffectSpec, model, x,
                           theta, prior: AlphaGrid) -> np.ndarray:
    """Posterior mean of the effect functional, one entry per outcome."""
    mu = _mu_values(effect, model, x, prior.points, theta)
    return spec.table.posterior_mean(mu)


def effect_kernel_q(w0: np.ndarray, spec: SpectralQ, q: int) -> np.ndarray:
    """Regularized estimating function w' htilde_q(Q) via running products.

    q matrix-vector products with (I - Q); no eigendecomposition needed.
    """
    if q < 0:
        raise DomainError("regularization order must be nonnegative")
    term = np.asarray(w0, dtype=float)
    acc = term.copy()
    for _ in range(q):
        term = term - spec.rmatvec(term)
        acc += term
    return acc


def effect_kernel_inf(w0: np.ndarray, spec: SpectralQ, threshold=None) -> np.ndarray:
    """Pseudo-inverse estimating function w' Q^+ through the spectrum.

    Eigenvalues below the cutoff map to zero; the rest invert.  Warns when
    the retained spectrum spans more than CONDITION_WARN in ratio.
    """
    spec.require_dense("effect_kernel_inf")
    thr = spec.threshold if threshold is None else threshold
    lam = spec.eigenvalues
    keep = lam >= thr
    if keep.any():
        cond = float(lam[keep].max() / lam[keep].min())
        if cond > CONDITION_WARN:
            warnings.warn(
                f"retained spectrum condition number {cond:.3e} exceeds "
                f"{CONDITION_WARN:.0e}; the pseudo-inverse effect kernel is "
                "noise-amplifying", EffectConditionWarning, stacklevel=2)
    inv = np.where(keep, 1.0 / np.where(keep, lam, 1.0), 0.0)
    sqrt_p = np.sqrt(spec.p)
    w = np.asarray(w0, dtype=float)
    coeffs = (w * sqrt_p) @ spec.basis
    return ((coeffs * inv) @ spec.basis.T) / sqrt_p


def population_effect(effect: EffectSpec, model, truth) -> float:
    """Exact average of the effect functional under the true DGP."""
    grid = truth.pi0_grid()
    total = 0.0
    for x, wx in truth.design:
        mu = _mu_values(effect, model, x, grid.points, truth.theta0)
        total += wx * float(mu @ grid.weights)
    return total


def population_kernel_mean(w: np.ndarray, model, x, truth) -> tuple[float, float]:
    """Mean and standard deviation of kernel entries under the true DGP."""
    from .spectral import prior_predictive

    probs = prior_predictive(model, x, truth.theta0, truth.pi0_grid())
    mean = float(w @ probs)
    second = float((w ** 2) @ probs)
    return mean, float(np.sqrt(max(second - mean ** 2, 0.0)))


def estimator_effect(data, w_for_x, theta_hat) -> tuple[float, float]:
    """Sample average (and sd) of the estimating function at observed outcomes.

    ``w_for_x`` maps a covariate value to the kernel vector for that x at
    theta_hat.
    """
    vals = []
    for x, counts in data.groups():
        w = w_for_x(x)
        picked = np.repeat(w, counts.astype(int))
        vals.append(picked)
    stacked = np.concatenate(vals)
    return float(stacked.mean()), float(stacked.std())
