"""Discrete-outcome panel likelihoods with unit-level heterogeneity.

Two families are implemented.  ``TwoBlockBinomialModel`` observes a pair of
binomial counts, one for periods with the regressor switched off (success
probability F(alpha)) and one for periods with it on (success probability
F(theta + alpha)).  ``BinarySequenceModel`` observes the full 0/1 sequence
with per-period covariates and success probability F(x_t' theta + alpha).

Everything is computed in log space; binomial coefficients go through
log-gamma so that tables stay finite for several hundred periods.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from itertools import product

import numpy as np

from . import kernels
from .distributions import ErrorDistribution, error_distribution
from .exceptions import DomainError


def counts_from_binary(ystar, T0):
    """Collapse a binary outcome sequence into per-block success counts.

    The first ``T0`` entries form block 0, the rest block 1.  Returns the
    pair ``(y0, y1)`` of counts.
    """
    ystar = np.asarray(ystar)
    if T0 < 0 or T0 > ystar.shape[0]:
        raise DomainError(f"block split {T0} outside sequence of length {ystar.shape[0]}")
    return int(ystar[:T0].sum()), int(ystar[T0:].sum())


class OutcomeModel(ABC):
    """Finite-outcome conditional likelihood f(y | x, alpha, theta).

    Subclasses fix the outcome enumeration (stable and deterministic), the
    log-likelihood, its analytic theta-score, and forward simulation.
    ``theta`` is a length-``d_theta`` vector; models with a scalar index
    accept plain floats as well.
    """

    error: ErrorDistribution
    d_theta: int

    @abstractmethod
    def outcomes(self, x=None):
        """Ordered list of all outcomes for covariate value ``x``."""

    @abstractmethod
    def outcome_index(self, y, x=None) -> int:
        """Position of ``y`` in ``outcomes(x)``; DomainError if absent."""

    @abstractmethod
    def log_prob(self, y, x, alpha, theta) -> float:
        ...

    @abstractmethod
    def score(self, y, x, alpha, theta) -> np.ndarray:
        """Gradient of ``log_prob`` in theta, shape (d_theta,)."""

    @abstractmethod
    def simulate(self, x, alpha, theta, rng):
        """Draw one outcome from f(. | x, alpha, theta)."""

    @abstractmethod
    def log_prob_table(self, x, alphas, theta) -> np.ndarray:
        """Log-likelihood of every outcome at every grid point.

        Shape (n_outcomes, len(alphas)); column j holds log f(. | x,
        alphas[j], theta).
        """

    @abstractmethod
    def score_table(self, x, alphas, theta) -> np.ndarray:
        """Analytic theta-score for every outcome/grid-point pair.

        Shape (d_theta, n_outcomes, len(alphas)).
        """

    def n_outcomes(self, x=None) -> int:
        return len(self.outcomes(x))


def _theta_scalar(theta):
    arr = np.atleast_1d(np.asarray(theta, dtype=float))
    if arr.shape != (1,):
        raise DomainError(f"scalar parameter expected, got shape {arr.shape}")
    return float(arr[0])


class TwoBlockBinomialModel(OutcomeModel):
    """Pair of binomial counts over a two-block binary regressor design.

    Outcomes are pairs (y0, y1) with y0 in 0..T0 and y1 in 0..T1, ordered
    with y0 as the major index.  The likelihood is the product of a
    Binomial(T0, F(alpha)) and a Binomial(T1, F(theta + alpha)) pmf.
    """

    d_theta = 1

    def __init__(self, T0: int, T1: int, error="probit"):
        if T0 < 0 or T1 < 0 or T0 + T1 == 0:
            raise DomainError("block lengths must be nonnegative with T0 + T1 >= 1")
        self.T0 = int(T0)
        self.T1 = int(T1)
        self.T = self.T0 + self.T1
        self.error = error if isinstance(error, ErrorDistribution) \
            else error_distribution(error)
        self._outcomes = [(y0, y1) for y0 in range(self.T0 + 1)
                          for y1 in range(self.T1 + 1)]

    def __repr__(self):
        return (f"TwoBlockBinomialModel(T0={self.T0}, T1={self.T1}, "
                f"error={self.error.kind!r})")

    def outcomes(self, x=None):
        return self._outcomes

    def outcome_index(self, y, x=None):
        y0, y1 = y
        if not (0 <= y0 <= self.T0 and 0 <= y1 <= self.T1):
            raise DomainError(f"outcome {y!r} outside {{0..{self.T0}}} x {{0..{self.T1}}}")
        return int(y0) * (self.T1 + 1) + int(y1)

    def block_log_tables(self, alphas, theta):
        """Per-block binomial log-pmf tables and block-1 score ratios.

        Returns ``(log_b0, log_b1, r1, r0)`` with ``log_b0`` of shape
        (T0+1, M) evaluated at index alpha and ``log_b1`` of shape
        (T1+1, M) at index theta + alpha.
        """
        theta = _theta_scalar(theta)
        alphas = np.asarray(alphas, dtype=float)
        log_b0, _, _ = kernels.binomial_block(self.T0, alphas, self.error.code)
        log_b1, r1, r0 = kernels.binomial_block(self.T1, theta + alphas,
                                                self.error.code)
        return log_b0, log_b1, r1, r0

    def log_prob(self, y, x, alpha, theta):
        k = self.outcome_index(y)  # validates y
        del k
        log_b0, log_b1, _, _ = self.block_log_tables(np.array([alpha]), theta)
        return float(log_b0[y[0], 0] + log_b1[y[1], 0])

    def score(self, y, x, alpha, theta):
        theta = _theta_scalar(theta)
        self.outcome_index(y)
        u1 = theta + float(alpha)
        val = y[1] * self.error.cdf_ratio(u1) - (self.T1 - y[1]) * self.error.sf_ratio(u1)
        return np.array([float(val)])

    def simulate(self, x, alpha, theta, rng):
        theta = _theta_scalar(theta)
        p0 = float(self.error.cdf(alpha))
        p1 = float(self.error.cdf(theta + alpha))
        return int(rng.binomial(self.T0, p0)), int(rng.binomial(self.T1, p1))

    def log_prob_table(self, x, alphas, theta):
        log_b0, log_b1, _, _ = self.block_log_tables(alphas, theta)
        table = log_b0[:, None, :] + log_b1[None, :, :]
        return table.reshape(-1, len(np.atleast_1d(alphas)))

    def score_table(self, x, alphas, theta):
        _, _, r1, r0 = self.block_log_tables(alphas, theta)
        y1 = np.array([y[1] for y in self._outcomes], dtype=float)
        sc = y1[:, None] * r1[None, :] - (self.T1 - y1)[:, None] * r0[None, :]
        return sc[None, :, :]

    def block_score_factors(self, alphas, theta):
        """Score multiplier table over (y1, grid point); block 0 is theta-free."""
        _, _, r1, r0 = self.block_log_tables(alphas, theta)
        y1 = np.arange(self.T1 + 1, dtype=float)
        return y1[:, None] * r1[None, :] - (self.T1 - y1)[:, None] * r0[None, :]


class BinarySequenceModel(OutcomeModel):
    """Full binary sequence over T periods with per-period covariates.

    Covariates are passed per call as ``x``: an array of shape (T,) for a
    scalar index or (T, d_theta) in general.  The outcome space is all 2^T
    sequences, enumerated lexicographically with the first period as the
    major index.
    """

    def __init__(self, T: int, error="probit", d_theta: int = 1):
        if T < 1:
            raise DomainError("need at least one period")
        if T > 20:
            raise DomainError("2^T outcome enumeration is impractical beyond T=20")
        self.T = int(T)
        self.d_theta = int(d_theta)
        self.error = error if isinstance(error, ErrorDistribution) \
            else error_distribution(error)
        self._outcomes = [y for y in product((0, 1), repeat=self.T)]
        self._bits = np.array(self._outcomes, dtype=float)  # (n_Y, T)

    def __repr__(self):
        return f"BinarySequenceModel(T={self.T}, error={self.error.kind!r})"

    def outcomes(self, x=None):
        return self._outcomes

    def outcome_index(self, y, x=None):
        y = tuple(int(v) for v in y)
        if len(y) != self.T or any(v not in (0, 1) for v in y):
            raise DomainError(f"outcome {y!r} is not a binary sequence of length {self.T}")
        k = 0
        for v in y:
            k = (k << 1) | v
        return k

    def _x_matrix(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.shape != (self.T, self.d_theta):
            raise DomainError(f"covariates of shape {(self.T, self.d_theta)} "
                              f"expected, got {x.shape}")
        return x

    def _index(self, x, alphas, theta):
        x = self._x_matrix(x)
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
        return x @ theta[:, None] + alphas[None, :]  # (T, M)

    def log_prob(self, y, x, alpha, theta):
        k = self.outcome_index(y)
        table = self.log_prob_table(x, np.array([alpha]), theta)
        return float(table[k, 0])

    def score(self, y, x, alpha, theta):
        self.outcome_index(y)
        x = self._x_matrix(x)
        eta = self._index(x, np.array([alpha]), theta)[:, 0]
        _, _, r1, r0 = kernels.unit_tables(eta, self.error.code)
        yv = np.asarray(y, dtype=float)
        per_period = yv * r1 - (1.0 - yv) * r0
        return x.T @ per_period

    def simulate(self, x, alpha, theta, rng):
        eta = self._index(x, np.array([alpha]), theta)[:, 0]
        p = self.error.cdf(eta)
        return tuple(int(v) for v in (rng.random(self.T) < p))

    def log_prob_table(self, x, alphas, theta):
        eta = self._index(x, alphas, theta)
        log_cdf, log_sf, _, _ = kernels.unit_tables(eta, self.error.code)
        return self._bits @ log_cdf + (1.0 - self._bits) @ log_sf

    def score_table(self, x, alphas, theta):
        x = self._x_matrix(x)
        eta = self._index(x, alphas, theta)
        _, _, r1, r0 = kernels.unit_tables(eta, self.error.code)
        # score[d, k, j] = sum_t x[t, d] * (y_t r1[t, j] - (1 - y_t) r0[t, j])
        out = np.empty((self.d_theta, len(self._outcomes), eta.shape[1]))
        for d in range(self.d_theta):
            xd = x[:, d][:, None]
            out[d] = self._bits @ (xd * r1) - (1.0 - self._bits) @ (xd * r0)
        return out


def two_block_covariates(T0: int, T1: int) -> np.ndarray:
    """Binary step covariate series: zero for T0 periods, one for T1."""
    return np.concatenate([np.zeros(T0), np.ones(T1)])
