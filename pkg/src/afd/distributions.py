"""Error distributions for single-index discrete choice models.

Four families are supported: standard normal (probit), unit-scale logistic
(logit), variance-standardized logistic, and Laplace(0, 1).  All methods are
vectorized over numpy arrays and work in log space where it matters, so
likelihood tables stay finite for several hundred periods per unit.
"""

from __future__ import annotations

import numpy as np
from scipy import special

from .exceptions import ConfigError, DomainError

# integer codes shared with the compiled kernels
PROBIT = 0
LOGIT = 1
LOGIT_STD = 2
LAPLACE = 3

_LOGISTIC_STD_SCALE = np.pi / np.sqrt(3.0)  # unit-variance logistic
_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


class ErrorDistribution:
    """Continuous error law F used in threshold-crossing outcome models.

    Besides the usual cdf/pdf/inverse-cdf triple, the class exposes the two
    log-derivative ratios pdf/cdf and pdf/(1-cdf) that appear in analytic
    scores of Bernoulli-type likelihoods.
    """

    def __init__(self, kind: str):
        if kind not in _CODES:
            raise ConfigError(f"unknown error distribution {kind!r}; "
                              f"expected one of {sorted(_CODES)}")
        self.kind = kind
        self.code = _CODES[kind]

    def __repr__(self):
        return f"ErrorDistribution({self.kind!r})"

    def cdf(self, u):
        u = np.asarray(u, dtype=float)
        if self.code == PROBIT:
            return special.ndtr(u)
        if self.code == LOGIT:
            return special.expit(u)
        if self.code == LOGIT_STD:
            return special.expit(_LOGISTIC_STD_SCALE * u)
        half = 0.5 * np.exp(-np.abs(u))
        return np.where(u < 0, half, 1.0 - half)

    def sf(self, u):
        return self.cdf(-np.asarray(u, dtype=float))

    def pdf(self, u):
        u = np.asarray(u, dtype=float)
        if self.code == PROBIT:
            return np.exp(-0.5 * u * u - _LOG_SQRT_2PI)
        if self.code == LOGIT:
            return special.expit(u) * special.expit(-u)
        if self.code == LOGIT_STD:
            s = _LOGISTIC_STD_SCALE
            return s * special.expit(s * u) * special.expit(-s * u)
        return 0.5 * np.exp(-np.abs(u))

    def inverse_cdf(self, p):
        p = np.asarray(p, dtype=float)
        if np.any((p <= 0.0) | (p >= 1.0)):
            raise DomainError("inverse_cdf requires p in (0, 1)")
        if self.code == PROBIT:
            return special.ndtri(p)
        if self.code == LOGIT:
            return special.logit(p)
        if self.code == LOGIT_STD:
            return special.logit(p) / _LOGISTIC_STD_SCALE
        return np.where(p < 0.5, np.log(2.0 * p), -np.log(2.0 * (1.0 - p)))

    def log_cdf(self, u):
        u = np.asarray(u, dtype=float)
        if self.code == PROBIT:
            return special.log_ndtr(u)
        if self.code == LOGIT:
            return special.log_expit(u)
        if self.code == LOGIT_STD:
            return special.log_expit(_LOGISTIC_STD_SCALE * u)
        return np.where(u < 0, np.log(0.5) + u, np.log1p(-0.5 * np.exp(-np.abs(u))))

    def log_sf(self, u):
        return self.log_cdf(-np.asarray(u, dtype=float))

    def cdf_ratio(self, u):
        """pdf(u) / cdf(u), the derivative of log F."""
        u = np.asarray(u, dtype=float)
        if self.code == LOGIT:
            return special.expit(-u)
        if self.code == LOGIT_STD:
            return _LOGISTIC_STD_SCALE * special.expit(-_LOGISTIC_STD_SCALE * u)
        if self.code == PROBIT:
            return np.exp(-0.5 * u * u - _LOG_SQRT_2PI - special.log_ndtr(u))
        return np.where(u < 0, np.ones_like(u),
                        np.exp(np.log(0.5) - np.abs(u) - self.log_cdf(u)))

    def sf_ratio(self, u):
        """pdf(u) / (1 - cdf(u)), the negative derivative of log(1 - F)."""
        return self.cdf_ratio(-np.asarray(u, dtype=float))


_CODES = {"probit": PROBIT, "logit": LOGIT, "logit_std": LOGIT_STD,
          "laplace": LAPLACE}


def error_distribution(kind: str) -> ErrorDistribution:
    return ErrorDistribution(kind)
