"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

Two primitives dominate the runtime of every likelihood-table build:

* ``unit_tables`` -- fused elementwise evaluation of log F, log(1-F) and the
  two score ratios pdf/F, pdf/(1-F) on an array of index values;
* ``binomial_block`` -- the (T+1) x M table of binomial log-pmfs over a grid
  of index values, plus the score ratios for that block.

The backend is chosen at import time from the ``AFD_NUMBA`` environment
variable: any of ``0``, ``false``, ``no``, ``off`` selects the numpy
fallback, everything else (including unset) uses numba when it is
importable.  ``set_backend`` switches at runtime, which the benchmark and
the parity tests rely on.  Heavy linear algebra elsewhere in the package
stays on numpy/BLAS in both lanes; only the transcendental table fills are
compiled.
"""

from __future__ import annotations

import math
import os

import numpy as np
from scipy import special

from .distributions import LAPLACE, LOGIT, LOGIT_STD, PROBIT
from .exceptions import ConfigError

_SQRT2 = math.sqrt(2.0)
_LOG_HALF = math.log(0.5)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_LOGISTIC_STD_SCALE = math.pi / math.sqrt(3.0)

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    _HAVE_NUMBA = False


def _env_wants_numba() -> bool:
    flag = os.environ.get("AFD_NUMBA", "1").strip().lower()
    return flag not in {"0", "false", "no", "off"}


_USE_NUMBA = _HAVE_NUMBA and _env_wants_numba()


def active_backend() -> str:
    return "numba" if _USE_NUMBA else "numpy"


def set_backend(name: str) -> None:
    """Select the kernel backend at runtime ("numba" or "numpy")."""
    global _USE_NUMBA
    if name == "numba":
        if not _HAVE_NUMBA:
            raise ConfigError("numba backend requested but numba is not installed")
        _USE_NUMBA = True
    elif name == "numpy":
        _USE_NUMBA = False
    else:
        raise ConfigError(f"unknown kernel backend {name!r}")


# ---------------------------------------------------------------------------
# numpy lane
# ---------------------------------------------------------------------------

def _unit_tables_np(u, code):
    u = np.asarray(u, dtype=float)
    if code == PROBIT:
        log_cdf = special.log_ndtr(u)
        log_sf = special.log_ndtr(-u)
        log_pdf = -0.5 * u * u - _LOG_SQRT_2PI
        r1 = np.exp(log_pdf - log_cdf)
        r0 = np.exp(log_pdf - log_sf)
    elif code in (LOGIT, LOGIT_STD):
        s = 1.0 if code == LOGIT else _LOGISTIC_STD_SCALE
        log_cdf = special.log_expit(s * u)
        log_sf = special.log_expit(-s * u)
        r1 = s * special.expit(-s * u)
        r0 = s * special.expit(s * u)
    elif code == LAPLACE:
        au = np.abs(u)
        log_half_exp = _LOG_HALF - au  # log(0.5 e^{-|u|}) = log pdf
        lower = u < 0
        log_cdf = np.where(lower, _LOG_HALF + u, np.log1p(-0.5 * np.exp(-au)))
        log_sf = np.where(lower, np.log1p(-0.5 * np.exp(-au)), _LOG_HALF - u)
        r1 = np.where(lower, 1.0, np.exp(log_half_exp - log_cdf))
        r0 = np.where(lower, np.exp(log_half_exp - log_sf), 1.0)
    else:
        raise ConfigError(f"unknown error code {code}")
    return log_cdf, log_sf, r1, r0


def _binomial_block_np(T, u, code):
    log_cdf, log_sf, r1, r0 = _unit_tables_np(u, code)
    y = np.arange(T + 1, dtype=float)
    log_coef = special.gammaln(T + 1.0) - special.gammaln(y + 1.0) \
        - special.gammaln(T - y + 1.0)
    log_b = log_coef[:, None] + y[:, None] * log_cdf[None, :] \
        + (T - y)[:, None] * log_sf[None, :]
    return log_b, r1, r0


# ---------------------------------------------------------------------------
# numba lane
# ---------------------------------------------------------------------------

if _HAVE_NUMBA:

    @numba.njit(cache=True, inline="always")
    def _log_ndtr_nb(u):
        if u > 1.0:
            return math.log1p(-0.5 * math.erfc(u / _SQRT2))
        if u > -37.0:
            return math.log(0.5 * math.erfc(-u / _SQRT2))
        # asymptotic tail; unreachable for the index ranges used here
        usq = u * u
        return -0.5 * usq - math.log(-u) - _LOG_SQRT_2PI \
            + math.log1p(-1.0 / usq + 3.0 / (usq * usq))

    @numba.njit(cache=True)
    def _unit_tables_nb(u, code, log_cdf, log_sf, r1, r0):
        n = u.shape[0]
        if code == PROBIT:
            for i in range(n):
                v = u[i]
                lc = _log_ndtr_nb(v)
                ls = _log_ndtr_nb(-v)
                lp = -0.5 * v * v - _LOG_SQRT_2PI
                log_cdf[i] = lc
                log_sf[i] = ls
                r1[i] = math.exp(lp - lc)
                r0[i] = math.exp(lp - ls)
        elif code == LOGIT or code == LOGIT_STD:
            s = 1.0 if code == LOGIT else _LOGISTIC_STD_SCALE
            for i in range(n):
                v = s * u[i]
                if v >= 0.0:
                    lc = -math.log1p(math.exp(-v))
                    ls = -v - math.log1p(math.exp(-v))
                else:
                    lc = v - math.log1p(math.exp(v))
                    ls = -math.log1p(math.exp(v))
                log_cdf[i] = lc
                log_sf[i] = ls
                r1[i] = s * math.exp(ls)
                r0[i] = s * math.exp(lc)
        else:  # LAPLACE
            for i in range(n):
                v = u[i]
                if v < 0.0:
                    lc = _LOG_HALF + v
                    ls = math.log1p(-0.5 * math.exp(v))
                    log_cdf[i] = lc
                    log_sf[i] = ls
                    r1[i] = 1.0
                    r0[i] = math.exp(_LOG_HALF + v - ls)
                else:
                    lc = math.log1p(-0.5 * math.exp(-v))
                    ls = _LOG_HALF - v
                    log_cdf[i] = lc
                    log_sf[i] = ls
                    r1[i] = math.exp(_LOG_HALF - v - lc)
                    r0[i] = 1.0

    @numba.njit(cache=True)
    def _binomial_block_nb(T, u, code):
        m = u.shape[0]
        log_cdf = np.empty(m)
        log_sf = np.empty(m)
        r1 = np.empty(m)
        r0 = np.empty(m)
        _unit_tables_nb(u, code, log_cdf, log_sf, r1, r0)
        log_b = np.empty((T + 1, m))
        lgT = math.lgamma(T + 1.0)
        for y in range(T + 1):
            coef = lgT - math.lgamma(y + 1.0) - math.lgamma(T - y + 1.0)
            fy = float(y)
            for j in range(m):
                log_b[y, j] = coef + fy * log_cdf[j] + (T - fy) * log_sf[j]
        return log_b, r1, r0


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def unit_tables(u, code):
    """Return (log F, log(1-F), pdf/F, pdf/(1-F)) elementwise over ``u``."""
    u = np.ascontiguousarray(u, dtype=float)
    if _USE_NUMBA:
        shape = u.shape
        flat = u.ravel()
        log_cdf = np.empty_like(flat)
        log_sf = np.empty_like(flat)
        r1 = np.empty_like(flat)
        r0 = np.empty_like(flat)
        _unit_tables_nb(flat, code, log_cdf, log_sf, r1, r0)
        return (log_cdf.reshape(shape), log_sf.reshape(shape),
                r1.reshape(shape), r0.reshape(shape))
    return _unit_tables_np(u, code)


def binomial_block(T, u, code):
    """Binomial log-pmf table over counts 0..T and index values ``u``.

    Returns ``(log_b, r1, r0)`` where ``log_b[y, j]`` is the log-pmf of
    count y out of T trials with success probability F(u[j]), and r1, r0
    are the score ratios pdf/F and pdf/(1-F) at each u[j].
    """
    u = np.ascontiguousarray(u, dtype=float)
    if _USE_NUMBA:
        return _binomial_block_nb(int(T), u, code)
    return _binomial_block_np(int(T), u, code)
