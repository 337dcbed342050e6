"""Pseudo-true values, method-of-moments estimation, and their variances.

The population side works with exact outcome sums: for a fixed design the
probability of each outcome under the true parameter and the true
heterogeneity law is computed by quadrature once, and the expected moment
at any candidate theta is a dot product against the configured kernel.
The sample side replaces those probabilities with empirical outcome
frequencies.  Scalar roots are bracketed and solved with Brent's method;
variances come from the usual sandwich with a central finite-difference
Jacobian.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri

from .exceptions import (BracketError, DiagnosticsError, DomainError,
                         SingularJacobianError)
from .scores import KernelBuilder
from .spectral import prior_predictive

BRACKET_MARGIN = (2.0, 3.0)  # default bracket is [theta0 - 2, theta0 + 3]
JACOBIAN_STEP = 1e-5
ROOT_XTOL = 1e-10


@dataclass(frozen=True)
class TruthSpec:
    """Data-generating process: true parameter, heterogeneity law, design.

    ``design`` is a list of (covariate value, weight) pairs; the two-block
    model uses the single entry (None, 1.0).  ``quad_points`` controls the
    quadrature grid used for population calculations when the true law is
    continuous.
    """

    theta0: float
    pi0: object  # heterogeneity law with .quadrature / .sample
    design: tuple = ((None, 1.0),)
    quad_points: int = 1000

    def pi0_grid(self):
        return self.pi0.quadrature(self.quad_points)


def fixed_design(covariates) -> tuple:
    """Equal-weight design over a fixed list of per-unit covariate values."""
    xs = list(covariates)
    return tuple((x, 1.0 / len(xs)) for x in xs)


@dataclass
class EstimationReport:
    """One estimation row: location, spread, and the derived summaries."""

    q: object
    theta: float
    bias: float
    variance: float
    rmse: float | None = None
    ci95: float | None = None
    diagnostics: dict = field(default_factory=dict)


class PopulationMoment:
    """Expected moment under the true DGP as a function of theta.

    Outcome probabilities under (theta0, pi0) are fixed across calls, so
    they are computed once per design point at construction.
    """

    def __init__(self, builder: KernelBuilder, truth: TruthSpec):
        self.builder = builder
        self.truth = truth
        grid = truth.pi0_grid()
        self._probs = [
            (x, wx, prior_predictive(builder.model, x, truth.theta0, grid))
            for x, wx in truth.design
        ]

    def __call__(self, theta) -> np.ndarray:
        total = 0.0
        for x, wx, probs in self._probs:
            kernel = self.builder.build(x, theta)
            total = total + wx * (kernel.values @ probs)
        return np.atleast_1d(total)

    def variance(self, theta) -> np.ndarray:
        """Var of the moment under the true DGP (design treated as fixed)."""
        mean = 0.0
        second = 0.0
        for x, wx, probs in self._probs:
            vals = self.builder.build(x, theta).values
            mean = mean + wx * (vals @ probs)
            second = second + wx * ((vals ** 2) @ probs)
        return np.atleast_1d(second - mean ** 2)


def population_moment(builder, theta_eval, truth) -> np.ndarray:
    return PopulationMoment(builder, truth)(theta_eval)


def _brent_scalar(fn, bracket, what, xtol=ROOT_XTOL):
    lo, hi = float(bracket[0]), float(bracket[1])
    if not lo < hi:
        raise DomainError(f"invalid bracket [{lo}, {hi}]")
    f_lo = float(fn(lo)[0])
    f_hi = float(fn(hi)[0])
    if np.sign(f_lo) == np.sign(f_hi):
        raise BracketError(
            f"{what} does not change sign over [{lo}, {hi}]: "
            f"endpoint values ({f_lo:.6e}, {f_hi:.6e})")
    root, res = brentq(lambda t: float(fn(t)[0]), lo, hi, xtol=xtol,
                       full_output=True)
    return float(root), res.iterations


def pseudo_true(builder: KernelBuilder, truth: TruthSpec, bracket=None,
                *, xtol=ROOT_XTOL):
    """Parameter value solving the population moment condition.

    Scalar moments only; the bracket must enclose a sign change.  Returns
    (theta_star, diagnostics).
    """
    if bracket is None:
        bracket = (truth.theta0 - BRACKET_MARGIN[0], truth.theta0 + BRACKET_MARGIN[1])
    pm = PopulationMoment(builder, truth)
    root, iters = _brent_scalar(pm, bracket, "population moment", xtol)
    return root, {"iterations": iters, "bracket": tuple(bracket)}


def expand_bracket(fn, center, *, half_width=0.1, grow=1.8, max_rounds=8):
    """Grow a bracket around ``center`` until the scalar ``fn`` changes sign.

    Endpoint evaluations that fail numerically (positivity of the prior
    predictive at extreme parameter values) freeze that side at its last
    good value.  Raises BracketError when no sign change can be found.
    """
    from .exceptions import PositivityError

    def safe(t):
        try:
            return float(fn(t)[0])
        except PositivityError:
            return None

    f_center = safe(center)
    if f_center is None:
        raise BracketError(f"moment undefined at bracket center {center}")
    lo = hi = center
    f_lo = f_hi = f_center
    width = half_width
    for _ in range(max_rounds):
        cand_lo, cand_hi = center - width, center + width
        if cand_lo < lo:
            val = safe(cand_lo)
            if val is not None:
                lo, f_lo = cand_lo, val
        if cand_hi > hi:
            val = safe(cand_hi)
            if val is not None:
                hi, f_hi = cand_hi, val
        if np.sign(f_lo) != np.sign(f_hi):
            return (lo, hi)
        width *= grow
    raise BracketError(
        f"no sign change around {center} after widening to [{lo}, {hi}] "
        f"(endpoint values {f_lo:.3e}, {f_hi:.3e})")


def asymptotic_variance(builder: KernelBuilder, theta_star, truth: TruthSpec,
                        *, step=JACOBIAN_STEP) -> float:
    """Sandwich variance of the method-of-moments estimator at theta_star.

    The moment variance uses exact outcome summation under the true DGP;
    the Jacobian is a central finite difference of the population moment.
    Scalar case: Var[m] / G^2.
    """
    pm = PopulationMoment(builder, truth)
    var = float(pm.variance(theta_star)[0])
    g = float((pm(theta_star + step) - pm(theta_star - step))[0] / (2.0 * step))
    if abs(g) < 1e-12:
        raise SingularJacobianError(
            f"moment Jacobian {g:.3e} at theta={theta_star:.6f}")
    return var / g ** 2


def rmse_coverage(bias, variance, n) -> tuple[float, float]:
    """Root-mean-square error and 95% CI coverage at sample size n.

    rmse = sqrt(V/n + bias^2); coverage is the probability that a standard
    95% interval centered at a N(bias, V/n) draw covers the truth.
    """
    if variance <= 0:
        raise DomainError(f"variance must be positive, got {variance}")
    if n < 1:
        raise DomainError("sample size must be at least 1")
    se = np.sqrt(variance / n)
    rmse = float(np.hypot(se, bias))
    zstar = ndtri(0.975)
    shift = bias / se
    ci95 = float(ndtr(zstar - shift) - ndtr(-zstar - shift))
    return rmse, ci95


def pseudo_true_table(builder_for_q, truth: TruthSpec, q_list, n,
                      bracket=None) -> list[EstimationReport]:
    """Pseudo-true value, variance, rmse and coverage for each q."""
    reports = []
    for q in q_list:
        builder = builder_for_q(q)
        theta_star, diag = pseudo_true(builder, truth, bracket)
        v_star = asymptotic_variance(builder, theta_star, truth)
        bias = theta_star - truth.theta0
        rmse, ci = rmse_coverage(bias, v_star, n)
        reports.append(EstimationReport(q=q, theta=theta_star, bias=bias,
                                        variance=v_star, rmse=rmse, ci95=ci,
                                        diagnostics=diag))
    return reports


# ---------------------------------------------------------------------------
# sample side
# ---------------------------------------------------------------------------

@dataclass
class PanelData:
    """Observed panel: one outcome per unit, optional per-unit covariates.

    Units sharing a covariate value are grouped; each group stores the
    empirical outcome distribution, so sample moments are frequency-kernel
    dot products.
    """

    model: object
    outcomes: list
    covariates: list | None = None

    def __post_init__(self):
        if self.covariates is not None and len(self.covariates) != len(self.outcomes):
            raise DomainError("one covariate value per unit required")
        self.n = len(self.outcomes)
        if self.n == 0:
            raise DomainError("empty dataset")
        self._groups = self._build_groups()

    def _build_groups(self):
        if self.covariates is None:
            counts = np.zeros(self.model.n_outcomes(None))
            for y in self.outcomes:
                counts[self.model.outcome_index(y, None)] += 1
            return [(None, counts)]
        groups = []
        for x, y in zip(self.covariates, self.outcomes):
            counts = np.zeros(self.model.n_outcomes(x))
            counts[self.model.outcome_index(y, x)] = 1.0
            groups.append((x, counts))
        return groups

    def groups(self):
        return self._groups


def sample_moment(data: PanelData, builder: KernelBuilder, theta) -> np.ndarray:
    total = 0.0
    for x, counts in data.groups():
        kernel = builder.build(x, theta)
        total = total + kernel.values @ counts
    return np.atleast_1d(total / data.n)


def mm_estimate(data: PanelData, builder: KernelBuilder, bracket,
                *, xtol=ROOT_XTOL):
    """Method-of-moments estimate: root of the sample moment in theta."""
    try:
        root, iters = _brent_scalar(lambda t: sample_moment(data, builder, t),
                                    bracket, "sample moment", xtol)
    except BracketError as err:
        raise BracketError(f"{err}; widen the bracket or check the data") from None
    return root, {"iterations": iters}


def sandwich_variance(data: PanelData, builder: KernelBuilder, theta_hat,
                      *, step=JACOBIAN_STEP) -> float:
    """Empirical sandwich: sample moment variance over squared Jacobian."""
    mean = 0.0
    second = 0.0
    for x, counts in data.groups():
        vals = builder.build(x, theta_hat).values
        mean = mean + vals @ counts
        second = second + (vals ** 2) @ counts
    mean = mean / data.n
    second = second / data.n
    var = float((second - mean ** 2)[0])
    if var <= 0:
        raise DiagnosticsError("sample moment has zero variance at theta_hat")
    g_hi = sample_moment(data, builder, theta_hat + step)
    g_lo = sample_moment(data, builder, theta_hat - step)
    g = float((g_hi - g_lo)[0] / (2.0 * step))
    if abs(g) < 1e-12:
        raise SingularJacobianError(f"sample Jacobian {g:.3e}")
    return var / g ** 2


def confidence_interval(theta_hat, v_hat, n) -> tuple[float, float]:
    """Standard 95% interval theta_hat +/- z* sqrt(V/n)."""
    half = ndtri(0.975) * np.sqrt(v_hat / n)
    return float(theta_hat - half), float(theta_hat + half)
