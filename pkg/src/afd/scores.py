"""Moment kernels: initial scores and their iterated bias corrections.

A moment kernel is a d_s x n_outcomes matrix S whose column k is the moment
value at outcome y_k, so m(y, x, theta) = S delta(y).  Starting from an
initial score (integrated or profile), each correction step subtracts the
posterior predictive expectation of the current kernel, which in matrix
form multiplies S by (I - Q) from the right.  Iterating q times gives
S (I - Q)^q; the q -> infinity limit projects S onto the left null space
of Q and, when zero eigenvalues exist, produces moment functions whose
conditional expectation vanishes for every heterogeneity value.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .exceptions import DomainError
from .model import TwoBlockBinomialModel
from .prior import AlphaGrid
from .spectral import (DENSE_LIMIT, ZERO_EIG_THRESHOLD, SpectralQ, build_q,
                       stem_apply)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class EigengapWarning(UserWarning):
    """The spectrum near the zero-classification cutoff is not cleanly
    separated; the limiting kernel is numerically ambiguous."""


@dataclass
class MomentKernel:
    """Moment function in matrix form, one column per outcome."""

    values: np.ndarray  # (d_s, n_outcomes)
    tag: str
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if not np.all(np.isfinite(self.values)):
            raise DomainError(f"non-finite entries in {self.tag!r} kernel")

    @property
    def d_s(self) -> int:
        return self.values.shape[0]

    @property
    def n_outcomes(self) -> int:
        return self.values.shape[1]

    def moment(self, k: int) -> np.ndarray:
        """Moment value at outcome index k."""
        return self.values[:, k]


# ---------------------------------------------------------------------------
# initial scores
# ---------------------------------------------------------------------------

def integrated_score(model, x, theta, prior: AlphaGrid, *,
                     spec: SpectralQ | None = None) -> MomentKernel:
    """Gradient of the log prior-predictive probability, per outcome.

    Computed as the posterior-weighted average of the per-alpha analytic
    score, which equals the theta-derivative of log p(y | x, theta) under
    the prior mixture.  An existing ``spec`` for the same (x, theta) is
    reused to avoid rebuilding the likelihood table.
    """
    if spec is None:
        spec = build_q(model, x, theta, prior, mode="factored", rank_warning=False)
    table = spec.table
    if isinstance(model, TwoBlockBinomialModel):
        factors = model.block_score_factors(prior.points, theta)
        rows = table.two_block_score_rows(factors)
    else:
        rows = table.integrated_score_rows(model.score_table(x, prior.points, theta))
    return MomentKernel(rows, tag="integrated")


def mle_alpha(model, x, y, theta, grid_points, *, tol=1e-8):
    """Heterogeneity value maximizing the unit likelihood at fixed theta.

    Grid argmax refined by golden-section search between the neighboring
    grid points.  Ties break toward the smaller value; an argmax at a grid
    end is clamped there and flagged.
    """
    pts = np.asarray(grid_points, dtype=float)
    k = model.outcome_index(y, x)
    logf = model.log_prob_table(x, pts, theta)[k]
    i = int(np.argmax(logf))
    if i == 0 or i == pts.size - 1:
        return float(pts[i]), True
    lo, hi = pts[i - 1], pts[i + 1]

    def nll(a):
        return -model.log_prob(y, x, a, theta)

    # golden-section; deterministic, derivative-free
    c = hi - GOLDEN * (hi - lo)
    d = lo + GOLDEN * (hi - lo)
    fc, fd = nll(c), nll(d)
    while hi - lo > tol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - GOLDEN * (hi - lo)
            fc = nll(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + GOLDEN * (hi - lo)
            fd = nll(d)
    return float((lo + hi) / 2.0), False


def profile_score(model, x, theta, grid: AlphaGrid) -> MomentKernel:
    """Score evaluated at the per-outcome likelihood maximizer of alpha.

    By the envelope theorem the theta-derivative of the profiled
    log-likelihood is the analytic score at the fixed maximizer, so no
    derivative of the argmax is needed.  Boundary outcomes (argmax clamped
    to a grid end) are recorded in the kernel diagnostics.
    """
    outcomes = model.outcomes(x)
    d = model.d_theta
    rows = np.empty((d, len(outcomes)))
    flagged = []
    for k, y in enumerate(outcomes):
        a_hat, clamped = mle_alpha(model, x, y, theta, grid.points)
        rows[:, k] = model.score(y, x, a_hat, theta)
        if clamped:
            flagged.append(k)
    return MomentKernel(rows, tag="profile",
                        diagnostics={"boundary_outcomes": flagged})


# ---------------------------------------------------------------------------
# corrections
# ---------------------------------------------------------------------------

def corrected_score(raw: MomentKernel, spec: SpectralQ, q: int) -> MomentKernel:
    """q-fold bias correction S (I - Q)^q via repeated right products."""
    if q < 0:
        raise DomainError("correction order must be nonnegative")
    if q == 0:
        return raw
    rows = raw.values.copy()
    for _ in range(q):
        rows = rows - spec.rmatvec(rows)
    return MomentKernel(rows, tag=f"{raw.tag}:q={q}")


def _zero_selection(spec: SpectralQ, threshold, mode, k):
    lam = spec.eigenvalues
    if mode == "threshold":
        sel = lam < threshold
    elif mode == "smallest":
        sel = np.zeros(lam.size, dtype=bool)
        sel[lam.size - k:] = True
    else:
        raise DomainError(f"unknown zero-eigenvalue selection mode {mode!r}")
    return sel


def eigengap_diagnostics(spec: SpectralQ, sel) -> dict:
    """Separation between kept and dropped ends of the spectrum."""
    lam = spec.eigenvalues
    if not sel.any() or sel.all():
        return {"eigengap_ratio": np.inf, "clean": True}
    lo = lam[sel].max()
    hi = lam[~sel].min()
    ratio = hi / max(lo, np.finfo(float).tiny)
    return {"eigengap_ratio": float(ratio), "clean": bool(ratio >= 10.0)}


def limit_score(raw: MomentKernel, spec: SpectralQ, threshold=None, *,
                mode="threshold", k=1) -> MomentKernel:
    """Limiting kernel: project S onto the zero-eigenvalue directions.

    ``mode="threshold"`` selects every eigenvalue below the cutoff (the
    default cutoff comes from the spectral build); ``mode="smallest"``
    selects the k smallest eigenvalues regardless of size.  A warning is
    issued when the selected and rejected parts of the spectrum are within
    a factor of 10 of each other, in which case the projector is
    numerically ambiguous.
    """
    spec.require_dense("limit_score")
    thr = spec.threshold if threshold is None else threshold
    sel = _zero_selection(spec, thr, mode, k)
    diag = eigengap_diagnostics(spec, sel)
    diag["zero_count"] = int(sel.sum())
    if not diag["clean"]:
        warnings.warn(
            f"eigengap ratio {diag['eigengap_ratio']:.2f} < 10 around the "
            "zero cutoff; limiting kernel is numerically ambiguous",
            EigengapWarning, stacklevel=2)
    if not sel.any():
        return MomentKernel(np.zeros_like(raw.values), tag=f"{raw.tag}:limit",
                            diagnostics=diag)
    u0 = spec.basis[:, sel]
    sqrt_p = np.sqrt(spec.p)
    left = (raw.values * sqrt_p) @ u0           # S P^{1/2} U0
    rows = (left @ u0.T) / sqrt_p               # ... U0' P^{-1/2}
    return MomentKernel(rows, tag=f"{raw.tag}:limit", diagnostics=diag)


def stem_score(raw: MomentKernel, spec: SpectralQ, h) -> MomentKernel:
    """Kernel S h(Q) for an arbitrary scalar function of the spectrum."""
    return MomentKernel(raw.values @ stem_apply(spec, h),
                        tag=f"{raw.tag}:stem")


def soft_threshold_score(raw: MomentKernel, spec: SpectralQ, c: float) -> MomentKernel:
    """Smooth relaxation of the limiting projector, h(lam) = exp(-lam/c)."""
    if c <= 0:
        raise DomainError("soft-threshold bandwidth must be positive")
    kern = stem_score(raw, spec, lambda lam: np.exp(-lam / c))
    kern.tag = f"{raw.tag}:softexp"
    return kern


# ---------------------------------------------------------------------------
# alternative correction through the fixed-theta MLE of alpha
# ---------------------------------------------------------------------------

def build_q_tilde(model, x, theta, grid: AlphaGrid) -> np.ndarray:
    """Plug-in predictive matrix: column l is f(. | x, alpha_hat(y_l), theta).

    Replaces the posterior over alpha with a point mass at the per-outcome
    likelihood maximizer.  Column-stochastic like Q, but without its
    symmetric similarity structure.
    """
    outcomes = model.outcomes(x)
    a_hats = np.array([mle_alpha(model, x, y, theta, grid.points)[0]
                       for y in outcomes])
    return np.exp(model.log_prob_table(x, a_hats, theta))


def alternative_corrected_score(raw: MomentKernel, q_tilde: np.ndarray,
                                q: int) -> MomentKernel:
    """q-fold correction using the plug-in predictive matrix."""
    rows = raw.values.copy()
    for _ in range(q):
        rows = rows - rows @ q_tilde
    return MomentKernel(rows, tag=f"{raw.tag}:alt-q={q}")


# ---------------------------------------------------------------------------
# exact logit moment functions (test oracle)
# ---------------------------------------------------------------------------

def logit_exact_moment(T0, T1, ybar, ytilde, theta) -> MomentKernel:
    """Exact two-outcome moment function for unit-scale logistic errors.

    For outcome pairs with equal total counts, the likelihood ratio is
    heterogeneity-free: r(theta) = [C(T0, ybar0) C(T1, ybar1) /
    (C(T0, ytilde0) C(T1, ytilde1))] exp[(ybar1 - ytilde1) theta], and
    m(y) = 1{y = ybar} - r(theta) 1{y = ytilde} has zero conditional mean
    at every heterogeneity value.
    """
    yb0, yb1 = ybar
    yt0, yt1 = ytilde
    if (yb0, yb1) == (yt0, yt1):
        raise DomainError("the two anchor outcomes must differ")
    if yb0 + yb1 != yt0 + yt1:
        raise DomainError("anchor outcomes must share the same total count")
    model = TwoBlockBinomialModel(T0, T1, error="logit")

    def log_c(t, y):
        return special.gammaln(t + 1) - special.gammaln(y + 1) - special.gammaln(t - y + 1)

    log_r = (log_c(T0, yb0) + log_c(T1, yb1) - log_c(T0, yt0) - log_c(T1, yt1)
             + (yb1 - yt1) * float(np.atleast_1d(theta)[0]))
    row = np.zeros(model.n_outcomes())
    row[model.outcome_index(ybar)] = 1.0
    row[model.outcome_index(ytilde)] = -np.exp(log_r)
    return MomentKernel(row, tag="logit-exact")


def conditional_bias(kernel: MomentKernel, model, x, theta, alpha) -> np.ndarray:
    """Conditional expectation of the kernel at a fixed heterogeneity value."""
    probs = np.exp(model.log_prob_table(x, np.array([float(alpha)]), theta))[:, 0]
    return kernel.values @ probs


# ---------------------------------------------------------------------------
# one-stop builder used by estimation and simulation
# ---------------------------------------------------------------------------

class KernelBuilder:
    """Constructs the configured moment kernel at any (x, theta).

    Collects the choices that define a moment condition: initial score
    (integrated or profile), correction order q (a nonnegative integer or
    "inf"), the zero-eigenvalue cutoff and selection mode for the limit,
    an optional soft-threshold stem, and whether the plug-in predictive
    matrix replaces the posterior one.
    """

    def __init__(self, model, prior: AlphaGrid, *, score="integrated", q=1,
                 threshold=None, limit_mode="smallest", limit_k=1,
                 stem=None, soft_c=1e-6, use_q_tilde=False,
                 mode="auto", dense_limit=None):
        if score not in ("integrated", "profile"):
            raise DomainError(f"unknown initial score {score!r}")
        if not (q == "inf" or (isinstance(q, (int, np.integer)) and q >= 0)):
            raise DomainError(f"correction order must be a nonnegative integer "
                              f"or 'inf', got {q!r}")
        self.model = model
        self.prior = prior
        self.score = score
        self.q = q
        self.threshold = ZERO_EIG_THRESHOLD if threshold is None else threshold
        self.limit_mode = limit_mode
        self.limit_k = limit_k
        self.stem = stem
        self.soft_c = soft_c
        self.use_q_tilde = use_q_tilde
        self.mode = mode
        self.dense_limit = DENSE_LIMIT if dense_limit is None else dense_limit

    @property
    def needs_eigen(self) -> bool:
        return self.q == "inf" or self.stem is not None

    def build_spec(self, x, theta) -> SpectralQ:
        mode = self.mode
        if mode == "auto" and not self.needs_eigen and not self.use_q_tilde:
            # polynomial paths never need the dense matrix
            mode = "factored"
        return build_q(self.model, x, theta, self.prior, mode=mode,
                       dense_limit=self.dense_limit, threshold=self.threshold,
                       eigen=self.needs_eigen, rank_warning=False)

    def build(self, x, theta) -> MomentKernel:
        spec = self.build_spec(x, theta)
        if self.score == "integrated":
            raw = integrated_score(self.model, x, theta, self.prior, spec=spec)
        else:
            raw = profile_score(self.model, x, theta, self.prior)
        if self.use_q_tilde:
            if self.q == "inf":
                raise DomainError("the plug-in correction supports finite q only")
            q_tilde = build_q_tilde(self.model, x, theta, self.prior)
            return alternative_corrected_score(raw, q_tilde, self.q)
        if self.stem == "softexp":
            return soft_threshold_score(raw, spec, self.soft_c)
        if self.q == "inf":
            return limit_score(raw, spec, self.threshold,
                               mode=self.limit_mode, k=self.limit_k)
        return corrected_score(raw, spec, self.q)
