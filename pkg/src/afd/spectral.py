"""Prior predictive vectors, the posterior predictive matrix, and matrix
functions of its spectrum.

Given a likelihood table F[k, j] = f(y_k | x, alpha_j, theta) and prior
weights w, the prior predictive is p = F w and the posterior predictive
matrix is

    Q = F diag(w) F' diag(1/p),

a column-stochastic matrix.  Q is similar to the symmetric positive
semidefinite matrix

    Qbar = diag(p)^{-1/2} F diag(w) F' diag(p)^{-1/2}

via Q = diag(p)^{1/2} Qbar diag(p)^{-1/2}, so its eigenvalues are real,
lie in [0, 1], and are computed here with a symmetric eigensolver.  Scalar
functions of the spectrum (matrix functions) are applied through the same
similarity transform.

Tables are stored row-shifted: A[k, :] = exp(log F[k, :] - c_k) with c_k
the row maximum, so products and sums stay in (0, 1] whenever the prior
predictive positivity precondition holds.  The shifts cancel in every
posterior ratio.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DiagnosticsError, DomainError, PositivityError
from .model import TwoBlockBinomialModel
from .prior import AlphaGrid

POSITIVITY_FLOOR = 1e-300
DENSE_LIMIT = 4096
ZERO_EIG_THRESHOLD = 1e-9
FP_EIG_FLOOR = 1e-15
_LOG_FLOOR = np.log(POSITIVITY_FLOOR)


class QuadratureRankWarning(UserWarning):
    """Prior grid coarser than the outcome space; the posterior predictive
    matrix is rank-truncated by the discretization."""


def _check_positivity(log_p):
    low = log_p.min()
    if low < _LOG_FLOOR or not np.isfinite(low):
        k = int(np.argmin(log_p))
        raise PositivityError(
            f"prior predictive probability of outcome index {k} is "
            f"exp({low:.1f}) < {POSITIVITY_FLOOR:g}; the posterior predictive "
            "matrix requires p(y | x, theta) > 0 for every outcome")


class DenseTable:
    """Row-shifted likelihood table for a generic finite-outcome model."""

    def __init__(self, log_f, weights):
        self.shift = log_f.max(axis=1)
        self.A = np.exp(log_f - self.shift[:, None])
        self.w = np.asarray(weights, dtype=float)
        self.D = self.A @ self.w
        with np.errstate(divide="ignore"):
            self.log_p = self.shift + np.log(self.D)
        _check_positivity(self.log_p)
        self.p = np.exp(self.log_p)
        self.n_outcomes = log_f.shape[0]
        self.n_grid = log_f.shape[1]

    def rmatvec(self, rows):
        """rows @ Q for rows of shape (..., n_outcomes)."""
        scaled = rows * np.exp(self.shift)
        u = scaled @ self.A
        return ((u * self.w) @ self.A.T) / self.D

    def matvec(self, col):
        """Q @ col for a vector of shape (n_outcomes,)."""
        t = self.A.T @ (col / self.D)
        return np.exp(self.shift) * (self.A @ (self.w * t))

    def posterior_mean(self, values):
        """Posterior expectation of grid-point values, one per outcome."""
        return (self.A @ (self.w * values)) / self.D

    def integrated_score_rows(self, score_table):
        """Posterior-weighted score, shape (d_theta, n_outcomes)."""
        num = np.einsum("km,dkm->dk", self.A * self.w, score_table)
        return num / self.D

    def dense_f(self):
        return np.exp(self.shift)[:, None] * self.A


class KroneckerTable:
    """Two-block likelihood table kept in factored form.

    The table is the row-wise Kronecker product of two binomial blocks, so
    matrix-vector products with Q cost O(n_outcomes * n_grid) without ever
    materializing the full table.
    """

    def __init__(self, log_b0, log_b1, weights):
        self.c0 = log_b0.max(axis=1)
        self.c1 = log_b1.max(axis=1)
        self.A0 = np.exp(log_b0 - self.c0[:, None])
        self.A1 = np.exp(log_b1 - self.c1[:, None])
        self.w = np.asarray(weights, dtype=float)
        self.n0 = log_b0.shape[0]
        self.n1 = log_b1.shape[0]
        self.n_outcomes = self.n0 * self.n1
        self.n_grid = log_b0.shape[1]
        self._gamma = self.c0[:, None] + self.c1[None, :]
        self._scale = np.exp(self._gamma)
        self.D2 = (self.A0 * self.w) @ self.A1.T  # (n0, n1), in (0, 1]
        with np.errstate(divide="ignore"):
            log_p2 = self._gamma + np.log(self.D2)
        _check_positivity(log_p2.ravel())
        self.log_p = log_p2.ravel()
        self.p = np.exp(self.log_p)
        self.D = self.D2.ravel()

    def rmatvec(self, rows):
        rows = np.asarray(rows)
        single = rows.ndim == 1
        rows2 = np.atleast_2d(rows)
        out = np.empty_like(rows2)
        for i, r in enumerate(rows2):
            R = (r.reshape(self.n0, self.n1)) * self._scale
            u = np.einsum("aj,aj->j", self.A0, R @ self.A1)
            out[i] = (((self.A0 * (self.w * u)) @ self.A1.T) / self.D2).ravel()
        return out[0] if single else out

    def matvec(self, col):
        V = col.reshape(self.n0, self.n1) / self.D2
        t = np.einsum("aj,aj->j", self.A0, V @ self.A1)
        out = (self.A0 * (self.w * t)) @ self.A1.T * self._scale
        return out.ravel()

    def posterior_mean(self, values):
        out = (self.A0 * (self.w * values)) @ self.A1.T / self.D2
        return out.ravel()

    def two_block_score_rows(self, score_factors):
        """Posterior-weighted score when only block 1 carries theta.

        ``score_factors`` has shape (n1, n_grid); the result is a single
        score row of shape (1, n_outcomes).
        """
        num = (self.A0 * self.w) @ (self.A1 * score_factors).T
        return (num / self.D2).reshape(1, -1)

    def dense_f(self):
        f0 = np.exp(self.c0)[:, None] * self.A0
        f1 = np.exp(self.c1)[:, None] * self.A1
        return (f0[:, None, :] * f1[None, :, :]).reshape(self.n_outcomes, -1)


@dataclass
class SpectralQ:
    """Posterior predictive matrix for one (x, theta) with its spectrum.

    In dense mode ``Q`` is materialized and the eigendecomposition of the
    symmetrized matrix is available: ``eigenvalues`` sorted descending and
    ``basis`` the orthonormal eigenvectors of Qbar.  In factored mode only
    matrix-vector products are supported.
    """

    model: object
    x: object
    theta: object
    prior: AlphaGrid
    table: object
    p: np.ndarray
    log_p: np.ndarray
    dense: bool
    Q: np.ndarray | None = None
    eigenvalues: np.ndarray | None = None
    basis: np.ndarray | None = None
    threshold: float = ZERO_EIG_THRESHOLD
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_outcomes(self) -> int:
        return self.table.n_outcomes

    def rmatvec(self, rows):
        return self.table.rmatvec(rows)

    def matvec(self, col):
        return self.table.matvec(col)

    def require_dense(self, what):
        if not self.dense or self.eigenvalues is None:
            raise DomainError(f"{what} needs a dense build with eigendecomposition; "
                              "this handle is factored (use the polynomial path)")


def _likelihood_table(model, x, theta, prior: AlphaGrid):
    if isinstance(model, TwoBlockBinomialModel):
        log_b0, log_b1, _, _ = model.block_log_tables(prior.points, theta)
        return KroneckerTable(log_b0, log_b1, prior.weights)
    log_f = model.log_prob_table(x, prior.points, theta)
    return DenseTable(log_f, prior.weights)


def prior_predictive(model, x, theta, prior: AlphaGrid) -> np.ndarray:
    """Probability of each outcome under the prior mixture of the model."""
    return _likelihood_table(model, x, theta, prior).p


def build_q(model, x, theta, prior: AlphaGrid, *, mode="auto",
            dense_limit=DENSE_LIMIT, threshold=ZERO_EIG_THRESHOLD,
            eigen=True, rank_warning=True) -> SpectralQ:
    """Build the posterior predictive matrix bundle for one (x, theta).

    ``mode`` is "auto" (dense when the outcome space is at most
    ``dense_limit``), "dense", or "factored".  The eigendecomposition is
    computed in dense mode when ``eigen`` is true, always through the
    symmetrized similarity transform.
    """
    table = _likelihood_table(model, x, theta, prior)
    n = table.n_outcomes
    if mode == "auto":
        mode = "dense" if n <= dense_limit else "factored"
    if mode not in ("dense", "factored"):
        raise DomainError(f"unknown build mode {mode!r}")
    if rank_warning and prior.size < n:
        warnings.warn(
            f"prior grid has {prior.size} points for {n} outcomes; the "
            "posterior predictive matrix is rank-truncated by the quadrature",
            QuadratureRankWarning, stacklevel=2)

    spec = SpectralQ(model=model, x=x, theta=theta, prior=prior, table=table,
                     p=table.p, log_p=table.log_p, dense=(mode == "dense"),
                     threshold=threshold)
    if mode == "factored":
        return spec

    f = table.dense_f()
    spec.Q = (f * prior.weights) @ f.T / table.p[None, :]
    if eigen:
        g = (f * np.sqrt(prior.weights)) / np.sqrt(table.p)[:, None]
        qbar = g @ g.T
        lam, vec = np.linalg.eigh(qbar)
        lam = lam[::-1]
        vec = vec[:, ::-1]
        if lam[0] > 1.0 + 1e-8 or lam[-1] < -1e-8:
            raise DiagnosticsError(
                f"spectrum escapes [0, 1]: range [{lam[-1]:.3e}, {lam[0]:.3e}]")
        spec.eigenvalues = np.clip(lam, 0.0, 1.0)
        spec.basis = vec
    return spec


def stem_apply(spec: SpectralQ, h) -> np.ndarray:
    """Matrix function h(Q): apply ``h`` to each eigenvalue, keep eigenvectors.

    Returns the dense n x n matrix diag(p)^{1/2} U h(L) U' diag(p)^{-1/2}.
    """
    spec.require_dense("stem_apply")
    hl = np.asarray(h(spec.eigenvalues), dtype=float)
    sqrt_p = np.sqrt(spec.p)
    core = (spec.basis * hl) @ spec.basis.T
    return sqrt_p[:, None] * core / sqrt_p[None, :]


def polynomial_apply(spec: SpectralQ, coeffs, v, *, adjoint=False) -> np.ndarray:
    """Evaluate sum_r coeffs[r] (I - Q)^r v using only Q-products.

    Horner evaluation; works in dense and factored mode.  With ``adjoint``
    the row form v' sum_r coeffs[r] (I - Q)^r is computed instead.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    v = np.asarray(v, dtype=float)
    prod = spec.rmatvec if adjoint else spec.matvec
    acc = coeffs[-1] * v
    for c in coeffs[-2::-1]:
        acc = acc - prod(acc) + c * v
    return acc


def zero_eig_count(spec: SpectralQ, threshold=None) -> int:
    """Number of eigenvalues classified as zero (below the cutoff)."""
    spec.require_dense("zero_eig_count")
    thr = spec.threshold if threshold is None else threshold
    return int(np.sum(spec.eigenvalues < thr))


def eigen_report(models, theta, prior: AlphaGrid, *, x=None,
                 fp_floor=FP_EIG_FLOOR) -> list[dict]:
    """Full spectra for a sweep of models at a common theta and prior.

    Returns one row per eigenvalue with columns T, T0, T1, theta, j,
    lambda, below_fp_floor.  Eigenvalues under ``fp_floor`` sit below what
    a double-precision symmetric eigensolver can resolve and are flagged
    rather than trusted digit-for-digit.
    """
    rows = []
    for model in models:
        spec = build_q(model, x, theta, prior, mode="dense", rank_warning=False)
        t0 = getattr(model, "T0", None)
        t1 = getattr(model, "T1", None)
        total = getattr(model, "T", spec.n_outcomes)
        for j, lam in enumerate(spec.eigenvalues, start=1):
            rows.append({
                "T": total, "T0": t0, "T1": t1, "theta": float(np.atleast_1d(theta)[0]),
                "j": j, "lambda": float(lam),
                "below_fp_floor": bool(lam < fp_floor),
            })
    return rows
