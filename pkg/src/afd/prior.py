"""Discrete quadrature grids over the unit-level heterogeneity.

Both the analysis prior and the true heterogeneity law are represented the
same way: a finite grid of support points with positive weights summing to
one.  Continuous laws enter through ``inverse_cdf_grid`` (equal-weight
quantile grids) or ``uniform_grid`` (midpoint rule); degenerate laws through
``point_mass``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .exceptions import DomainError, NumericalError


@dataclass(frozen=True)
class AlphaGrid:
    """Finite distribution over heterogeneity values.

    ``points`` must be strictly increasing and ``weights`` strictly
    positive, summing to one within 1e-12.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        wts = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)
        if pts.ndim != 1 or wts.shape != pts.shape or pts.size == 0:
            raise DomainError("grid needs matching 1-d points and weights")
        if np.any(np.diff(pts) <= 0):
            raise DomainError("grid points must be strictly increasing")
        if np.any(wts <= 0):
            raise DomainError("grid weights must be strictly positive")
        if abs(wts.sum() - 1.0) > 1e-12:
            raise DomainError(f"grid weights sum to {wts.sum()!r}, not 1")

    @property
    def size(self) -> int:
        return self.points.size


def inverse_cdf_grid(dist, M: int) -> AlphaGrid:
    """Equal-weight grid at the quantiles j/(M+1), j = 1..M, of ``dist``.

    ``dist`` is anything exposing ``inverse_cdf`` (an error distribution or
    a heterogeneity law below).
    """
    if M < 1:
        raise DomainError("grid needs at least one point")
    p = np.arange(1, M + 1, dtype=float) / (M + 1)
    return AlphaGrid(dist.inverse_cdf(p), np.full(M, 1.0 / M))


def point_mass(z: float) -> AlphaGrid:
    return AlphaGrid(np.array([float(z)]), np.array([1.0]))


def uniform_grid(a: float, b: float, M: int) -> AlphaGrid:
    """Midpoint-rule grid for the uniform law on [a, b]."""
    if not a < b:
        raise DomainError(f"need a < b, got [{a}, {b}]")
    if M < 1:
        raise DomainError("grid needs at least one point")
    j = np.arange(M, dtype=float)
    return AlphaGrid(a + (j + 0.5) * (b - a) / M, np.full(M, 1.0 / M))


def expect(grid: AlphaGrid, g) -> np.ndarray:
    """Quadrature expectation of ``g`` over the grid.

    ``g`` maps a point array to values (last axis aligned with points);
    scalar-valued g returns a scalar.
    """
    vals = np.asarray(g(grid.points), dtype=float)
    if not np.all(np.isfinite(vals)):
        bad = np.argwhere(~np.isfinite(np.atleast_1d(vals)))
        raise NumericalError(f"non-finite integrand at grid positions {bad[:5].ravel()}")
    return vals @ grid.weights if vals.ndim else vals * grid.weights.sum()


# ---------------------------------------------------------------------------
# Heterogeneity laws: quadrature + exact sampling for the same distribution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NormalLaw:
    mean: float = 0.0
    sd: float = 1.0
    kind: str = field(default="normal", init=False)

    def inverse_cdf(self, p):
        return self.mean + self.sd * special.ndtri(np.asarray(p, dtype=float))

    def quadrature(self, M: int) -> AlphaGrid:
        return inverse_cdf_grid(self, M)

    def sample(self, rng, n: int) -> np.ndarray:
        return rng.normal(self.mean, self.sd, size=n)

    @property
    def label(self) -> str:
        return f"N({self.mean:g},{self.sd ** 2:g})"


@dataclass(frozen=True)
class UniformLaw:
    a: float
    b: float
    kind: str = field(default="uniform", init=False)

    def quadrature(self, M: int) -> AlphaGrid:
        return uniform_grid(self.a, self.b, M)

    def sample(self, rng, n: int) -> np.ndarray:
        return rng.uniform(self.a, self.b, size=n)

    @property
    def label(self) -> str:
        return f"U[{self.a:g},{self.b:g}]"


@dataclass(frozen=True)
class PointLaw:
    z: float
    kind: str = field(default="point", init=False)

    def quadrature(self, M: int = 1) -> AlphaGrid:
        return point_mass(self.z)

    def sample(self, rng, n: int) -> np.ndarray:
        return np.full(n, float(self.z))

    @property
    def label(self) -> str:
        return f"delta_{self.z:g}"


def heterogeneity_law(spec: dict):
    """Build a heterogeneity law from its config mapping."""
    kind = spec.get("dist")
    if kind == "normal":
        return NormalLaw(float(spec.get("mean", 0.0)), float(spec.get("sd", 1.0)))
    if kind == "uniform":
        return UniformLaw(float(spec["a"]), float(spec["b"]))
    if kind == "point":
        return PointLaw(float(spec["z"]))
    raise DomainError(f"unknown heterogeneity law {kind!r}")
