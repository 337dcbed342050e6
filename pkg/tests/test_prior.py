import numpy as np
import pytest
from scipy.special import ndtri

from afd.exceptions import DomainError, NumericalError
from afd.prior import (AlphaGrid, NormalLaw, PointLaw, UniformLaw, expect,
                       heterogeneity_law, inverse_cdf_grid, point_mass,
                       uniform_grid)


class TestInverseCdfGrid:
    def test_single_point_is_median(self):
        grid = inverse_cdf_grid(NormalLaw(), 1)
        assert grid.points[0] == pytest.approx(0.0, abs=1e-12)
        assert grid.weights[0] == 1.0

    def test_thousand_point_endpoints(self):
        grid = inverse_cdf_grid(NormalLaw(), 1000)
        # quantile oracle for the extreme points
        assert grid.points[0] == pytest.approx(ndtri(1 / 1001), abs=1e-12)
        assert grid.points[0] == pytest.approx(-3.0902, abs=1e-4)
        assert grid.points[-1] == pytest.approx(3.0902, abs=1e-4)

    def test_shifted_normal_quartiles(self):
        grid = inverse_cdf_grid(NormalLaw(mean=1.0), 3)
        expected = 1.0 + ndtri(np.array([0.25, 0.5, 0.75]))
        assert np.allclose(grid.points, expected, atol=1e-12)

    def test_symmetry(self):
        grid = inverse_cdf_grid(NormalLaw(), 500)
        assert np.allclose(grid.points + grid.points[::-1], 0.0, atol=1e-12)

    def test_zero_points_rejected(self):
        with pytest.raises(DomainError):
            inverse_cdf_grid(NormalLaw(), 0)


class TestPointAndUniform:
    def test_point_masses(self):
        for z in (0.0, 1.0, 2.0):
            grid = point_mass(z)
            assert grid.points.tolist() == [z]
            assert grid.weights.tolist() == [1.0]

    def test_uniform_midpoints(self):
        assert uniform_grid(0.0, 2.0, 2).points.tolist() == [0.5, 1.5]
        assert uniform_grid(0.5, 1.5, 1).points.tolist() == [1.0]
        assert uniform_grid(0.0, 2.0, 4).points.tolist() == [0.25, 0.75, 1.25, 1.75]

    def test_bad_interval(self):
        with pytest.raises(DomainError):
            uniform_grid(2.0, 2.0, 4)


class TestExpect:
    def test_constant(self):
        grid = inverse_cdf_grid(NormalLaw(), 100)
        assert expect(grid, lambda a: np.ones_like(a)) == pytest.approx(1.0)

    def test_odd_function_symmetric_grid(self):
        grid = inverse_cdf_grid(NormalLaw(), 1000)
        assert expect(grid, lambda a: a) == pytest.approx(0.0, abs=1e-12)

    def test_second_moment_truncation(self):
        grid = inverse_cdf_grid(NormalLaw(), 1000)
        # direct summation oracle: the grid slightly truncates the tails
        direct = float(np.mean(ndtri(np.arange(1, 1001) / 1001.0) ** 2))
        val = expect(grid, lambda a: a ** 2)
        assert val == pytest.approx(direct, rel=1e-14)
        assert val == pytest.approx(0.9937, abs=5e-4)
        assert val < 1.0

    def test_linearity(self, rng):
        grid = uniform_grid(-1, 2, 37)
        f = lambda a: np.sin(a)
        g = lambda a: a ** 3
        lhs = expect(grid, lambda a: 2.0 * f(a) - 0.5 * g(a))
        rhs = 2.0 * expect(grid, f) - 0.5 * expect(grid, g)
        assert lhs == pytest.approx(rhs, rel=1e-13)

    def test_nonfinite_diagnostic(self):
        grid = uniform_grid(0, 1, 4)
        with pytest.raises(NumericalError):
            expect(grid, lambda a: np.where(a > 0.5, np.inf, 1.0))


class TestAlphaGridValidation:
    def test_weights_must_sum_to_one(self):
        with pytest.raises(DomainError):
            AlphaGrid(np.array([0.0, 1.0]), np.array([0.5, 0.6]))

    def test_points_strictly_increasing(self):
        with pytest.raises(DomainError):
            AlphaGrid(np.array([0.0, 0.0]), np.array([0.5, 0.5]))

    def test_positive_weights(self):
        with pytest.raises(DomainError):
            AlphaGrid(np.array([0.0, 1.0]), np.array([1.0, 0.0]))


class TestLaws:
    def test_law_factory(self):
        assert isinstance(heterogeneity_law({"dist": "normal"}), NormalLaw)
        assert isinstance(heterogeneity_law({"dist": "point", "z": 1}), PointLaw)
        assert isinstance(heterogeneity_law({"dist": "uniform", "a": 0, "b": 2}),
                          UniformLaw)
        with pytest.raises(DomainError):
            heterogeneity_law({"dist": "beta"})

    def test_sampling_matches_law(self, rng):
        law = UniformLaw(0.5, 1.5)
        draws = law.sample(rng, 200000)
        assert abs(draws.mean() - 1.0) < 0.005
        assert draws.min() >= 0.5 and draws.max() <= 1.5
        assert np.all(PointLaw(2.0).sample(rng, 5) == 2.0)

    def test_labels(self):
        assert PointLaw(1.0).label == "delta_1"
        assert UniformLaw(0.0, 2.0).label == "U[0,2]"
        assert NormalLaw(1.0, 1.0).label == "N(1,1)"
