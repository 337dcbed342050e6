import numpy as np
import pytest

from afd.distributions import error_distribution
from afd.exceptions import ConfigError, DomainError

KINDS = ["probit", "logit", "logit_std", "laplace"]


@pytest.mark.parametrize("kind", KINDS)
def test_inverse_cdf_roundtrip(kind):
    dist = error_distribution(kind)
    p = np.arange(1, 100) / 100.0
    assert np.allclose(dist.cdf(dist.inverse_cdf(p)), p, atol=1e-10)


@pytest.mark.parametrize("kind", KINDS)
def test_cdf_nondecreasing(kind):
    dist = error_distribution(kind)
    u = np.linspace(-30, 30, 4001)
    assert np.all(np.diff(dist.cdf(u)) >= 0)


@pytest.mark.parametrize("kind", KINDS)
def test_pdf_integrates_to_one(kind):
    dist = error_distribution(kind)
    u = np.linspace(-60, 60, 400001)
    assert abs(np.trapezoid(dist.pdf(u), u) - 1.0) < 1e-6


@pytest.mark.parametrize("kind", KINDS)
def test_log_cdf_matches_cdf(kind):
    dist = error_distribution(kind)
    u = np.linspace(-8, 8, 101)
    assert np.allclose(dist.log_cdf(u), np.log(dist.cdf(u)), rtol=1e-12)
    assert np.allclose(dist.log_sf(u), np.log(1.0 - dist.cdf(u)), rtol=1e-9)
    # deep tail stays finite where the plain cdf would round to 0 or 1
    assert np.isfinite(dist.log_cdf(np.array([-300.0]))).all()


@pytest.mark.parametrize("kind", KINDS)
def test_score_ratios(kind):
    dist = error_distribution(kind)
    u = np.linspace(-6, 6, 61)
    assert np.allclose(dist.cdf_ratio(u), dist.pdf(u) / dist.cdf(u), rtol=1e-10)
    assert np.allclose(dist.sf_ratio(u), dist.pdf(u) / (1 - dist.cdf(u)), rtol=1e-10)


def test_standardized_logistic_has_unit_variance():
    dist = error_distribution("logit_std")
    u = np.linspace(-80, 80, 800001)
    var = np.trapezoid(u * u * dist.pdf(u), u)
    assert abs(var - 1.0) < 1e-6


def test_unknown_kind_rejected():
    with pytest.raises(ConfigError):
        error_distribution("cauchy")


def test_inverse_cdf_domain():
    with pytest.raises(DomainError):
        error_distribution("probit").inverse_cdf(np.array([0.0, 0.5]))
