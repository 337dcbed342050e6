import numpy as np
import pytest

from afd.model import TwoBlockBinomialModel
from afd.prior import NormalLaw
from afd.spectral import build_q


@pytest.fixture(scope="session")
def std_normal_grid():
    """The reference analysis prior: standard normal, 1000 quantile points."""
    return NormalLaw().quadrature(1000)


@pytest.fixture(scope="session")
def probit_t4(std_normal_grid):
    """Probit two-block model with T0 = T1 = 2 and its spectrum at theta=1."""
    model = TwoBlockBinomialModel(2, 2, error="probit")
    spec = build_q(model, None, 1.0, std_normal_grid)
    return model, spec


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
