import subprocess
import sys

import numpy as np
import pytest
from scipy import stats

from afd import kernels
from afd.distributions import LAPLACE, LOGIT, LOGIT_STD, PROBIT

CODES = [PROBIT, LOGIT, LOGIT_STD, LAPLACE]

numba_only = pytest.mark.skipif(not kernels._HAVE_NUMBA,
                                reason="numba not installed")


@pytest.fixture
def both_backends():
    saved = kernels.active_backend()
    yield
    kernels.set_backend(saved)


@numba_only
@pytest.mark.parametrize("code", CODES)
def test_backend_parity_unit_tables(code, both_backends):
    u = np.concatenate([np.linspace(-36, 36, 401), [-0.0, 0.0, 1e-12]])
    kernels.set_backend("numpy")
    ref = kernels.unit_tables(u, code)
    kernels.set_backend("numba")
    fast = kernels.unit_tables(u, code)
    for a, b in zip(ref, fast):
        assert np.allclose(a, b, rtol=1e-12, atol=1e-300)


@numba_only
@pytest.mark.parametrize("code", CODES)
def test_backend_parity_binomial_block(code, both_backends):
    u = np.linspace(-6, 6, 37)
    kernels.set_backend("numpy")
    ref = kernels.binomial_block(12, u, code)
    kernels.set_backend("numba")
    fast = kernels.binomial_block(12, u, code)
    for a, b in zip(ref, fast):
        assert np.allclose(a, b, rtol=1e-12)


def test_binomial_block_against_scipy():
    u = np.linspace(-3, 3, 11)
    log_b, _, _ = kernels.binomial_block(7, u, PROBIT)
    p = stats.norm.cdf(u)
    for y in range(8):
        assert np.allclose(log_b[y], stats.binom.logpmf(y, 7, p), rtol=1e-12)


def test_unit_tables_preserves_shape():
    u = np.linspace(-2, 2, 12).reshape(3, 4)
    out = kernels.unit_tables(u, PROBIT)
    assert all(a.shape == (3, 4) for a in out)


def test_env_flag_selects_numpy_backend():
    code = ("import afd.kernels as k; print(k.active_backend())")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True,
                         text=True, env={"AFD_NUMBA": "0", "PATH": "/usr/bin:/bin"})
    assert out.stdout.strip() == "numpy"


@numba_only
def test_set_backend_rejects_unknown():
    from afd.exceptions import ConfigError

    with pytest.raises(ConfigError):
        kernels.set_backend("cython")
