import numpy as np
import pytest

from mixpersist import _accel
from mixpersist.quadrature import tanh_sinh_rule

pytestmark = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")

rng = np.random.default_rng(12345)


def both(name, *args):
    return _accel.kernels("numpy")[name](*args), _accel.kernels("numba")[name](*args)


def test_first_exceedance_identical():
    paths = rng.standard_normal((300, 50)).cumsum(axis=1)
    thr = np.linspace(1.0, 3.0, 50)
    a, b = both("first_exceedance", paths, thr)
    assert a.dtype == b.dtype == np.int64
    assert np.array_equal(a, b)
    assert np.all((a >= 0) & (a <= 50))


def test_bridge_log_survival_matches():
    times = np.concatenate([[0.0], np.geomspace(1e-2, 10.0, 40)])
    paths = np.zeros((200, times.size))
    paths[:, 1:] = (rng.standard_normal((200, 40)) * np.sqrt(np.diff(times))).cumsum(axis=1)
    cuts = np.array([1, 5, 20, 41], dtype=np.int64)
    a, b = both("bridge_log_survival", paths, times, 1.0, cuts)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=0)
    assert np.array_equal(np.isneginf(a), np.isneginf(b))
    assert np.all(np.diff(np.exp(a), axis=1) <= 0)


def test_cumulative_trapezoid_matches():
    times = np.sort(rng.uniform(0, 5, 30))
    paths = rng.standard_normal((20, 30))
    a, b = both("cumulative_trapezoid", paths, times)
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-14)


@pytest.mark.parametrize("c", [0.2, -0.3])
def test_mg_sums_match(c):
    y, _, w = tanh_sinh_rule(5, 5.5)
    ratio = np.geomspace(1e-6, 1e6, 40)
    a, b = both("mg_sum_upper", c, c - 1.0, ratio, y, w)
    np.testing.assert_allclose(a, b, rtol=1e-12)
    a, b = both("mg_sum_lower", c, ratio, y, w)
    np.testing.assert_allclose(a, b, rtol=1e-12)


def test_backend_selection():
    assert _accel.BACKEND in ("numba", "numpy")
    with pytest.raises(ValueError):
        _accel.kernels("fortran")
