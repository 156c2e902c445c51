import numpy as np
import pytest

from dobcoord import kernels

pytestmark = pytest.mark.skipif(kernels.rk4_linear_numba is None, reason="numba not installed")


def _case(seed, n=6, steps=200):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(n, n)) - 2 * np.eye(n)
    z0 = rng.normal(size=n)
    h = np.full(steps, 0.01)
    h[-1] = 0.0037
    return M, z0, h


@pytest.mark.parametrize("seed", range(4))
def test_numba_matches_numpy(seed):
    M, z0, h = _case(seed)
    a = np.empty((h.size + 1, z0.size))
    b = np.empty_like(a)
    assert kernels.rk4_linear(M, z0, h, a, use_numba=False) == -1
    assert kernels.rk4_linear(M, z0, h, b, use_numba=True) == -1
    assert np.allclose(a, b, rtol=1e-12, atol=1e-14)


def test_single_step_matches_taylor():
    # one RK4 step on a linear field is the 4th-order Taylor polynomial of exp(hM)
    M, z0, _ = _case(7, n=3)
    h = 0.05
    hm = h * M
    taylor = np.eye(3) + hm + hm @ hm / 2 + hm @ hm @ hm / 6 + hm @ hm @ hm @ hm / 24
    for use in (False, True):
        out = np.empty((2, 3))
        kernels.rk4_linear(M, z0, np.array([h]), out, use_numba=use)
        assert np.allclose(out[1], taylor @ z0, atol=1e-14)


@pytest.mark.parametrize("use", [False, True])
def test_divergence_reported(use):
    M = np.array([[50.0]])
    steps = np.full(100, 0.1)
    out = np.empty((101, 1))
    bad = kernels.rk4_linear(M, np.array([1.0]), steps, out, use_numba=use)
    growth = 1 + 5 + 12.5 + 125 / 6 + 625 / 24  # RK4 amplification at h*lambda = 5
    assert bad == int(np.ceil(9 / np.log10(growth)))


@pytest.mark.parametrize("use", [False, True])
def test_nan_counts_as_divergence(use):
    out = np.empty((3, 1))
    bad = kernels.rk4_linear(np.array([[np.nan]]), np.array([1.0]), np.array([0.1, 0.1]), out, use_numba=use)
    assert bad == 1


def test_env_flag(monkeypatch):
    monkeypatch.setenv("DOBCOORD_NUMBA", "0")
    assert not kernels.numba_enabled()
    monkeypatch.setenv("DOBCOORD_NUMBA", "1")
    assert kernels.numba_enabled()
