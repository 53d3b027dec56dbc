import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trafficformer import fft as F
from trafficformer.errors import DimensionError


def naive_dft(x):
    n = len(x)
    return np.array([sum(x[t] * np.exp(-2j * np.pi * k * t / n) for t in range(n)) for k in range(n)])


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 8, 12, 16, 31, 64, 65, 96, 128, 200])
def test_matches_naive_dft(n, rng):
    x = rng.normal(size=n) + 1j * rng.normal(size=n)
    np.testing.assert_allclose(F.fft(x), naive_dft(x), atol=1e-9 * n)


@pytest.mark.parametrize("n", [8, 12, 100])
def test_each_path_matches_numpy(n, rng):
    x = rng.normal(size=(3, n, 2))
    np.testing.assert_allclose(F.fft(x, axis=1), np.fft.fft(x, axis=1), atol=1e-10)
    np.testing.assert_allclose(F.ifft(x, axis=1), np.fft.ifft(x, axis=1), atol=1e-12)


def test_constant_signal_is_dc_only():
    out = F.fft(np.full(12, 2.5))
    assert out[0] == pytest.approx(2.5 * 12)
    np.testing.assert_allclose(out[1:], 0, atol=1e-12)


def test_impulse_gives_flat_spectrum():
    np.testing.assert_allclose(F.fft(np.array([1.0, 0, 0, 0])), np.ones(4), atol=1e-12)


def test_linearity(rng):
    a, b = rng.normal(size=12), rng.normal(size=12)
    np.testing.assert_allclose(F.fft(a + b), F.fft(a) + F.fft(b), atol=1e-12)


def test_invalid_axis():
    with pytest.raises(DimensionError):
        F.fft(np.zeros((2, 3)), axis=2)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 64), seed=st.integers(0, 2**31))
def test_roundtrip_and_parseval(n, seed):
    x = np.random.default_rng(seed).normal(size=n)
    spec = F.fft(x)
    assert np.abs(F.ifft(spec) - x).max() < 1e-10
    energy = np.sum(np.abs(x) ** 2)
    assert abs(energy - np.sum(np.abs(spec) ** 2) / n) <= 1e-9 * max(energy, 1e-300)
