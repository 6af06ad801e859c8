import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cirdiv.special import log_bessel_i, scaled_upper_gamma, upper_gamma

mp.mp.dps = 40


@pytest.mark.parametrize("q", [-0.5066, -0.2, 0.0, 0.3, 1.5, 7.25, 40.0])
@pytest.mark.parametrize("z", [1e-8, 1e-3, 0.5, 3.0, 25.0, 200.0, 1e4, 1e6])
def test_log_bessel_i_against_mpmath(q, z):
    ref = float(mp.log(mp.besseli(q, z)))
    assert float(log_bessel_i(q, z)) == pytest.approx(ref, rel=1e-12, abs=1e-12)


@given(st.floats(-0.95, 30.0), st.floats(1e-6, 5e3))
def test_log_bessel_i_hypothesis(q, z):
    ref = float(mp.log(mp.besseli(q, z)))
    assert float(log_bessel_i(q, z)) == pytest.approx(ref, rel=1e-11, abs=1e-11)


def test_log_bessel_i_vectorized_no_overflow():
    z = np.array([1e-3, 1.0, 800.0, 1e5])
    out = log_bessel_i(0.4, z)
    assert out.shape == z.shape and np.all(np.isfinite(out))


@pytest.mark.parametrize("s", [-49.0, -3.7, -1.0, -0.999, -0.5066, -0.2, 0.01, 0.5, 0.9, 2.5])
@pytest.mark.parametrize("x", [1e-8, 1e-4, 0.03, 0.7, 1.0, 4.0, 60.0, 700.0])
def test_upper_gamma_against_mpmath(s, x):
    ref = mp.gammainc(s, x)  # upper incomplete gamma
    if abs(ref) < 1e300:
        assert float(upper_gamma(s, x)) == pytest.approx(float(ref), rel=1e-12)
    scaled = mp.e**x * mp.mpf(x) ** (-s) * ref
    assert float(scaled_upper_gamma(s, x)) == pytest.approx(float(scaled), rel=1e-12)


def test_scaled_upper_gamma_large_x_limit():
    # e^x x^(-s) Gamma(s, x) ~ 1/x as x -> inf
    assert 1e8 * float(scaled_upper_gamma(0.3, 1e8)) == pytest.approx(1.0, abs=1e-7)
