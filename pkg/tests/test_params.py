import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cirdiv import CirParams, DomainError, Regime, RegimeError

pos = st.floats(1e-4, 10.0, allow_nan=False)


def test_fig2_R_by_direct_arithmetic():
    p = CirParams(0.001, 0.002, 0.07)
    assert p.R == pytest.approx(0.002 / (0.07**2 / 2 - 0.001), rel=1e-15)
    assert p.R == pytest.approx(1.3793103448275859, rel=1e-14)


@pytest.mark.parametrize("bad", [(0, 1, 1), (1, -1, 1), (1, 1, 0), (math.nan, 1, 1), (1, math.inf, 1)])
def test_rejects_nonpositive_or_nonfinite(bad):
    with pytest.raises(DomainError):
        CirParams(*bad)


def test_regimes():
    assert CirParams(0.1, 0.05, 0.2).regime is Regime.LOW_VOL
    assert CirParams(0.125, 0.05, 0.5).regime is Regime.LOW_VOL  # boundary delta^2 = 2a belongs to LowVol
    assert CirParams(0.001, 0.002, 0.07).regime is Regime.HIGH_VOL
    assert CirParams(0.001, 0.002, 0.09).zero_attainable
    assert CirParams(0.001, 0.002, 0.07).zero_attainable
    assert not CirParams(0.001, 0.004, 0.07).zero_attainable


def test_R_only_in_high_volatility():
    with pytest.raises(RegimeError):
        CirParams(0.1, 0.05, 0.2).R


@given(pos, pos, pos)
def test_derived_quantities(a, b, delta):
    p = CirParams(a, b, delta)
    assert p.q > -1
    assert p.k == pytest.approx(p.q + 1)
    assert (p.regime is Regime.LOW_VOL) == (delta * delta <= 2 * a)
    if p.regime is Regime.HIGH_VOL:
        assert p.R > 0
