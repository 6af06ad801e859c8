import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cirdiv import (
    CirParams,
    DomainError,
    Functionals,
    RegimeError,
    ValueFunction,
    laplace_M,
    value_H,
    zero_barrier_value,
)
from cirdiv.mc import last_exit_expectation
from cirdiv.value import HJB_TOL
from conftest import FIG2, LOW, MU, ZERO
from scipy import integrate as spi

xs = st.floats(0.0, 10.0)


def _fd(f, r, h=1e-4):
    return (f(r + h) - f(r - h)) / (2 * h), (f(r + h) - 2 * f(r) + f(r - h)) / h**2


# -- H ------------------------------------------------------------------------------


def test_H_trivial_and_linear():
    assert value_H(LOW, 0.0, 0.7, 0.0) == 0.0
    for r in (0.0, 0.3, 2.0):
        assert value_H(LOW, MU, r, 2.0) - value_H(LOW, MU, r, 1.0) == pytest.approx(math.exp(-r), abs=1e-10)


def test_H_against_scipy_quadrature():
    ref = spi.quad(lambda s: float(laplace_M(LOW, 0.3, s)), 0, np.inf, epsrel=1e-12, limit=400)[0]
    assert value_H(LOW, MU, 0.3, 1.0) == pytest.approx(math.exp(-0.3) + MU * ref, rel=1e-10)


def test_H_refused_as_value_in_high_volatility():
    with pytest.raises(RegimeError):
        value_H(FIG2, MU, 0.3, 1.0)
    assert value_H(FIG2, MU, 0.3, 1.0, strict=False) > 0


def test_H_dominated_beyond_R(fig2_vf):
    r = FIG2.R + 0.5
    assert value_H(FIG2, MU, r, 1.0, strict=False) < fig2_vf.evaluate(r, 1.0)


# -- F and G ------------------------------------------------------------------------------


def test_F_at_barrier_is_tildeF(fig2_vf):
    assert fig2_vf.value_F(fig2_vf.rstar, 0.0) == pytest.approx(fig2_vf.tildeF, abs=1e-10)


@given(st.floats(0.0, 1.0), xs)
def test_F_linear(fig2_vf, frac, x):
    r = frac * fig2_vf.rstar
    assert fig2_vf.value_F(r, x) - fig2_vf.value_F(r, 0.0) == pytest.approx(x * math.exp(-r), rel=1e-12, abs=1e-12)


def test_generator_of_F(fig2_vf):
    p = FIG2
    for r in np.linspace(0.05, fig2_vf.rstar - 0.05, 5):
        for x in (0.0, 1.0, 5.0):
            vr, vrr = fig2_vf.r_derivatives(r, x)
            gen = MU * math.exp(-r) + (p.a * r + p.b) * vr + 0.5 * p.delta2 * r * vrr
            assert gen == pytest.approx(x * math.exp(-r) * (0.5 * p.delta2 * r - p.a * r - p.b), abs=1e-4)


@pytest.mark.parametrize("x", [0.0, 1.0, 5.0])
def test_G_meets_F(fig2_vf, x):
    rs = fig2_vf.rstar
    assert fig2_vf.value_G(rs, x) == pytest.approx(fig2_vf.value_F(rs, x), abs=1e-8)


def test_generator_of_G_vanishes(fig2_vf):
    for r in fig2_vf.rstar + np.array([0.05, 0.5, 2.0, 6.0]):
        for x in (0.0, 1.0, 5.0):
            assert abs(fig2_vf.generator(r, x)) < 1e-4


def test_G_slope_exceeds_spending_slope(fig2_vf):
    fn, rs = fig2_vf.functionals, fig2_vf.rstar
    for r in rs + np.array([1e-3, 0.3, 3.0]):
        slope = fig2_vf.slope_x(r)
        assert slope == pytest.approx(float(fn.phi1(r)) * math.exp(-rs), rel=1e-14)
        assert slope > math.exp(-r)


def test_piece_domains(fig2_vf):
    with pytest.raises(DomainError):
        fig2_vf.value_F(fig2_vf.rstar + 0.1, 1.0)
    with pytest.raises(DomainError):
        fig2_vf.value_G(fig2_vf.rstar - 0.1, 1.0)
    with pytest.raises(RegimeError):
        ValueFunction.build(LOW, MU).value_F(0.1, 1.0)


# -- evaluate ---------------------------------------------------------------------------------


@pytest.mark.parametrize("x", [0.0, 1.0, 5.0])
def test_continuity_and_first_order_fit(fig2_vf, x):
    rs = fig2_vf.rstar
    # V_r is about -160 here, so compare across the barrier after removing the linear trend
    h = 1e-6
    slope, _ = fig2_vf.r_derivatives(rs - 1e-3, x)
    jump = fig2_vf.evaluate(rs + h, x) - fig2_vf.evaluate(rs - h, x) - 2 * h * slope
    assert abs(jump) < 1e-5
    assert abs(fig2_vf.evaluate(rs - 1e-8, x) - fig2_vf.evaluate(rs + 1e-8, x)) < 1e-5
    dF, _ = _fd(lambda r: fig2_vf._F(r, x), rs)
    dG, _ = _fd(lambda r: fig2_vf._G(r, x), rs)
    assert abs(dF - dG) < 1e-5


def test_second_order_fit_only_at_zero_wealth(fig2_vf):
    rs = fig2_vf.rstar
    _, F0 = _fd(lambda r: fig2_vf._F(r, 0.0), rs)
    _, G0 = _fd(lambda r: fig2_vf._G(r, 0.0), rs)
    assert abs(F0 - G0) < 1e-5
    _, F1 = _fd(lambda r: fig2_vf._F(r, 1.0), rs)
    _, G1 = _fd(lambda r: fig2_vf._G(r, 1.0), rs)
    assert abs(F1 - G1) > 1e-3


@given(st.floats(0.0, 8.0), xs)
def test_linear_in_x_everywhere(fig2_vf, r, x):
    v0 = fig2_vf.evaluate(r, 0.0)
    assert fig2_vf.evaluate(r, x) == pytest.approx(v0 + x * fig2_vf.slope_x(r), rel=1e-11, abs=1e-11)


def test_decay_in_r(fig2_vf):
    rs = fig2_vf.rstar
    assert fig2_vf.evaluate(rs + 50, 1.0) < 1e-6 * fig2_vf.evaluate(rs, 1.0)
    assert fig2_vf.evaluate(rs + 150, 1.0) == 0.0 and fig2_vf.branch(rs + 150) == "cap"


def test_evaluate_array_matches_scalar(fig2_vf, low_vf):
    r = np.array([0.0, 0.2, fig2_vf.rstar, fig2_vf.rstar + 0.4, 30.0, 500.0])
    x = np.array([0.0, 1.0, 2.0, 3.0, 4.0, 5.0])
    for vf in (fig2_vf, low_vf):
        arr = vf.evaluate_array(r, x)
        assert arr == pytest.approx([vf.evaluate(a, b) for a, b in zip(r, x)], rel=1e-12, abs=1e-300)


def test_evaluate_domain(fig2_vf):
    with pytest.raises(DomainError):
        fig2_vf.evaluate(-0.1, 1.0)


# -- HJB ---------------------------------------------------------------------------------------


def test_hjb_spend_side(fig2_vf):
    rep = fig2_vf.hjb_check(fig2_vf.rstar / 2, 1.0)
    assert rep.active_branch == "spend" and rep.gradient_part == 0.0 and rep.ok()


def test_hjb_wait_side(fig2_vf):
    rep = fig2_vf.hjb_check(fig2_vf.rstar + 1, 1.0)
    assert rep.active_branch == "wait"
    assert abs(rep.generator_part) < HJB_TOL and rep.gradient_part < 0


def test_hjb_low_volatility(low_vf):
    p = LOW
    for r in (0.0, 0.3, 2.0, 10.0):
        for x in (0.0, 1.0, 5.0):
            rep = low_vf.hjb_check(r, x)
            assert rep.active_branch == "spend" and rep.gradient_part == 0.0
            expected = x * math.exp(-r) * (0.5 * p.delta2 * r - p.a * r - p.b)
            assert rep.generator_part == pytest.approx(expected, abs=1e-6)
            assert rep.generator_part <= 1e-7  # finite-difference noise at x = 0


def test_hjb_grid(fig2_vf):
    rs = fig2_vf.rstar
    for r in np.linspace(0, rs + 3, 30):
        for x in np.linspace(0, 5, 10):
            rep = fig2_vf.hjb_check(r, x)
            assert rep.ok(), rep
            assert rep.active_branch == ("spend" if r <= rs else "wait")


# -- zero barrier ------------------------------------------------------------------------------


def test_zero_barrier_value_at_zero():
    e = last_exit_expectation(ZERO)
    for x in (0.0, 1.0, 3.0):
        assert zero_barrier_value(ZERO, MU, 0.0, x) == pytest.approx(x + MU * e, rel=1e-14)


def test_zero_barrier_is_suboptimal(zero_vf):
    for r in (1e-3, 0.1, zero_vf.rstar, 1.0, 3.0):
        for x in (0.0, 1.0):
            assert zero_barrier_value(ZERO, MU, r, x) < zero_vf.evaluate(r, x)


def test_discount_beats_hitting_probability_near_zero():
    fn0 = Functionals(ZERO, 0.0)
    assert math.exp(-1e-4) - float(fn0.phi1(1e-4)) > 0


def test_zero_barrier_regime():
    with pytest.raises(RegimeError):
        zero_barrier_value(CirParams(0.001, 0.004, 0.07), MU, 0.1, 1.0)
    with pytest.raises(RegimeError):
        zero_barrier_value(CirParams(0.1, 0.001, 0.2), MU, 0.1, 1.0)
