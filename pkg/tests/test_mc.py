import math

import numpy as np
import pytest
from scipy.special import digamma

from cirdiv import CirParams, DomainError, RegimeError, value_H, zero_barrier_value
from cirdiv.mc import (
    McConfig,
    Strategy,
    StrategyKind,
    default_eps_hit,
    difference_se,
    estimate_value,
    hitting_stats,
    last_exit_expectation,
    last_exit_extrapolated,
    last_exit_normalizer,
    simulate_last_exit,
    simulate_strategy_paths,
)
from conftest import FIG2, LOW, MU, ZERO


def cfg(**kw):
    base = dict(n_paths=2000, dt=1e-2, horizon=20_000.0, seed=1)
    base.update(kw)
    return McConfig(**base)


# -- configuration and strategies ------------------------------------------------------------


def test_strategy_parse_and_describe():
    assert Strategy.parse("max").kind is StrategyKind.MAX_SPEND
    s = Strategy.parse("barrier:0.25")
    assert s.kind is StrategyKind.BARRIER and s.level == 0.25
    assert Strategy.parse(s.describe()) == s
    assert Strategy.parse("zero").kind is StrategyKind.ZERO
    for bad in ("barrier:-1", "barrier:x", "min", "barrier"):
        with pytest.raises(DomainError):
            Strategy.parse(bad)


def test_zero_strategy_needs_attainable_zero():
    with pytest.raises(RegimeError):
        Strategy.zero().spend_level(CirParams(0.001, 0.004, 0.07))
    assert Strategy.zero().spend_level(ZERO) == pytest.approx(default_eps_hit(ZERO))
    assert Strategy.max_spend().spend_level(FIG2) == math.inf


@pytest.mark.parametrize(
    "kw", [dict(dt=1.0, horizon=1.0), dict(dt=0.3, horizon=1.0), dict(n_paths=1), dict(antithetic=True, n_paths=5)]
)
def test_config_errors(kw):
    with pytest.raises(DomainError):
        cfg(**kw).validate()


def test_domain_errors():
    with pytest.raises(DomainError):
        estimate_value(FIG2, MU, Strategy.max_spend(), -0.1, 1.0, cfg(n_paths=10, horizon=1.0))
    with pytest.raises(DomainError):
        estimate_value(FIG2, -1.0, Strategy.max_spend(), 0.1, 1.0, cfg(n_paths=10, horizon=1.0))


# -- reproducibility and error scaling ---------------------------------------------------------------


def test_bit_identical_reproduction():
    c = cfg(n_paths=500, horizon=500.0, seed=99)
    e1 = estimate_value(FIG2, MU, Strategy.barrier(0.5), 0.8, 1.0, c)
    e2 = estimate_value(FIG2, MU, Strategy.barrier(0.5), 0.8, 1.0, c)
    assert e1 == e2 and np.array_equal(e1.samples, e2.samples)
    e3 = estimate_value(FIG2, MU, Strategy.barrier(0.5), 0.8, 1.0, cfg(n_paths=500, horizon=500.0, seed=100))
    assert e3.mean != e1.mean


def test_paths_do_not_depend_on_path_count():
    small = estimate_value(LOW, MU, Strategy.max_spend(), 0.3, 1.0, cfg(n_paths=300, horizon=300.0))
    large = estimate_value(LOW, MU, Strategy.max_spend(), 0.3, 1.0, cfg(n_paths=1000, horizon=300.0))
    assert np.array_equal(small.samples, large.samples[:300])


def test_standard_error_scaling():
    e1 = estimate_value(LOW, MU, Strategy.max_spend(), 0.3, 1.0, cfg(n_paths=4000, horizon=300.0, seed=3))
    e4 = estimate_value(LOW, MU, Strategy.max_spend(), 0.3, 1.0, cfg(n_paths=16000, horizon=300.0, seed=4))
    assert e4.std_error == pytest.approx(e1.std_error / 2, rel=0.2)


def test_antithetic_pairs():
    c = cfg(n_paths=4000, horizon=300.0, antithetic=True)
    e = estimate_value(LOW, MU, Strategy.max_spend(), 0.3, 1.0, c)
    assert e.antithetic and e.samples.size == 4000
    assert e.within(value_H(LOW, MU, 0.3, 1.0), allowance=0.02)


def test_difference_se_paired_and_independent():
    c = cfg(n_paths=1000, horizon=300.0)
    a = estimate_value(LOW, MU, Strategy.max_spend(), 0.3, 1.0, c)
    b = estimate_value(LOW, MU, Strategy.barrier(0.5), 0.3, 1.0, c)
    d = a.samples - b.samples
    assert difference_se(a, b) == pytest.approx(np.std(d, ddof=1) / math.sqrt(d.size))
    b2 = estimate_value(LOW, MU, Strategy.barrier(0.5), 0.3, 1.0, cfg(n_paths=1000, horizon=300.0, seed=2))
    assert difference_se(a, b2) == pytest.approx(math.hypot(a.std_error, b2.std_error))


def test_json_dict_drops_samples():
    e = estimate_value(LOW, MU, Strategy.max_spend(), 0.3, 1.0, cfg(n_paths=10, horizon=10.0))
    d = e.as_dict()
    assert "samples" not in d and d["n_paths"] == 10


# -- strategy values against the analytic side ---------------------------------------------------------


def test_max_spend_matches_H():
    e = estimate_value(LOW, MU, Strategy.max_spend(), 0.3, 1.0, cfg(n_paths=10_000, horizon=400.0))
    assert e.tail_ok and e.within(value_H(LOW, MU, 0.3, 1.0))


def test_max_spend_pays_initial_wealth_at_once():
    e = estimate_value(LOW, 0.0, Strategy.max_spend(), 0.3, 2.0, cfg(n_paths=10, horizon=10.0))
    assert e.mean == pytest.approx(2 * math.exp(-0.3), rel=1e-15) and e.std_error < 1e-15


@pytest.mark.parametrize("where", ["F", "G"])
def test_barrier_strategy_matches_value(fig2_vf, where):
    rs = fig2_vf.rstar
    r0 = rs / 2 if where == "F" else rs + 0.3
    e = estimate_value(FIG2, MU, Strategy.barrier(rs), r0, 1.0, cfg(n_paths=4000, seed=11))
    # the payoff is strongly right-skewed (a long wait above r* builds a large pot), so the
    # sample mean of 4000 paths has a heavier upper tail than the normal approximation
    assert e.tail_ok and e.within(fig2_vf.evaluate(r0, 1.0), n_se=4.0)


def test_barrier_dominates(fig2_vf):
    rs = fig2_vf.rstar
    r0, x0 = rs + 0.3, 1.0
    c = cfg(n_paths=3000, seed=5)
    best = estimate_value(FIG2, MU, Strategy.barrier(rs), r0, x0, c)
    for s in (Strategy.max_spend(), Strategy.zero(), Strategy.barrier(rs - 0.2), Strategy.barrier(rs + 0.2)):
        other = estimate_value(FIG2, MU, s, r0, x0, c)
        assert best.mean >= other.mean - 3 * difference_se(best, other), s
        assert other.mean <= fig2_vf.evaluate(r0, x0) + 3 * other.std_error, s


def test_zero_barrier_matches_its_value():
    r0, x0 = 0.3, 1.0
    target = zero_barrier_value(ZERO, MU, r0, x0)
    e = estimate_value(ZERO, MU, Strategy.zero(), r0, x0, cfg(n_paths=4000, seed=8))
    coarse_eps = estimate_value(ZERO, MU, Strategy.zero(10 * default_eps_hit(ZERO)), r0, x0, cfg(n_paths=4000, seed=8))
    allowance = abs(e.mean - coarse_eps.mean)  # sensitivity to the hit level
    assert e.within(target, allowance=allowance)


# -- hitting statistics -----------------------------------------------------------------------------------


def test_hitting_immediately():
    hit, t = hitting_stats(FIG2, 0.4, 0.4, cfg(n_paths=50, horizon=1.0))
    assert hit.mean == 1.0 and t.mean == 0.0


def test_hitting_domain():
    with pytest.raises(DomainError):
        hitting_stats(FIG2, 0.1, 0.4, cfg(n_paths=50, horizon=1.0))


# -- last exit ------------------------------------------------------------------------------------------


def test_last_exit_closed_form():
    # with u = e^(-a t) both integrals are Beta integrals: E = (digamma(1) - digamma(k)) / a
    for p in (ZERO, CirParams(0.01, 0.001, 0.2), CirParams(0.5, 0.2, 1.2)):
        ref = (digamma(1.0) - digamma(p.k)) / p.a
        assert last_exit_expectation(p) == pytest.approx(ref, rel=1e-10)


def test_last_exit_normalizer_closed_form():
    from scipy.special import beta

    assert last_exit_normalizer(ZERO) == pytest.approx(beta(ZERO.k, 1 - ZERO.k) / ZERO.a, rel=1e-12)


def test_last_exit_refinements_agree():
    from cirdiv.mc import _exit_level

    lv = _exit_level(ZERO)
    e1, e2 = last_exit_expectation(ZERO, lv), last_exit_expectation(ZERO, lv + 1)
    assert math.isfinite(e1) and e1 > 0
    assert e1 == pytest.approx(e2, rel=1e-8)


def test_last_exit_regime():
    with pytest.raises(RegimeError):
        last_exit_expectation(CirParams(0.001, 0.004, 0.07))


def test_last_exit_monte_carlo():
    c = cfg(n_paths=4000, horizon=20_000.0, seed=4)
    e = last_exit_extrapolated(ZERO, c)
    assert e.tail_bound < 1e-3
    assert e.within(last_exit_expectation(ZERO))
    raw = simulate_last_exit(ZERO, 1e-3, c)
    assert raw.mean > 0 and raw.std_error > 0


# -- inspection paths ---------------------------------------------------------------------------------------


def test_strategy_paths_are_admissible():
    rows = simulate_strategy_paths(FIG2, MU, Strategy.barrier(0.6), 0.3, 1.0, 0.1, 50.0, seed=2, n_paths=3)
    arr = np.array(rows)
    assert arr.shape == (3 * 501, 5)
    for p in range(3):
        sub = arr[arr[:, 0] == p]
        assert np.all(sub[:, 3] >= 0) and np.all(np.diff(sub[:, 4]) >= 0) and np.all(sub[:, 2] >= 0)
        # wealth is either spent or carried: X + C grows by mu dt per step
        assert np.allclose(np.diff(sub[:, 3] + sub[:, 4]), MU * 0.1)
