import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ambistop.core import AmbiguityInterval, PayoffSpec, canonical_spec, llr, prob
from ambistop.dynamics import (expected_learning_time, knightian_learning_time, ks_distance, learning_time_residual,
                               naive_cdf, simulate, single_crossing_check, stopping_cdf)
from ambistop.equilibrium import knightian, solve
from ambistop.errors import DomainError, Unsupported

C0 = canonical_spec(0.1)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 3.0), st.floats(-1.5, 4.0), st.sampled_from(["L", "R", 0.3]))
def test_cdf_is_a_distribution(delta, z, cond):
    sol = solve(C0, delta)
    F = stopping_cdf(sol, float(prob(z)), cond)
    t = np.linspace(0, 12, 400)
    v = F.cdf(t)
    assert np.all(np.diff(v) >= -1e-12)
    assert v.min() >= -1e-12 and v.max() <= 1 + 1e-12


@pytest.mark.parametrize("delta", [0.0, 1.0, 2.0])
@pytest.mark.parametrize("theta", [0.2, 0.45, 0.6, 0.8])
def test_learning_time_two_routes(delta, theta):
    # recursion ODE vs the mean of the stopping-time law
    sol = solve(C0, delta)
    p_bar = float(prob(llr(theta) + delta / 2))
    assert expected_learning_time(C0, delta, theta) == pytest.approx(stopping_cdf(sol, p_bar, theta).mean(), abs=1e-7)


def test_knightian_learning_time_solves_recursion():
    th = np.linspace(0.05, 0.95, 19)
    nu = knightian(C0).nu
    T = knightian_learning_time(C0, th)
    dT = np.gradient(T, th)
    res = learning_time_residual(C0, th[2:-2], T[2:-2], dT[2:-2], nu)
    assert np.max(np.abs(res)) < 1e-9


def test_learning_time_scope():
    with pytest.raises(Unsupported):
        expected_learning_time(PayoffSpec(1, 0, 0.8, 1, 0.1), 1.0, 0.5)


@pytest.mark.parametrize("theta,cond", [(0.0, "L"), (1.0, "R")])
def test_simulation_matches_law(theta, cond):
    sol = solve(C0, 2.0)
    res = simulate(sol, theta, 20_000, 5, 0.7)
    assert ks_distance(res.stop_time, stopping_cdf(sol, 0.7, cond)) < 0.02


def test_simulation_case2_atom():
    sol = solve(PayoffSpec(1, 0, 0.8, 1, 0.1), 1.5)
    res = simulate(sol, 0.0, 20_000, 6, 0.5)
    assert ks_distance(res.stop_time, stopping_cdf(sol, 0.5, "L")) < 0.02


def test_simulation_reproducible_and_seed_sensitive():
    sol = solve(C0, 2.0)
    a = simulate(sol, 0.5, 500, 11, 0.7)
    b = simulate(sol, 0.5, 500, 11, 0.7)
    c = simulate(sol, 0.5, 500, 12, 0.7)
    assert np.array_equal(a.stop_time, b.stop_time)
    assert not np.array_equal(a.stop_time, c.stop_time)
    assert len(list(a.samples())) == 500


def test_breakthroughs_only_in_state_R():
    sol = solve(C0, 2.0)
    res = simulate(sol, 0.5, 5_000, 3, 0.7)
    assert not np.any(res.breakthrough & ~res.state_R)
    assert np.all(res.action[res.breakthrough] == 1)


def test_naive_stops_later_than_sophisticated():
    sol = solve(C0, 2.0)
    t = np.linspace(0, 6, 300)
    soph = stopping_cdf(sol, 0.8, "L").cdf(t)
    naive = naive_cdf(sol, 0.8, "L").cdf(t)
    assert np.all(naive <= soph + 1e-12)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 1.5), st.floats(0.2, 3.0), st.floats(0.05, 1.0), st.floats(0.05, 1.0))
def test_nested_sets_cross_at_most_once(d_p, off, grow_lo, grow_hi):
    z_hi = llr(0.1) + d_p + off
    P = AmbiguityInterval(float(prob(z_hi)), d_p)
    Q = AmbiguityInterval(float(prob(z_hi + grow_hi)), d_p + grow_lo + grow_hi)
    rep = single_crossing_check(C0, P, Q, n_grid=4000)
    assert rep.holds and rep.sign_changes <= 1


def test_crossing_needs_nesting():
    with pytest.raises(DomainError):
        single_crossing_check(C0, AmbiguityInterval(0.7, 1.0), AmbiguityInterval(0.6, 0.5))
