import math

import numpy as np
import pytest
from hypothesis import assume, example, given, settings, strategies as st

from ambistop.bayesian import benchmark
from ambistop.core import llr, prob
from ambistop.errors import DomainError
from ambistop.twosource import (TwoSourceSpec, bayes_two_source, large_ambiguity, p_plus_minus,
                                simulate_two_source, single_source_value_at_half, two_source_dp,
                                two_source_equilibrium)


def test_thresholds():
    s = TwoSourceSpec(1.0, 0.1)
    assert s.c_low_star == pytest.approx(1.0 / (1.0 + math.e ** 2), abs=1e-15)
    assert s.c_low_star == pytest.approx(0.1192029220, abs=1e-10)
    assert s.u_split == pytest.approx(0.8)
    assert s.low_cost


@pytest.mark.parametrize("c,expected", [(0.1, 0.8), (0.05, 0.9)])
def test_dp_value_at_half_is_split_value(c, expected):
    dp = two_source_dp(TwoSourceSpec(1.0, c))
    assert float(dp.value_at(0.5)) == pytest.approx(expected, abs=1e-4)


@pytest.mark.parametrize("c", [0.05, 0.1, 0.2, 0.35])
def test_dp_dominates_single_source(c):
    s = TwoSourceSpec(1.0, c)
    dp = two_source_dp(s)
    b = benchmark(s.payoff_spec)
    phi = np.array([b.Phi_star(float(p)) for p in prob(dp.z)])
    assert np.all(dp.value >= phi - 1e-6)


def test_dp_is_symmetric():
    dp = two_source_dp(TwoSourceSpec(1.0, 0.1))
    assert np.allclose(dp.value, dp.value[::-1], atol=1e-10)


def test_band_edges_intermediate_cost():
    lo, hi = p_plus_minus(TwoSourceSpec(1.0, 0.2))
    assert lo + hi == pytest.approx(1.0, abs=1e-12)
    assert hi == pytest.approx(0.7340402598, abs=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.floats(-3.0, 3.0), st.floats(0.1, 3.0), st.sampled_from([0.05, 0.1, 0.2]))
@example(0.6, 1.0, 0.2)
@example(0.0, 1.0, 0.2)
def test_equilibrium_mirror_symmetry(z, delta, c):
    # a set centred on 1/2 is its own mirror and either side may act
    assume(abs(2 * z - delta) > 1e-9)
    s = TwoSourceSpec(1.0, c)
    # the mirror of state p_bar is the set whose upper end is 1 - p_low
    a = two_source_equilibrium(float(prob(z)), delta, s)
    b = two_source_equilibrium(float(prob(-z + delta)), delta, s)
    assert a.mirrored().alpha == b.alpha and a.m == b.m
    assert a.mirrored().pi == pytest.approx(b.pi, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.02, 0.98))
def test_bayes_attention_is_valid(p):
    pol = bayes_two_source(p, TwoSourceSpec(1.0, 0.1))
    assert pol.alpha is None or pol.alpha in (0.0, 0.5, 1.0)


def test_straddling_set_is_absorbing():
    s = TwoSourceSpec(1.0, 0.1)
    sim = simulate_two_source(0.8, 1.0, s, 200, seed=4, t_max=3.0)
    assert llr(sim.p_bar[-1]) == pytest.approx(1.0, abs=2e-3)
    assert two_source_equilibrium(float(prob(1.0)), 1.0, s).region == "split"


def test_simulation_reproducible():
    s = TwoSourceSpec(1.0, 0.1)
    a = simulate_two_source(0.6, 1.0, s, 500, seed=8, t_max=5.0)
    b = simulate_two_source(0.6, 1.0, s, 500, seed=8, t_max=5.0)
    assert np.array_equal(a.stop_time, b.stop_time) and np.array_equal(a.action, b.action)


def test_large_ambiguity_flag():
    s = TwoSourceSpec(1.0, 0.2)
    assert not large_ambiguity(s, 0.1)
    assert large_ambiguity(s, 1.0)
    assert single_source_value_at_half(s) > s.u_hat


def test_spec_validation():
    with pytest.raises(DomainError):
        TwoSourceSpec(1.0, 0.0)
    with pytest.raises(DomainError):
        TwoSourceSpec(math.nan, 0.1)
