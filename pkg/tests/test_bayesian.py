import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ambistop.bayesian import Case, benchmark, ode_residual
from ambistop.core import PayoffSpec, U_l, U_r, canonical_spec, dU_l
from ambistop.oracle import bayes_value_iteration

C0 = canonical_spec(0.1)
CASE2 = PayoffSpec(1.0, 0.0, 0.8, 1.0, 0.1)


def test_c0_thresholds():
    b = benchmark(C0)
    assert b.case is Case.CASE1
    assert b.p_l_B == pytest.approx(0.1, abs=1e-15)
    # frozen from an independent root solve; value iteration below brackets them
    assert b.p_r_B == pytest.approx(0.8377029216, abs=1e-9)
    assert b.p_star == pytest.approx(0.4759631477, abs=1e-9)


def test_c0_matching_conditions():
    b = benchmark(C0)
    # beliefs drift down, so the value pastes smoothly only at the left edge
    assert b.Phi(b.p_l_B) == pytest.approx(U_l(b.p_l_B, C0), abs=1e-12)
    assert b.dPhi(b.p_l_B + 1e-9) == pytest.approx(dU_l(C0), abs=1e-6)
    assert b.Phi(b.p_r_B) == pytest.approx(U_r(b.p_r_B, C0), abs=1e-12)
    assert b.dPhi(b.p_star) == pytest.approx(0.0, abs=1e-9)


def test_case2_right_boundary_is_minimiser():
    b = benchmark(CASE2)
    assert b.case is Case.CASE2
    assert b.p_star == b.p_r_B == pytest.approx(0.192278175, abs=1e-8)
    assert b.dPhi(b.p_r_B) == pytest.approx(-0.443884826, abs=1e-8)


@pytest.mark.parametrize("spec", [C0, CASE2, canonical_spec(0.3), PayoffSpec(2, 0, 0.5, 1, 0.05)])
def test_value_iteration_oracle(spec):
    b = benchmark(spec)
    p, V = bayes_value_iteration(spec, n=2000, dt=1e-3)
    closed = np.array([b.Phi_star(float(x)) for x in p])
    assert np.max(np.abs(closed - V)) < 5e-4


def test_value_iteration_stopping_edge():
    b = benchmark(C0)
    p, V = bayes_value_iteration(C0, n=4001, dt=2.5e-4)
    stop = np.maximum(U_l(p, C0), U_r(p, C0))
    cont = p[V > stop + 1e-9]
    assert abs(cont.max() - b.p_r_B) < 5e-3
    assert abs(cont.min() - b.p_l_B) < 5e-3


@settings(max_examples=60)
@given(st.floats(0.11, 0.83))
def test_ode_holds_inside_continuation(p):
    b = benchmark(C0)
    assert abs(ode_residual(p, b.Phi(p), b.dPhi(p), C0)) < 1e-10


@settings(max_examples=60)
@given(st.floats(0.001, 0.999), st.floats(0.01, 0.49))
def test_value_dominates_stopping(p, c):
    s = canonical_spec(c)
    v = benchmark(s).Phi_star(p)
    assert v >= max(U_l(p, s), U_r(p, s)) - 1e-12


def test_high_cost_never_experiments():
    b = benchmark(canonical_spec(0.6))
    assert not b.experiments
    assert b.Phi_star(0.3) == pytest.approx(0.7)
