import numpy as np
import pytest
from hypothesis import example, given, settings, strategies as st

from ambistop.bayesian import benchmark
from ambistop.commitment import commitment_value
from ambistop.core import PayoffSpec, U_l, canonical_spec, llr, p_lower, prob
from ambistop.equilibrium import CostRegime, knightian, solve, stationary_identity
from ambistop.errors import DomainError
from ambistop.oracle import discrete_saddle_solve, hjb_residual, mixing_band, value_by_quadrature
from ambistop.verify import all_passed, poisson_suite

C0 = canonical_spec(0.1)


def test_c0_wide_boundaries():
    sol = solve(C0, 2.0)
    assert sol.p1 == pytest.approx(0.1)
    assert sol.p2 == pytest.approx(benchmark(C0).p_star)
    assert sol.p3 == pytest.approx(0.7177750479, abs=1e-9)
    assert sol.p4 == pytest.approx(0.9699118649, abs=1e-9)
    assert sol.region3_exists


def test_band_matches_discrete_game():
    sol = solve(C0, 2.0)
    res = discrete_saddle_solve(C0, 2.0, dt=1e-3)
    lo, hi = mixing_band(res)
    h = res.z[1] - res.z[0]
    assert abs(lo - llr(sol.p2)) <= 2 * h
    assert abs(hi - llr(sol.p3)) <= 2 * h


def test_band_absent_for_narrow_sets():
    for d in (0.5, 1.0):
        sol = solve(C0, d)
        assert not sol.region3_exists and sol.p3 == sol.p2


def test_boundaries_move_out_with_width():
    deltas = [0.0, 0.5, 1.0, 2.0, 4.0]
    p3 = [solve(C0, d).p3 for d in deltas]
    p4 = [solve(C0, d).p4 for d in deltas]
    assert all(np.diff(p3) >= -1e-15)
    assert all(np.diff(p4) > 0)


def test_knightian_limit():
    sol = solve(C0, 60.0)
    assert sol.knightian
    lhs, rhs = stationary_identity(C0)
    assert lhs == pytest.approx(rhs, abs=1e-12)
    assert lhs == pytest.approx(0.683772234, abs=1e-9)
    pt = knightian(C0)
    assert pt.nu > 0 and pt.m == 0


def test_high_cost_hedges_in_the_middle():
    s = canonical_spec(0.6)
    sol = solve(s, 1.0)
    assert sol.cost_regime is CostRegime.HIGH
    mid = sol.policy(0.6)
    assert mid.m == 1 and mid.rho == 0.5
    assert sol.policy(0.4).rho == 0.0
    assert sol.policy(0.9).rho == 1.0


def test_wide_intermediate_cost_hedged_band():
    sol = solve(canonical_spec(0.3), 3.0)
    assert sol.hedged_band and sol.delta_c < 3.0


@pytest.mark.parametrize("spec,delta", [
    (C0, 0.0), (C0, 2.0), (PayoffSpec(1, 0, 0.8, 1, 0.1), 1.5), (canonical_spec(0.3), 2.0),
    (PayoffSpec(2, 0, 0.5, 1, 0.05), 2.0),
])
def test_oracle_suite(spec, delta):
    checks = poisson_suite(spec, delta, n_states=120)
    assert all_passed(checks), [c for c in checks if not c.passed]


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 3.0), st.floats(-3.0, 4.0))
def test_policy_is_well_formed(delta, z):
    sol = solve(C0, delta)
    pt = sol.policy(float(prob(z)))
    assert 0 <= pt.m <= 1 and pt.nu >= 0
    assert pt.rho is None or 0 <= pt.rho <= 1
    lo = p_lower(prob(z), delta)
    assert lo - 1e-12 <= pt.pi <= prob(z) + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 3.0), st.floats(-2.0, 4.0))
def test_hjb_random_states(delta, z):
    sol = solve(C0, delta)
    assert hjb_residual(sol, float(prob(z)), n_controls=5, n_nature=41).ok(1e-6)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 3.0), st.floats(-2.0, 4.0))
@example(0.0, -1.0490443228457569)  # lower end rounded above the upper end
def test_commitment_weakly_beats_equilibrium(delta, z):
    pb = float(prob(z))
    sol = solve(C0, delta)
    assert commitment_value(p_lower(pb, delta), pb, C0) >= sol.worst_value(pb) - 1e-10


@settings(max_examples=20, deadline=None)
@given(st.floats(0.2, 2.5), st.floats(0.0, 1.0))
def test_segment_matches_quadrature(delta, u):
    sol = solve(C0, delta)
    pb = float(prob(llr(sol.p1) + 0.05 + u * (llr(sol.p4) - llr(sol.p1) + 0.5)))
    for p in (p_lower(pb, delta), pb):
        assert value_by_quadrature(sol, float(p), pb) == pytest.approx(sol.V(float(p), pb), abs=1e-8)


def test_band_indifference():
    sol = solve(C0, 2.0)
    for pb in np.linspace(sol.p2, sol.p3, 12)[1:-1]:
        v, _, pi = sol.region3_value(float(pb))
        assert U_l(pi, C0) == pytest.approx(v, abs=1e-12)


def test_negative_width_rejected():
    with pytest.raises(DomainError):
        solve(C0, -0.1)
