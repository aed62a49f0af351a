import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ambistop.diffusion import (DiffusionSpec, bayes_boundaries_shooting, bayes_boundaries_z, bayes_value_z,
                                simulate_diffusion, small_delta_boundaries, solve_diffusion)
from ambistop.errors import ConvergenceError, DomainError, LargeDelta
from ambistop.oracle import diffusion_bayes_dp, diffusion_policy_value

UNIT = DiffusionSpec.from_psi(1.0, 1.0, 0.05)


def test_bayes_boundary_closed_form():
    z_l, z_r = bayes_boundaries_z(UNIT)
    assert z_r == -z_l
    # z + sinh z = delta psi^2 / (4c)
    assert z_r + math.sinh(z_r) == pytest.approx(5.0, abs=1e-12)
    assert z_r == pytest.approx(1.8613905149, abs=1e-9)


@pytest.mark.parametrize("psi,c", [(1.0, 0.05), (2.0, 0.1), (0.7, 0.02)])
def test_bayes_boundary_by_shooting(psi, c):
    s = DiffusionSpec.from_psi(psi, 1.0, c)
    assert bayes_boundaries_shooting(s)[1] == pytest.approx(bayes_boundaries_z(s)[1], abs=1e-8)


def test_bayes_value_by_binomial_tree():
    z, V, z_l, z_r = diffusion_bayes_dp(UNIT, dt=1e-4)
    h = z[1] - z[0]
    assert abs(z_r - bayes_boundaries_z(UNIT)[1]) <= 2 * h
    assert np.max(np.abs(V - bayes_value_z(UNIT, z))) < 1e-5


def test_only_the_ratio_matters():
    a = DiffusionSpec(0.3, -0.1, 0.4, 1.0, 0.05)
    assert bayes_boundaries_z(a) == pytest.approx(bayes_boundaries_z(UNIT), abs=1e-12)


def test_small_width_is_symmetric_and_outside_bayes():
    z_l, z_r = small_delta_boundaries(UNIT, 0.5)
    assert z_r == pytest.approx(-z_l, abs=1e-12)
    z_lB = bayes_boundaries_z(UNIT)[0]
    assert z_lB < z_l + 0.25 < 0


def test_zero_width_is_bayes():
    sol = solve_diffusion(UNIT, 0.0)
    assert sol.z_l == pytest.approx(sol.z_l_B, abs=1e-12)
    for z in np.linspace(-1.5, 1.5, 7):
        assert sol.worst_value(z) == pytest.approx(float(bayes_value_z(UNIT, z)), abs=1e-10)


def test_small_width_value_by_finite_differences():
    sol = solve_diffusion(UNIT, 0.5)
    z, VR, VL = diffusion_policy_value(sol)
    VR_c, VL_c = sol.conditional_values(z[1:-1])
    assert np.max(np.abs(VR_c - VR[1:-1])) < 1e-6
    assert np.max(np.abs(VL_c - VL[1:-1])) < 1e-6


def test_wide_band_residuals():
    sol = solve_diffusion(UNIT, 2.0)
    assert sol.mixed and sol.ordering_ok()
    assert sol.band_ode_residual() < 1e-7
    assert sol.indifference_residual() < 1e-7
    assert np.all(sol.band_nu >= 0)
    rate_l, act_l = sol.stopping_rate(-0.1)
    rate_r, act_r = sol.stopping_rate(0.1)
    assert act_l == "r" and act_r == "l" and rate_l == pytest.approx(rate_r)


def test_wide_band_value_gap_is_reported():
    # the band cannot join the outer region with matching slopes
    gR, gL = solve_diffusion(UNIT, 2.0).junction_slope_gap()
    assert max(abs(gR), abs(gL)) > 1e-3


def test_too_wide_has_no_band_solution():
    with pytest.raises(ConvergenceError):
        solve_diffusion(UNIT, 3.0)


def test_small_delta_solver_rejects_wide_sets():
    from ambistop.diffusion import small_delta_solution
    with pytest.raises(LargeDelta):
        small_delta_solution(UNIT, 2.0)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 1.0))
def test_boundaries_widen_with_ambiguity(d):
    sol = solve_diffusion(UNIT, d)
    assert sol.z_l <= sol.z_l_B + 1e-12
    assert sol.z_r == pytest.approx(-sol.z_l, abs=1e-9)


def test_monte_carlo_small_width():
    spec = DiffusionSpec.from_psi(6.0, 1.0, 1.8)
    sol = solve_diffusion(spec, 0.5)
    VR, _ = sol.conditional_values(0.0)
    mc = simulate_diffusion(sol, 0.0, "R", 20_000, seed=3)
    assert abs(mc.mean - VR) <= 3 * mc.se


def test_monte_carlo_is_reproducible():
    spec = DiffusionSpec.from_psi(6.0, 1.0, 1.8)
    sol = solve_diffusion(spec, 0.5)
    a = simulate_diffusion(sol, 0.0, "L", 2_000, seed=9)
    b = simulate_diffusion(sol, 0.0, "L", 2_000, seed=9)
    assert a.mean == b.mean and a.se == b.se


def test_bad_inputs():
    with pytest.raises(DomainError):
        DiffusionSpec(0.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        DiffusionSpec(1.0, 0.0, -1.0)
    sol = solve_diffusion(UNIT, 0.5)
    with pytest.raises(DomainError):
        simulate_diffusion(sol, 0.0, "X", 10, 0)
    with pytest.raises(DomainError):
        simulate_diffusion(sol, 5.0, "R", 10, 0)
