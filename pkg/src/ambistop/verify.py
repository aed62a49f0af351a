"""Oracle suite: each check compares a closed-form quantity with an
independent computation and reports the gap against a tolerance."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bayesian import Case, benchmark
from .core import PayoffSpec, U_l, U_r, llr, p_lower, prob
from .equilibrium import CostRegime, solve, stationary_identity
from .errors import Unsupported
from .oracle import discrete_saddle_solve, hjb_residual, saddle_gap, value_by_quadrature


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool


def _check(name, value, tol, passed=None) -> Check:
    value = float(value)
    return Check(name, value, tol, bool(value <= tol) if passed is None else bool(passed))


def _state_grid(sol, n: int):
    b = sol.bench
    lo = 0.5 * b.p_l_B if b.p_l_B else 0.01
    top = llr(sol.p4) + 1.0 if sol.p4 is not None else 3.0
    return prob(np.linspace(llr(lo), top, n))


def poisson_suite(spec: PayoffSpec, delta: float, n_states: int = 200, saddle_dt: float = 1e-3) -> list[Check]:
    sol = solve(spec, delta)
    if sol.cost_regime is CostRegime.HIGH:
        raise Unsupported("no experimentation at this cost; nothing to verify")
    checks = []
    states = _state_grid(sol, n_states)

    reports = [hjb_residual(sol, float(p)) for p in states]
    checks.append(_check("hjb_abs_G", max(abs(r.g_policy) for r in reports), 1e-6))
    checks.append(_check("hjb_saddle_failures", sum(not r.ok(1e-6) for r in reports), 0))

    res = discrete_saddle_solve(spec, delta, dt=saddle_dt)
    checks.append(_check("discrete_saddle_gap", saddle_gap(sol, res), 2e-2))

    gaps = []
    for pb in states[:: max(1, n_states // 20)]:
        lo = p_lower(pb, delta)
        for p in (lo, pb):
            gaps.append(abs(value_by_quadrature(sol, float(p), float(pb)) - sol.V(float(p), float(pb))))
    checks.append(_check("quadrature_vs_segment", max(gaps), 1e-8))

    if spec.c < spec.c_low:
        lhs, rhs = stationary_identity(spec)
        checks.append(_check("stationary_identity", abs(lhs - rhs), 1e-10))

    if sol.region3_exists:
        band = np.linspace(sol.p2, sol.p3, 52)[1:-1]
        r3 = []
        for pb in band:
            v, _, pi = sol.region3_value(float(pb))
            r3.append(abs(U_l(pi, spec) - v))
        checks.append(_check("region3_indifference", max(r3), 1e-10))

    if sol.case is Case.CASE2 and sol.m_atom_p2 is not None and 0 < sol.m_atom_p2 < 1:
        checks.append(_check("atom_segment_slope", abs(sol.value_segment(sol.p2).slope), 1e-10))

    sol0 = solve(spec, 0.0)
    b = benchmark(spec)
    grid = np.linspace(0.005, 0.995, 199)
    checks.append(_check("zero_width_vs_bayes",
                         max(abs(sol0.worst_value(float(p)) - b.Phi_star(float(p))) for p in grid), 1e-9))
    return checks


def all_passed(checks) -> bool:
    return all(c.passed for c in checks)
