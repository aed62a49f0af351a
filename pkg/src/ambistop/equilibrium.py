"""Intrapersonal equilibrium with randomized stopping over a prior interval.

The state is the upper belief p_bar; the prior set is every belief whose
log-odds lie within `delta` below it.  Regions, from low to high state:

1. stop with l
2. experiment (nature picks the upper belief)
3. experiment and stop for l at a Poisson rate; the value segment is flat
4. experiment (nature picks the lower belief), or, for intermediate cost
   and wide sets, hedge between the two actions
5. stop with r
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .bayesian import BayesBenchmark, Case, benchmark, phi, phi_prime
from .core import (EPS_B, ROOT_XTOL, PayoffSpec, U_l, U_mix, U_r, dU_l, dU_r, llr,
                   p_lower, prob, stopping_payoffs)
from .errors import DomainError, NoPreemptiveStop, RegionError

KNIGHTIAN_CAP = 50.0
_Z_TOP = 40.0  # log-odds beyond which a belief is treated as certain
_RTOL = 4 * np.finfo(float).eps


class CostRegime(str, enum.Enum):
    LOW = "Low"
    INTERMEDIATE = "Intermediate"
    HIGH = "High"


@dataclass(frozen=True)
class PolicyPoint:
    m: float
    nu: float
    rho: float | None  # None when the DM neither stops nor has a stopping rate
    pi: float
    region: int

    def as_dict(self) -> dict:
        return {"m": self.m, "nu": self.nu, "rho": self.rho, "pi": self.pi, "region": self.region}


@dataclass(frozen=True)
class ValueSegment:
    v_at_lower: float
    v_at_upper: float
    p_lo: float
    p_hi: float
    dv: float | None = None  # exact slope when known; differencing fails on narrow sets

    def __call__(self, p):
        if self.p_hi == self.p_lo:
            return np.full(np.shape(p), self.v_at_upper) if np.ndim(p) else self.v_at_upper
        w = (np.asarray(p, dtype=float) - self.p_lo) / (self.p_hi - self.p_lo)
        out = self.v_at_lower + w * (self.v_at_upper - self.v_at_lower)
        return float(out) if np.ndim(p) == 0 else out

    @property
    def slope(self) -> float:
        if self.dv is not None:
            return self.dv
        if self.p_hi == self.p_lo:
            return 0.0
        return (self.v_at_upper - self.v_at_lower) / (self.p_hi - self.p_lo)


def u_roots(spec: PayoffSpec):
    """Roots of the stationary quadratic of the randomized-stopping value."""
    mid = 0.5 * (spec.u_r_R + spec.u_l_L)
    rad = math.sqrt((0.5 * (spec.u_r_R - spec.u_l_L)) ** 2 + spec.k * spec.d_l)
    return mid - rad, mid + rad


def cost_regime(spec: PayoffSpec) -> CostRegime:
    if spec.c >= spec.c_bar:
        return CostRegime.HIGH
    if spec.c <= spec.c_low:
        return CostRegime.LOW
    return CostRegime.INTERMEDIATE


@dataclass(frozen=True)
class EquilibriumSolution:
    spec: PayoffSpec
    delta: float
    case: Case
    cost_regime: CostRegime
    p1: float | None = None
    p2: float | None = None
    p3: float | None = None
    p4: float | None = None
    u1: float | None = None
    u2: float | None = None
    C_coef: float | None = None
    v_dstar: float | None = None
    p_dstar: float | None = None
    m_atom_p2: float | None = None
    delta_c: float = math.inf
    region3_exists: bool = False
    hedged_band: bool = False  # region 4 mixes actions (wide sets, intermediate cost)
    knightian: bool = False
    _bench: BayesBenchmark | None = field(default=None, repr=False, compare=False)

    # ------------------------------------------------------------------
    @property
    def bench(self) -> BayesBenchmark:
        return self._bench if self._bench is not None else benchmark(self.spec)

    @property
    def experiments(self) -> bool:
        return self.cost_regime is not CostRegime.HIGH

    def p_low(self, p_bar):
        return p_lower(p_bar, self.delta)

    # randomized-stopping value ------------------------------------------
    def _exponent(self) -> float:
        return (self.u2 - self.u1) / self.spec.d_l

    def vhat_z(self, z):
        """Flat value of region 3 as a function of the state's log-odds."""
        x = np.exp(-self._exponent() * np.asarray(z, dtype=float))
        out = (self.C_coef * self.u1 + x * self.u2) / (x + self.C_coef)
        return float(out) if np.ndim(z) == 0 else out

    def vhat(self, p_bar):
        if np.ndim(p_bar) == 0 and float(p_bar) >= 1.0:
            return self.u1
        return self.vhat_z(llr(p_bar))

    def dvhat(self, p_bar):
        """Derivative of the flat value from its defining ODE."""
        v = self.vhat(p_bar)
        s = self.spec
        rhs = (s.u_r_R - v) * (s.u_l_L - v) / s.d_l - s.k
        return rhs / (np.asarray(p_bar) * (1 - np.asarray(p_bar)))

    # region classification ----------------------------------------------
    def region(self, p_bar: float) -> int:
        if self.knightian:
            return 3 if self.spec.c < self.spec.c_low else 4
        if not self.experiments:
            sp = stopping_payoffs(self.spec)
            if p_bar <= sp.p_hat:
                return 1
            if self.p_low(p_bar) >= sp.p_hat:
                return 5
            return 4
        z = llr(p_bar)
        if z <= llr(self.p1) + EPS_B:
            return 1
        if p_bar >= self.p4 or z >= llr(self.p4) - EPS_B:
            return 5
        z2 = llr(self.p2)
        if self.case is Case.CASE2 and abs(z - z2) <= EPS_B:
            return 0  # the atom state
        if z <= z2 + (EPS_B if self.case is Case.CASE1 else -EPS_B):
            return 2
        if self.region3_exists and p_bar < self.p3:
            return 3
        return 4

    def _left_region(self, p_bar: float) -> int:
        """Region occupied by states just below p_bar (left limits)."""
        r = self.region(p_bar)
        if not self.experiments or self.knightian:
            return r
        z = llr(p_bar)
        near = lambda b: b is not None and abs(z - llr(b)) <= EPS_B
        if r == 5 and near(self.p4):
            return 4 if self.p4 > self.p3 else (3 if self.region3_exists and self.p3 > self.p2 else 2)
        if r == 4 and near(self.p3) and self.region3_exists:
            return 3
        if r == 0:
            return 2
        if r == 3 and near(self.p2):
            return 2
        if r == 2 and near(self.p1):
            return 1
        return r

    # policy ---------------------------------------------------------------
    def policy(self, p_bar: float) -> PolicyPoint:
        if not 0.0 <= p_bar <= 1.0:
            raise DomainError("state outside [0,1]")
        s = self.spec
        sp = stopping_payoffs(s)
        if self.knightian:
            return knightian(s)
        r = self.region(p_bar)
        lo = self.p_low(p_bar)
        if not self.experiments:
            if r == 1:
                return PolicyPoint(1.0, 0.0, 0.0, p_bar, 1)
            if r == 5:
                return PolicyPoint(1.0, 0.0, 1.0, lo, 5)
            return PolicyPoint(1.0, 0.0, sp.rho_hat, sp.p_hat, 4)
        if r == 1:
            return PolicyPoint(1.0, 0.0, 0.0, p_bar, 1)
        if r == 2:
            return PolicyPoint(0.0, 0.0, None, p_bar, 2)
        if r == 0:
            return PolicyPoint(self.m_atom_p2, 0.0, 1.0, p_bar, 2)
        if r == 3:
            v = self.vhat(p_bar)
            return PolicyPoint(0.0, s.lam * (s.u_r_R - v) / s.d_l, 0.0, (s.u_l_L - v) / s.d_l, 3)
        if r == 4:
            if self.hedged_band:
                return PolicyPoint(1.0, 0.0, sp.rho_hat, sp.p_hat, 4)
            return PolicyPoint(0.0, 0.0, None, lo, 4)
        return PolicyPoint(1.0, 0.0, 1.0, lo, 5)

    def region3_value(self, p_bar: float):
        """(Vhat, stopping rate, nature's belief) inside the randomized band."""
        if not (self.region3_exists and self.p2 < p_bar <= self.p3):
            raise RegionError("state outside the randomized-stopping band")
        s = self.spec
        v = self.vhat(p_bar)
        return v, s.lam * (s.u_r_R - v) / s.d_l, (s.u_l_L - v) / s.d_l

    # values ---------------------------------------------------------------
    def _r4_coeffs(self, p_bar, z=None):
        """State-conditional values (in R, in L) of experimenting until p3."""
        s = self.spec
        z = llr(p_bar) if z is None else z
        tau = (z - llr(self.p3)) / s.lam
        e = math.exp(-s.lam * tau)
        a_R = (1 - e) * s.u_r_R + e * self.v_dstar - s.c * (1 - e) / s.lam
        a_L = self.v_dstar - s.c * tau
        return a_R, a_L, tau

    def region4_value(self, p_bar: float) -> ValueSegment:
        if self.hedged_band or not self.p3 <= p_bar <= self.p4:
            raise RegionError("state outside the experimentation band above p3")
        a_R, a_L, _ = self._r4_coeffs(p_bar)
        lo = self.p_low(p_bar)
        return ValueSegment(lo * a_R + (1 - lo) * a_L, p_bar * a_R + (1 - p_bar) * a_L, lo, p_bar, a_R - a_L)

    def q_map(self, p_bar: float) -> float:
        """Belief that drifts to p** in the time the state needs to reach p3."""
        return prob(llr(p_bar) - llr(self.p3) + llr(self.p_dstar))

    def region4_auxiliary_segment(self, p_bar: float) -> ValueSegment:
        """Value segment built from the auxiliary stopping problem (tangent to
        its value at q(p_bar)); equals region4_value when p** is interior."""
        q = self.q_map(p_bar)
        s = self.spec
        psi = phi(q, self.p_dstar, self.v_dstar, s)
        dpsi = phi_prime(q, self.p_dstar, self.v_dstar, s)
        lo = self.p_low(p_bar)
        return ValueSegment(psi + (lo - q) * dpsi, psi + (p_bar - q) * dpsi, lo, p_bar, float(dpsi))

    def value_segment(self, p_bar: float, left: bool = False) -> ValueSegment:
        s = self.spec
        sp = stopping_payoffs(s)
        lo = self.p_low(p_bar)
        seg = lambda f, d: ValueSegment(float(f(lo)), float(f(p_bar)), lo, p_bar, float(d))
        if self.knightian:
            pt = knightian(s)
            v = u_roots(s)[0] if pt.region == 3 else sp.u_hat
            return ValueSegment(v, v, 0.0, 1.0)
        r = self._left_region(p_bar) if left else self.region(p_bar)
        if not self.experiments:
            if r == 1:
                return seg(lambda p: U_l(p, s), dU_l(s))
            if r == 5:
                return seg(lambda p: U_r(p, s), dU_r(s))
            return seg(lambda p: U_mix(p, sp.rho_hat, s), sp.rho_hat * dU_r(s) + (1 - sp.rho_hat) * dU_l(s))
        b = self.bench
        if r == 1:
            return seg(lambda p: U_l(p, s), dU_l(s))
        if r == 2:
            f0, f1 = b.Phi(p_bar), b.dPhi(p_bar)
            return seg(lambda p: f0 + (p - p_bar) * f1, f1)
        if r == 0:
            m = self.m_atom_p2
            f0, f1 = b.Phi(p_bar), b.dPhi(p_bar)
            return seg(lambda p: m * U_r(p, s) + (1 - m) * (f0 + (p - p_bar) * f1), m * dU_r(s) + (1 - m) * f1)
        if r == 3:
            v = self.vhat(p_bar)
            return ValueSegment(v, v, lo, p_bar)
        if r == 4:
            if self.hedged_band:
                return ValueSegment(sp.u_hat, sp.u_hat, lo, p_bar)
            if p_bar <= self.p3:
                return ValueSegment(self.v_dstar, self.v_dstar, lo, p_bar)
            return self.region4_value(p_bar)
        return seg(lambda p: U_r(p, s), dU_r(s))

    def V(self, p, p_bar: float, left: bool = False):
        return self.value_segment(p_bar, left=left)(p)

    def worst_value(self, p_bar: float) -> float:
        """Value at nature's choice, min over the prior set of the segment."""
        seg = self.value_segment(p_bar)
        return min(seg.v_at_lower, seg.v_at_upper)

    def derivatives(self, p, p_bar: float):
        """(V, V_p, V_pbar) at (p, p_bar-) from the closed-form segments."""
        s = self.spec
        seg = self.value_segment(p_bar, left=True)
        r = self._left_region(p_bar)
        v = seg(p)
        if self.delta == 0 and not self.knightian:
            # zero width: only the derivative along p = p_bar is defined
            if r == 1 or (not self.experiments and p_bar <= stopping_payoffs(s).p_hat):
                return v, 0.0, -s.d_l
            if r == 5 or not self.experiments:
                return v, 0.0, s.d_r
            return v, 0.0, float(self.bench.dPhi(p_bar))
        if self.knightian or not self.experiments or r in (1, 5):
            return v, seg.slope, 0.0
        if r == 2:
            return v, seg.slope, (p - p_bar) * self.bench.d2Phi(p_bar)
        if r == 3:
            return v, 0.0, float(self.dvhat(p_bar))
        if r == 4:
            if self.hedged_band or p_bar <= self.p3:
                return v, 0.0, 0.0
            _, _, tau = self._r4_coeffs(p_bar)
            e = math.exp(-s.lam * tau)
            dR = e * (s.lam * (s.u_r_R - self.v_dstar) - s.c)
            dL = -s.c
            dtau = 1.0 / (s.lam * p_bar * (1 - p_bar))
            return v, seg.slope, (p * dR + (1 - p) * dL) * dtau
        return v, seg.slope, 0.0


def knightian(spec: PayoffSpec) -> PolicyPoint:
    """Stationary behaviour when the prior set is all of [0,1]."""
    sp = stopping_payoffs(spec)
    if spec.c >= spec.c_low:
        return PolicyPoint(1.0, 0.0, sp.rho_hat, sp.p_hat, 4)
    u_t = u_roots(spec)[0]
    nu_t = spec.lam / spec.d_l * (spec.u_r_R - u_t)
    return PolicyPoint(0.0, nu_t, 0.0, (spec.u_l_L - u_t) / spec.d_l, 3)


def stationary_identity(spec: PayoffSpec):
    """Both sides of the stationary-rate identity at the Knightian rate."""
    u_t = u_roots(spec)[0]
    nu = spec.lam / spec.d_l * (spec.u_r_R - u_t)
    lam, c = spec.lam, spec.c
    lhs = spec.u_l_L - c / nu
    rhs = lam / (nu + lam) * spec.u_r_R + nu / (nu + lam) * spec.u_l_R - c / (nu + lam)
    return lhs, rhs


def _integration_constant(u1, u2, p2, v2, d_l):
    a = (u2 - u1) / d_l
    return (u2 - v2) / (v2 - u1) * math.exp(-a * llr(p2))


def _first_root_z(f, z_lo, z_hi):
    return brentq(f, z_lo, z_hi, xtol=ROOT_XTOL, rtol=_RTOL, maxiter=500)


def solve(spec: PayoffSpec, delta: float, knightian_cap: float = KNIGHTIAN_CAP) -> EquilibriumSolution:
    if delta < 0 or math.isnan(delta):
        raise DomainError("width must be non-negative")
    b = benchmark(spec)
    regime = cost_regime(spec)
    u1, u2 = u_roots(spec)
    if regime is CostRegime.HIGH:
        return EquilibriumSolution(spec, delta, b.case, regime, u1=u1, u2=u2, _bench=b)
    if math.isinf(delta) or delta > knightian_cap:
        return EquilibriumSolution(spec, delta, b.case, regime, u1=u1, u2=u2,
                                   knightian=True, _bench=b)
    sp = stopping_payoffs(spec)
    p1, p2 = b.p_l_B, b.p_star
    v2 = float(b.Phi(p2))
    C = _integration_constant(u1, u2, p2, v2, spec.d_l)
    m_atom = None
    if b.case is Case.CASE2:
        slope = b.dPhi(p2)
        m_atom = -slope / (dU_r(spec) - slope)
    base = EquilibriumSolution(spec, delta, b.case, regime, p1=p1, p2=p2, u1=u1, u2=u2,
                               C_coef=C, m_atom_p2=m_atom, _bench=b)
    z2 = llr(p2)

    # width above which region 4 hedges between the actions
    delta_c = math.inf
    p3_hedge = None
    if regime is CostRegime.INTERMEDIATE:
        z3h = _first_root_z(lambda z: base.vhat_z(z) - sp.u_hat, z2, _Z_TOP)
        p3_hedge = prob(z3h)
        delta_c = z3h - llr(sp.p_hat)

    region3 = v2 < U_l(p_lower(p2, delta), spec)
    hedged = delta > delta_c
    if hedged:
        p3 = p3_hedge
        p4 = prob(llr(sp.p_hat) + delta)
        return _replace(base, p3=p3, p4=p4, delta_c=delta_c, region3_exists=True,
                        hedged_band=True, v_dstar=sp.u_hat)

    if region3:
        gap = lambda z: base.vhat_z(z) - U_l(prob(z - delta), spec)
        z_hi = z2 + delta + _Z_TOP
        if gap(z_hi) < 0:
            raise RegionError("randomized band does not close below certainty")
        p3 = prob(_first_root_z(gap, z2, z_hi))
    else:
        p3 = p2
    v_dstar = float(base.vhat(p3)) if region3 else v2
    p3_low = p_lower(p3, delta)
    p_dstar = max(spec.k / (spec.u_r_R - v_dstar), p3_low)
    sol = _replace(base, p3=p3, v_dstar=v_dstar, p_dstar=p_dstar, delta_c=delta_c,
                   region3_exists=region3 and p3 > p2, p4=1.0)

    def g(z):
        lo = prob(z - delta)
        a_R, a_L, _ = sol._r4_coeffs(None, z)
        return lo * a_R + (1 - lo) * a_L - U_r(lo, spec)

    z3 = llr(p3)
    if g(z3) <= 0:
        p4 = p3
    else:
        p4 = prob(_first_root_z(g, z3, z3 + delta + _Z_TOP))
    return _replace(sol, p4=p4)


def _replace(sol: EquilibriumSolution, **kw) -> EquilibriumSolution:
    from dataclasses import replace
    return replace(sol, **kw)


def pure_strategy_stop_state(spec: PayoffSpec, delta: float, grid: int = 4000) -> float:
    """Smallest state above p* where the tangent value at the lower belief
    drops to the l-payoff at the upper belief (pure strategies only)."""
    b = benchmark(spec)
    if not spec.is_symmetric or not b.experiments or b.case is not Case.CASE1:
        raise DomainError("needs symmetric payoffs, c < c_bar and an interior minimiser")

    def h(z):
        pb = prob(z)
        return b.Phi(pb) + b.dPhi(pb) * (p_lower(pb, delta) - pb) - U_l(pb, spec)

    z0 = llr(b.p_star)
    zs = z0 + np.linspace(0.0, 30.0, grid + 1)[1:]
    vals = np.array([h(z) for z in zs])
    neg = np.nonzero(vals <= 0)[0]
    if h(z0) <= 0 or neg.size == 0:
        raise NoPreemptiveStop("no preemptive stop state for this width")
    j = neg[0]
    lo = z0 if j == 0 else zs[j - 1]
    return prob(_first_root_z(h, lo, zs[j]))


def experimentation_margin(p_bar: float, p_stop: float, spec: PayoffSpec) -> float:
    """Gain at belief p_bar from experimenting down to p_stop and then taking l,
    relative to taking l now (symmetric payoffs)."""
    tau = (llr(p_bar) - llr(p_stop)) / spec.lam
    return p_bar * (1 - math.exp(-spec.lam * tau)) * spec.u_r_R - spec.c * tau
