"""Bayesian benchmark: value of experimenting, stopping boundaries and case split."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .core import (PayoffSpec, ROOT_XTOL, U_l, U_r, dU_l, dU_r, llr, prob,
                   root_in_llr, stopping_payoffs)
from .errors import DomainError, NoExperimentation

# Cut separating an interior minimiser of Phi* from a minimiser at p_r^B.
CASE_SLOPE_TOL = 1e-8
P_RIGHT_MAX = 1.0 - 1e-9


class Case(str, enum.Enum):
    CASE1 = "Case1"
    CASE2 = "Case2"
    NO_EXPERIMENTATION = "NoExperimentation"


def _log_odds_ratio(p, p_stop):
    return np.log(p / (1 - p)) - math.log(p_stop / (1 - p_stop))


def phi(p, p_stop: float, stop_value: float, spec: PayoffSpec):
    """Value of experimenting from belief p until the belief drifts to p_stop,
    collecting stop_value there (or u_r_R on a breakthrough)."""
    p_arr = np.asarray(p, dtype=float)
    if np.any(p_arr < p_stop - 1e-15) or np.any(p_arr >= 1) or p_stop <= 0:
        raise DomainError("phi needs 0 < p_stop <= p < 1")
    a = (p_arr - p_stop) / (1 - p_stop)
    b = (1 - p_arr) / (1 - p_stop)
    out = a * spec.u_r_R + b * stop_value - (a + (1 - p_arr) * _log_odds_ratio(p_arr, p_stop)) * spec.k
    return float(out) if np.ndim(p) == 0 else out


def phi_prime(p, p_stop: float, stop_value: float, spec: PayoffSpec):
    """Derivative of phi in its first argument."""
    p_arr = np.asarray(p, dtype=float)
    k = spec.k
    out = ((spec.u_r_R - stop_value - k) / (1 - p_stop)
           + k * _log_odds_ratio(p_arr, p_stop) - k / p_arr)
    return float(out) if np.ndim(p) == 0 else out


def phi_second(p, spec: PayoffSpec):
    """Second derivative of phi; it does not depend on the stopping data."""
    p_arr = np.asarray(p, dtype=float)
    out = spec.k / (p_arr * (1 - p_arr)) + spec.k / p_arr ** 2
    return float(out) if np.ndim(p) == 0 else out


def ode_residual(p, f, fp, spec: PayoffSpec):
    """c - [lam p (u_r_R - f) - lam p (1-p) f'] for a candidate value f."""
    return spec.c - (spec.lam * p * (spec.u_r_R - f) - spec.lam * p * (1 - p) * fp)


def left_boundary(spec: PayoffSpec) -> float:
    if spec.c >= spec.c_bar:
        raise NoExperimentation("c >= c_bar")
    return spec.k / spec.d_R


@dataclass(frozen=True)
class BayesBenchmark:
    spec: PayoffSpec
    case: Case
    p_l_B: float | None
    p_r_B: float | None
    c_bar: float
    p_star: float
    phi_at_p_star: float

    @property
    def experiments(self) -> bool:
        return self.case is not Case.NO_EXPERIMENTATION

    def Phi(self, p):
        """Value of the best stopping rule that never takes r early."""
        if not self.experiments:
            return U_l(p, self.spec) if np.ndim(p) == 0 else np.maximum(U_l(p, self.spec), U_r(p, self.spec))
        pl = self.p_l_B
        stop = U_l(pl, self.spec)
        if np.ndim(p) == 0:
            p = float(p)
            if p <= pl:
                return U_l(p, self.spec)
            if p >= 1.0:
                return self.spec.u_r_R - self.spec.k
            return phi(p, pl, stop, self.spec)
        p = np.asarray(p, dtype=float)
        out = np.array(U_l(p, self.spec), dtype=float)
        inner = (p > pl) & (p < 1)
        out[inner] = phi(p[inner], pl, stop, self.spec)
        out[p >= 1] = self.spec.u_r_R - self.spec.k
        return out

    def dPhi(self, p):
        if not self.experiments:
            raise NoExperimentation("no experimentation region")
        pl = self.p_l_B
        if np.ndim(p) == 0:
            if p <= pl:
                return dU_l(self.spec)
            return phi_prime(p, pl, U_l(pl, self.spec), self.spec)
        p = np.asarray(p, dtype=float)
        out = np.full(p.shape, dU_l(self.spec))
        inner = p > pl
        out[inner] = phi_prime(p[inner], pl, U_l(pl, self.spec), self.spec)
        return out

    def d2Phi(self, p):
        if np.ndim(p) == 0:
            return 0.0 if p <= self.p_l_B else phi_second(p, self.spec)
        p = np.asarray(p, dtype=float)
        return np.where(p > self.p_l_B, phi_second(np.where(p > self.p_l_B, p, 0.5), self.spec), 0.0)

    def Phi_star(self, p):
        if np.ndim(p) == 0:
            return max(self.Phi(p), U_r(p, self.spec))
        return np.maximum(self.Phi(p), U_r(p, self.spec))

    def value_function(self, p):
        return self.Phi(p), self.Phi_star(p)


def value_function(p, spec: PayoffSpec):
    """(Phi(p), Phi*(p))."""
    return benchmark(spec).value_function(p)


def right_boundary_and_cbar(spec: PayoffSpec):
    """(p_r^B or None, c_bar)."""
    b = benchmark(spec)
    return b.p_r_B, spec.c_bar


def p_star_and_case(spec: PayoffSpec):
    b = benchmark(spec)
    return b.p_star, b.case


@lru_cache(maxsize=256)
def benchmark(spec: PayoffSpec) -> BayesBenchmark:
    sp = stopping_payoffs(spec)
    c_bar = spec.c_bar
    if spec.c >= c_bar:
        return BayesBenchmark(spec, Case.NO_EXPERIMENTATION, None, None, c_bar,
                              sp.p_hat, sp.u_hat)
    pl = spec.k / spec.d_R
    stop = U_l(pl, spec)
    gap = lambda p: phi(p, pl, stop, spec) - U_r(p, spec)
    lo = max(sp.p_hat, pl)
    if not (gap(lo) > 0 > gap(P_RIGHT_MAX)):
        return BayesBenchmark(spec, Case.NO_EXPERIMENTATION, None, None, c_bar,
                              sp.p_hat, sp.u_hat)
    pr = root_in_llr(gap, lo, P_RIGHT_MAX)
    slope_at_pr = phi_prime(pr, pl, stop, spec)
    if slope_at_pr > CASE_SLOPE_TOL:
        # Phi' runs from U_l' < 0 at p_l^B to a positive value at p_r^B
        dz = lambda z: phi_prime(prob(z), pl, stop, spec)
        z = brentq(dz, llr(pl), llr(pr), xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps)
        ps, case = prob(z), Case.CASE1
    else:
        ps, case = pr, Case.CASE2
    return BayesBenchmark(spec, case, pl, pr, c_bar, ps, phi(ps, pl, stop, spec))


def dPhi_dU_r_gap(spec: PayoffSpec) -> float:
    """U_r' - Phi'(p_r^B), the slope jump of Phi* at the right boundary."""
    b = benchmark(spec)
    return dU_r(spec) - b.dPhi(b.p_r_B)
