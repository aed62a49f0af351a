"""Belief arithmetic, payoff primitives and the no-news belief drift.

Beliefs are probabilities of state R.  Interval geometry is done in
log-odds, where the width of a prior set is preserved by updating.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit, logit

from .errors import DomainError

# Global comparison tolerance for region boundaries, in log-odds units.
EPS_B = 1e-10
# Root-finding tolerance (log-odds); tighter than EPS_B so boundaries are
# resolved well inside the comparison band.
ROOT_XTOL = 1e-13


@dataclass(frozen=True)
class PayoffSpec:
    """Stopping payoffs u_<action>_<state>, flow cost and arrival rate."""

    u_r_R: float
    u_l_R: float
    u_r_L: float
    u_l_L: float
    c: float
    lam: float = 1.0

    def __post_init__(self):
        vals = (self.u_r_R, self.u_l_R, self.u_r_L, self.u_l_L, self.c, self.lam)
        if not all(math.isfinite(v) for v in vals):
            raise DomainError("payoff spec must contain finite numbers")
        if not self.u_r_R > self.u_l_R:
            raise DomainError("need u_r_R > u_l_R")
        if not self.u_l_L > self.u_r_L:
            raise DomainError("need u_l_L > u_r_L")
        if not self.u_r_R > self.u_r_L:
            raise DomainError("need u_r_R > u_r_L")
        if not self.u_l_R < self.u_l_L:
            raise DomainError("need u_l_R < u_l_L")
        if not self.c > 0:
            raise DomainError("flow cost must be positive")
        if not self.lam > 0:
            raise DomainError("arrival rate must be positive")

    # gaps within an action across states
    @property
    def d_r(self) -> float:
        return abs(self.u_r_R - self.u_r_L)

    @property
    def d_l(self) -> float:
        return abs(self.u_l_R - self.u_l_L)

    # gaps across actions within a state
    @property
    def d_R(self) -> float:
        return self.u_r_R - self.u_l_R

    @property
    def d_L(self) -> float:
        return self.u_l_L - self.u_r_L

    @property
    def k(self) -> float:
        """Cost per unit arrival rate, c / lambda."""
        return self.c / self.lam

    @property
    def c_bar(self) -> float:
        """Cost above which a Bayesian never experiments."""
        return self.lam * self.d_R * self.d_L / (self.d_R + self.d_L)

    @property
    def c_low(self) -> float:
        """Cost at or below which randomized stopping never hits the hedged payoff."""
        return self.d_r / (self.d_r + self.d_l) * self.c_bar

    @property
    def is_symmetric(self) -> bool:
        return (math.isclose(self.u_r_R, self.u_l_L, rel_tol=0, abs_tol=1e-14)
                and math.isclose(self.u_l_R, self.u_r_L, rel_tol=0, abs_tol=1e-14))

    def with_cost(self, c: float) -> "PayoffSpec":
        return PayoffSpec(self.u_r_R, self.u_l_R, self.u_r_L, self.u_l_L, c, self.lam)

    def as_dict(self) -> dict:
        return {"u_r_R": self.u_r_R, "u_l_R": self.u_l_R, "u_r_L": self.u_r_L,
                "u_l_L": self.u_l_L, "c": self.c, "lambda": self.lam}


def canonical_spec(c: float = 0.1, lam: float = 1.0) -> PayoffSpec:
    """Symmetric unit payoffs: right action pays 1 in R, left pays 1 in L."""
    return PayoffSpec(1.0, 0.0, 0.0, 1.0, c, lam)


def llr(p):
    """Log-likelihood ratio ln(p/(1-p)); +-inf at the endpoints."""
    if np.ndim(p) == 0:
        p = float(p)
        if not 0.0 <= p <= 1.0:
            raise DomainError(f"belief {p} outside [0,1]")
        if p == 0.0:
            return -math.inf
        if p == 1.0:
            return math.inf
        return math.log(p / (1.0 - p))
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise DomainError("belief outside [0,1]")
    with np.errstate(divide="ignore"):
        return logit(p)


def prob(z):
    """Inverse of llr."""
    if np.ndim(z) == 0:
        return float(expit(float(z)))
    return expit(np.asarray(z, dtype=float))


def bayes_update(p, t: float, lam: float):
    """Belief after t units of time without a breakthrough."""
    if t < 0:
        raise DomainError("elapsed time must be non-negative")
    if np.ndim(p) == 0 and float(p) in (0.0, 1.0):
        return float(p)
    return prob(llr(p) - lam * t)


def drift_time(p: float, p_target: float, lam: float) -> float:
    """Time for belief p to drift down to p_target absent news."""
    if not (0.0 < p_target < 1.0 and 0.0 < p < 1.0) or p_target > p * (1 + 1e-12):
        raise DomainError(f"need 0 < target <= p < 1, got p={p}, target={p_target}")
    return max(0.0, (llr(p) - llr(p_target)) / lam)


def p_lower(p_bar, delta: float):
    """Lower end of the prior set whose upper end is p_bar and log-odds width delta."""
    if delta < 0:
        raise DomainError("width must be non-negative")
    if math.isinf(delta):
        return 0.0 if np.ndim(p_bar) == 0 else np.zeros_like(np.asarray(p_bar, float))
    if np.ndim(p_bar) == 0:
        pb = float(p_bar)
        if pb in (0.0, 1.0):
            return pb
        return min(prob(llr(pb) - delta), pb)  # the log-odds round trip can gain an ulp
    return np.minimum(prob(llr(p_bar) - delta), p_bar)


def p_upper_from_lower(p_low: float, delta: float) -> float:
    """Upper end of the set whose lower end is p_low."""
    return prob(llr(p_low) + delta)


@dataclass(frozen=True)
class AmbiguityInterval:
    p_bar: float
    delta: float

    def __post_init__(self):
        if not 0.0 <= self.p_bar <= 1.0:
            raise DomainError("upper belief outside [0,1]")
        if self.delta < 0 or math.isnan(self.delta):
            raise DomainError("width must be non-negative")

    @property
    def p_low(self) -> float:
        return p_lower(self.p_bar, self.delta)

    @classmethod
    def from_bounds(cls, lo: float, hi: float) -> "AmbiguityInterval":
        if not 0.0 < lo <= hi < 1.0:
            raise DomainError("need 0 < lo <= hi < 1")
        return cls(hi, llr(hi) - llr(lo))

    @classmethod
    def centered(cls, theta: float, delta: float) -> "AmbiguityInterval":
        return cls(prob(llr(theta) + delta / 2.0), delta)

    def updated(self, t: float, lam: float) -> "AmbiguityInterval":
        return AmbiguityInterval(bayes_update(self.p_bar, t, lam), self.delta)


@dataclass(frozen=True)
class StoppingPayoffs:
    p_hat: float
    u_hat: float
    rho_hat: float


def U_l(p, spec: PayoffSpec):
    return p * spec.u_l_R + (1 - p) * spec.u_l_L


def U_r(p, spec: PayoffSpec):
    return p * spec.u_r_R + (1 - p) * spec.u_r_L


def U(p, spec: PayoffSpec):
    return np.maximum(U_l(p, spec), U_r(p, spec)) if np.ndim(p) else max(U_l(p, spec), U_r(p, spec))


def U_mix(p, rho: float, spec: PayoffSpec):
    """Payoff of stopping and taking r with probability rho."""
    return rho * U_r(p, spec) + (1 - rho) * U_l(p, spec)


def dU_l(spec: PayoffSpec) -> float:
    return spec.u_l_R - spec.u_l_L


def dU_r(spec: PayoffSpec) -> float:
    return spec.u_r_R - spec.u_r_L


def stopping_payoffs(spec: PayoffSpec) -> StoppingPayoffs:
    p_hat = (spec.u_l_L - spec.u_r_L) / (spec.d_l + spec.d_r)
    rho_hat = spec.d_l / (spec.d_r + spec.d_l)
    u_hat = (spec.u_r_R * spec.u_l_L - spec.u_r_L * spec.u_l_R) / (spec.d_r + spec.d_l)
    return StoppingPayoffs(p_hat, u_hat, rho_hat)


def root_in_llr(f: Callable[[float], float], lo: float, hi: float,
                xtol: float = ROOT_XTOL) -> float:
    """Bracketed root of f(p) searched in log-odds between beliefs lo and hi."""
    g = lambda z: f(prob(z))
    z = brentq(g, llr(lo), llr(hi), xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500)
    return prob(z)
