"""Maxmin commitment plan over a prior interval."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .bayesian import Case, benchmark
from .core import PayoffSpec, U, U_l, U_r, U_mix, dU_r, stopping_payoffs
from .errors import DomainError


class PlanKind(str, enum.Enum):
    BAYES_PLAN = "BayesPlanAt"
    MIX_ACTION_VS_EXPERIMENT = "MixActionVsExperiment"
    MIX_ACTIONS = "MixActions"


@dataclass(frozen=True)
class CommitmentPlan:
    value: float
    p_min: float
    kind: PlanKind
    weight: float | None = None  # xi for action-vs-experiment, rho_hat for action mixes
    spec: PayoffSpec | None = None

    def value_line(self, p):
        """Expected payoff of the committed plan when nature's prior is p."""
        spec = self.spec
        b = benchmark(spec)
        if self.kind is PlanKind.MIX_ACTIONS:
            return U_mix(p, self.weight, spec)
        if self.kind is PlanKind.MIX_ACTION_VS_EXPERIMENT:
            tangent = b.Phi(self.p_min) + b.dPhi(self.p_min) * (np.asarray(p) - self.p_min)
            return self.weight * U_r(p, spec) + (1 - self.weight) * tangent
        return _bayes_plan_line(p, self.p_min, spec)


def _bayes_plan_line(p, q, spec):
    """Payoff at prior p of the plan that is Bayes-optimal at prior q."""
    b = benchmark(spec)
    if not b.experiments:
        if U_r(q, spec) >= U_l(q, spec):
            return U_r(p, spec)
        return U_l(p, spec)
    if q <= b.p_l_B:
        return U_l(p, spec)
    if q >= b.p_r_B:
        return U_r(p, spec)
    return b.Phi(q) + b.dPhi(q) * (np.asarray(p, dtype=float) - q)


def _minimiser(lo, hi, spec):
    b = benchmark(spec)
    target = b.p_star if b.experiments else stopping_payoffs(spec).p_hat
    return min(max(target, lo), hi)


def commitment_value(lo: float, hi: float, spec: PayoffSpec) -> float:
    """Lowest Bayesian value over the prior interval [lo, hi]."""
    if not (0.0 < lo <= hi < 1.0):
        raise DomainError("need 0 < lo <= hi < 1")
    b = benchmark(spec)
    pm = _minimiser(lo, hi, spec)
    return float(b.Phi_star(pm)) if b.experiments else float(U(pm, spec))


def commitment_plan(lo: float, hi: float, spec: PayoffSpec) -> CommitmentPlan:
    value = commitment_value(lo, hi, spec)
    b = benchmark(spec)
    pm = _minimiser(lo, hi, spec)
    interior = lo < pm < hi
    if not b.experiments:
        sp = stopping_payoffs(spec)
        if interior:
            return CommitmentPlan(value, sp.p_hat, PlanKind.MIX_ACTIONS, sp.rho_hat, spec)
        return CommitmentPlan(value, pm, PlanKind.BAYES_PLAN, None, spec)
    if b.case is Case.CASE2 and interior:
        slope = b.dPhi(b.p_r_B)
        xi = -slope / (dU_r(spec) - slope)
        return CommitmentPlan(value, b.p_r_B, PlanKind.MIX_ACTION_VS_EXPERIMENT, xi, spec)
    return CommitmentPlan(value, pm, PlanKind.BAYES_PLAN, None, spec)
