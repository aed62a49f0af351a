"""Optimal stopping with Poisson learning when the prior is an interval."""
from .bayesian import BayesBenchmark, Case, benchmark
from .commitment import commitment_plan, commitment_value
from .core import (AmbiguityInterval, PayoffSpec, StoppingPayoffs, bayes_update,
                   canonical_spec, drift_time, llr, p_lower, prob, stopping_payoffs)
from .diffusion import DiffusionSolution, DiffusionSpec, simulate_diffusion, solve_diffusion
from .dynamics import (expected_learning_time, knightian_learning_time, naive_cdf, simulate,
                       single_crossing_check, stopping_cdf)
from .equilibrium import EquilibriumSolution, PolicyPoint, solve
from .errors import (ConvergenceError, DomainError, LargeDelta, NoExperimentation,
                     NoPreemptiveStop, RegionError, Unsupported)
from .twosource import TwoSourceSpec, two_source_dp, two_source_equilibrium

__all__ = [
    "AmbiguityInterval", "BayesBenchmark", "Case", "ConvergenceError", "DiffusionSolution",
    "DiffusionSpec", "DomainError", "EquilibriumSolution", "LargeDelta", "NoExperimentation",
    "NoPreemptiveStop", "PayoffSpec", "PolicyPoint", "RegionError", "StoppingPayoffs",
    "TwoSourceSpec", "Unsupported", "bayes_update", "benchmark", "canonical_spec",
    "commitment_plan", "commitment_value", "drift_time", "expected_learning_time",
    "knightian_learning_time", "llr", "naive_cdf", "p_lower", "prob", "simulate",
    "simulate_diffusion", "single_crossing_check", "solve", "solve_diffusion", "stopping_cdf",
    "stopping_payoffs", "two_source_dp", "two_source_equilibrium",
]
__version__ = "0.1.0"
