import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ambistop.bayesian import benchmark
from ambistop.commitment import commitment_plan, commitment_value
from ambistop.core import PayoffSpec, canonical_spec, prob
from ambistop.errors import DomainError

SPECS = [canonical_spec(0.1), PayoffSpec(1.0, 0.0, 0.8, 1.0, 0.1), canonical_spec(0.7)]


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(SPECS), st.floats(-4, 4), st.floats(0, 4))
def test_plan_line_is_worst_case_value(spec, z, width):
    lo, hi = float(prob(z)), float(prob(z + width))
    if not 0 < lo <= hi < 1:
        return
    plan = commitment_plan(lo, hi, spec)
    grid = np.linspace(lo, hi, 41)
    line = np.asarray(plan.value_line(grid), dtype=float)
    # nature cannot push the committed plan below its value on the set
    assert line.min() >= plan.value - 1e-9
    assert plan.value == pytest.approx(commitment_value(lo, hi, spec), abs=1e-12)


def test_singleton_set_is_bayes():
    s = canonical_spec(0.1)
    b = benchmark(s)
    for p in (0.05, 0.3, 0.6, 0.9):
        assert commitment_value(p, p, s) == pytest.approx(b.Phi_star(p), abs=1e-12)


def test_value_falls_as_set_grows():
    s = canonical_spec(0.1)
    vals = [commitment_value(0.5 - w, 0.5 + w, s) for w in (0.0, 0.1, 0.2, 0.3)]
    assert all(np.diff(vals) <= 1e-15)


def test_bad_interval():
    with pytest.raises(DomainError):
        commitment_value(0.6, 0.4, canonical_spec(0.1))
