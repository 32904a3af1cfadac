from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coxkit.checks import INCONCLUSIVE, PASS
from coxkit.errors import DomainError
from coxkit.intensity import DiscreteLaw, FixedPrior, IntensityPath, RandomLevelPrior
from coxkit.simulation import PointPattern
from coxkit.watanabe import (
    compensate,
    constant_phi,
    count_at_r,
    level_above_and_quiet,
    level_damped_phi,
    martingale_test,
    no_arrival_yet_phi,
    no_arrivals_by_r,
    predictable_integral_test,
    whole_space,
)
from strategies import paths, patterns_for

UNIT = FixedPrior(IntensityPath.constant(1.0, 1.0))
TWO_POINT = RandomLevelPrior(DiscreteLaw((1.0, 2.0), (0.5, 0.5)), 1.0)


def test_compensate_empty_silent():
    c = compensate(PointPattern([], 1.0), IntensityPath.constant(0.0, 1.0))
    assert all(c(t) == 0.0 for t in (0.0, 0.3, 1.0))


def test_compensate_one_arrival():
    c = compensate(PointPattern([0.5], 1.0), IntensityPath.constant(1.0, 1.0))
    assert c(1.0) == 0.0
    assert c(0.5) == 0.5
    assert c.left_limit(0.5) == -0.5


def test_compensate_horizon_mismatch():
    with pytest.raises(DomainError):
        compensate(PointPattern([], 2.0), IntensityPath.constant(1.0, 1.0))


@given(st.data())
def test_unit_jumps_at_arrivals(data):
    p = data.draw(paths())
    c = compensate(PointPattern(data.draw(patterns_for(p.horizon)), p.horizon), p)
    np.testing.assert_array_equal(c.jumps_at_arrivals(), 1)
    for a in c.pattern.arrivals:
        assert c(a) - c.left_limit(a) == pytest.approx(1.0, abs=1e-12)


def test_martingale_unit_rate():
    rep = martingale_test(UNIT, 0.0, 1.0, [whole_space()], 100_000, seed=201)
    assert rep.passed and rep.rows[0].status == PASS


def test_martingale_silent_is_exact_zero():
    rep = martingale_test(FixedPrior(IntensityPath.constant(0.0, 1.0)), 0.0, 1.0, [whole_space()], 1000, seed=202)
    row = rep.rows[0]
    assert row.estimate == 0.0 and row.std_error == 0.0 and row.status == PASS


def test_martingale_conditioned_on_quiet_past():
    events = [no_arrivals_by_r(), count_at_r(1), level_above_and_quiet(1.5)]
    rep = martingale_test(TWO_POINT, 0.5, 1.0, events, 100_000, seed=203, stop_at=(1, 2))
    assert len(rep.rows) == 9
    assert rep.passed, [r for r in rep.rows if not r.passed]


def test_martingale_empty_event_inconclusive():
    rep = martingale_test(UNIT, 0.5, 1.0, [count_at_r(50)], 2000, seed=204)
    assert rep.rows[0].status == INCONCLUSIVE
    assert rep.passed


def test_martingale_interval_validation():
    with pytest.raises(DomainError):
        martingale_test(UNIT, 0.7, 0.5, [whole_space()], 10, seed=0)


def test_predictable_constant_one():
    prior = FixedPrior(IntensityPath.constant(3.0, 2.0))
    rep = predictable_integral_test(prior, constant_phi(1.0, (0.0, 1.0, 2.0)), 50_000, seed=205)
    assert rep.passed
    assert rep.diagnostics["rhs_mean"] == pytest.approx(6.0, rel=1e-12)


def test_predictable_zero_is_exact():
    rep = predictable_integral_test(UNIT, constant_phi(0.0, (0.0, 0.5, 1.0)), 1000, seed=206)
    row = rep.rows[0]
    assert row.estimate == 0.0 and row.std_error == 0.0


@pytest.mark.parametrize("make", [no_arrival_yet_phi, level_damped_phi])
def test_predictable_pattern_dependent(make):
    grid = tuple(np.linspace(0.0, 1.0, 11))
    rep = predictable_integral_test(TWO_POINT, make(grid), 100_000, seed=207)
    assert rep.passed, rep.rows


def test_predictable_grid_past_horizon():
    with pytest.raises(DomainError):
        predictable_integral_test(UNIT, constant_phi(1.0, (0.0, 2.0)), 10, seed=0)
