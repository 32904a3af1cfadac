from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coxkit.checks import PASS
from coxkit.errors import ConfigError, DomainError
from coxkit.girsanov import (
    ConstantMultiplier,
    InverseMultiplier,
    TableMultiplier,
    closed_form_induction,
    expectation_of_z_test,
    induction_identity_test,
    log_increment,
    log_weights,
    reweighted_law_test,
    stochastic_exponential,
    weighted_sample,
)
from coxkit.intensity import CompoundPoissonPrior, DiscreteLaw, FixedPrior, IntensityPath, PathBatch, RandomLevelPrior
from coxkit.simulation import PatternBatch, PointPattern, increment_pmf
from strategies import paths, patterns_for

ONE = IntensityPath.constant(1.0, 1.0)
UNIT = FixedPrior(ONE)
TWO_POINT = RandomLevelPrior(DiscreteLaw((1.0, 2.0), (0.5, 0.5)), 1.0)
COMPOUND = CompoundPoissonPrior(1.0, 1.0, DiscreteLaw((0.5, 1.0), (0.5, 0.5)), 2.0)


def test_identity_multiplier_gives_unit_weight():
    pat = PointPattern([0.2, 0.6], 1.0)
    assert stochastic_exponential(ONE, IntensityPath.constant(1.0, 1.0), pat, 1.0) == 0.0


def test_doubling_with_one_arrival():
    z = math.exp(stochastic_exponential(ONE, IntensityPath.constant(2.0, 1.0), PointPattern([0.5], 1.0), 1.0))
    assert z == pytest.approx(2.0 * math.exp(-1.0), rel=1e-15)


def test_killing_without_arrivals():
    z = math.exp(stochastic_exponential(ONE, IntensityPath.constant(0.0, 1.0), PointPattern([], 1.0), 1.0))
    assert z == pytest.approx(math.e, rel=1e-15)


def test_killing_at_an_arrival_is_zero_weight():
    assert stochastic_exponential(ONE, IntensityPath.constant(0.0, 1.0), PointPattern([0.3], 1.0), 1.0) == -math.inf


def test_arrivals_after_t_ignored():
    y = IntensityPath.constant(3.0, 1.0)
    a = stochastic_exponential(ONE, y, PointPattern([0.2, 0.8], 1.0), 0.5)
    b = stochastic_exponential(ONE, y, PointPattern([0.2], 1.0), 0.5)
    assert a == b


@given(st.data())
@settings(max_examples=150)
def test_multiplicative_in_time(data):
    x = data.draw(paths())
    h = x.horizon
    y = IntensityPath(np.array([0.0, 0.5 * h]), np.array(data.draw(st.lists(st.floats(0.1, 3.0), min_size=2, max_size=2))), h)
    pat = PointPattern(data.draw(patterns_for(h)), h)
    s, t = sorted(data.draw(st.lists(st.floats(0, 1), min_size=2, max_size=2)))
    s, t = s * h, t * h
    whole = stochastic_exponential(x, y, pat, t)
    split = stochastic_exponential(x, y, pat, s) + log_increment(x, y, pat, s, t)
    assert whole == pytest.approx(split, rel=1e-12, abs=1e-12)


@given(st.data())
@settings(max_examples=100)
def test_batch_weights_match_pathwise(data):
    x = data.draw(paths(positive=True))
    h = x.horizon
    table = IntensityPath(np.array([0.0, 0.3 * h]), np.array([0.5, 1.7]), h)
    rules = [ConstantMultiplier(2.0), InverseMultiplier(1.5), TableMultiplier(table)]
    pat = PointPattern(data.draw(patterns_for(h)), h)
    t = data.draw(st.floats(0, 1)) * h
    batch = PathBatch.from_paths([x])
    pats = PatternBatch.from_patterns([pat])
    for rule in rules:
        expected = weighted_sample(x, rule, pat, t).log_weight
        got = float(log_weights(batch, pats, rule, t)[0])
        assert got == pytest.approx(expected, rel=1e-10, abs=1e-10)


def test_inverse_rule_needs_positive_prior():
    prior = FixedPrior(IntensityPath([0.0, 0.5], [1.0, 0.0], 1.0))
    with pytest.raises(ConfigError):
        expectation_of_z_test(prior, InverseMultiplier(), 1.0, 10, seed=0)
    with pytest.raises(ConfigError):
        ConstantMultiplier(-1.0)


def test_expectation_identity_rule_exact():
    row = expectation_of_z_test(TWO_POINT, ConstantMultiplier(1.0), 1.0, 5000, seed=301).rows[0]
    assert row.estimate == 1.0 and row.std_error == 0.0


def test_expectation_unit_doubling():
    rep = expectation_of_z_test(UNIT, ConstantMultiplier(2.0), 1.0, 100_000, seed=302)
    assert rep.rows[0].status == PASS
    assert rep.diagnostics["max_z"] > 1.0


def test_expectation_compound_reference_weight():
    rep = expectation_of_z_test(COMPOUND, InverseMultiplier(), 1.0, 100_000, seed=303)
    assert rep.rows[0].status == PASS, rep.rows


def test_reweighted_unit_doubling_zero_cell():
    rep = reweighted_law_test(UNIT, ConstantMultiplier(2.0), [(0.0, 1.0)], 100_000, seed=304)
    assert rep.passed, rep.rows
    zero = next(r for r in rep.rows if "=0]" in r.name)
    assert zero.target == pytest.approx(math.exp(-2.0), rel=1e-12)


def test_reweighted_decoupling_to_unit_rate():
    rep = reweighted_law_test(TWO_POINT, InverseMultiplier(), [(0.0, 1.0), (0.5, 1.0)], 100_000, seed=305)
    assert rep.passed, rep.rows
    zero = next(r for r in rep.rows if r.name.startswith("Q[N(0,1] =0]"))
    assert zero.target == pytest.approx(math.exp(-1.0), rel=1e-12)


def test_reweighted_identity_rule_is_plain_law():
    rep = reweighted_law_test(TWO_POINT, ConstantMultiplier(1.0), [(0.0, 1.0)], 50_000, seed=306)
    assert rep.passed
    assert rep.diagnostics["max_z"] == 1.0


def test_reweighted_interval_validation():
    with pytest.raises(DomainError):
        reweighted_law_test(UNIT, ConstantMultiplier(2.0), [(0.5, 1.5)], 10, seed=0)


def test_closed_form_reduces_to_pmf():
    x = IntensityPath([0.0, 0.4], [0.7, 2.0], 1.0)
    for n in range(4):
        assert closed_form_induction(x, IntensityPath.constant(1.0, 1.0), 1.0, n, n) == pytest.approx(
            increment_pmf(x, 0.0, 1.0, n), rel=1e-14
        )


def test_closed_form_doubling_two_arrivals():
    v = closed_form_induction(ONE, IntensityPath.constant(2.0, 1.0), 1.0, 2, 2)
    assert v == pytest.approx(2.0 * math.exp(-1.0), rel=1e-15)


def test_closed_form_prefix_past_t():
    assert closed_form_induction(ONE, ONE, 0.5, 2, 1, prefix=[0.7]) == 0.0


@pytest.mark.parametrize("n, j", [(0, 0), (2, 2), (2, 1), (3, 1)])
def test_induction_identity_unit_doubling(n, j):
    rep = induction_identity_test(UNIT, ConstantMultiplier(2.0), 1.0, n, j, 20_000, seed=307)
    assert rep.passed, rep.rows


def test_induction_target_value():
    row = induction_identity_test(UNIT, ConstantMultiplier(2.0), 1.0, 2, 2, 20_000, seed=308).rows[0]
    assert row.target == pytest.approx(2.0 * math.exp(-1.0), rel=1e-12)


def test_induction_compound_inverse():
    rep = induction_identity_test(COMPOUND, InverseMultiplier(), 1.5, 2, 1, 20_000, seed=309)
    assert rep.passed, rep.rows


def test_induction_argument_checks():
    with pytest.raises(DomainError):
        induction_identity_test(UNIT, ConstantMultiplier(2.0), 1.0, 1, 2, 10, seed=0)
