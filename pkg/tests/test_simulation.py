from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coxkit.checks import PASS
from coxkit.errors import DomainError
from coxkit.intensity import FixedPrior, IntensityPath, PathBatch, RandomLevelPrior, DiscreteLaw
from coxkit.simulation import (
    PatternBatch,
    PointPattern,
    count_law_test,
    increment_independence_test,
    increment_pmf,
    interarrival_ks_test,
    sample_cox_sequential,
    sample_cox_timechange,
    sampler_equivalence_test,
    sequential_batch,
    timechange_arrivals,
    timechange_batch,
)
from coxkit.streams import substream
from strategies import paths

THREE_PIECE = FixedPrior(IntensityPath([0.0, 0.8, 1.5], [1.5, 0.3, 2.5], 2.0))


def test_pattern_accessors():
    p = PointPattern([0.5, 1.0, 1.7], 2.0)
    assert p.count(1.0) == 2
    assert p.count_before(1.0) == 1
    assert p.arrival(0) == 0.0
    assert p.arrival(3) == 1.7
    assert math.isinf(p.arrival(4))
    assert p.upto(1.2) == PointPattern([0.5, 1.0], 2.0)


def test_pattern_validation():
    with pytest.raises(DomainError):
        PointPattern([0.5, 0.5], 1.0)
    with pytest.raises(DomainError):
        PointPattern([0.0], 1.0)
    with pytest.raises(DomainError):
        PointPattern([1.5], 1.0)


@pytest.mark.parametrize("sampler", [sample_cox_timechange, sample_cox_sequential])
def test_silent_path_gives_empty_pattern(sampler):
    assert len(sampler(IntensityPath.constant(0.0, 5.0), substream(0))) == 0


def test_timechange_hand_inversion():
    paths = PathBatch.from_paths([IntensityPath.constant(2.0, 3.0)])
    out = timechange_arrivals(paths, np.array([[1.0, 2.5, np.inf]]))
    np.testing.assert_array_equal(out.pattern(0).arrivals, [0.5, 1.25])


def test_timechange_drops_epochs_past_total():
    paths = PathBatch.from_paths([IntensityPath.constant(1.0, 1.0)])
    assert len(timechange_arrivals(paths, np.array([[0.4, 0.9, 1.3]])).pattern(0)) == 2


def test_increment_pmf_examples():
    flat = IntensityPath([0.0, 1.0], [0.0, 1.0], 3.0)
    assert increment_pmf(flat, 0.0, 1.0, 0) == 1.0
    assert increment_pmf(flat, 0.0, 1.0, 1) == 0.0
    assert increment_pmf(flat, 1.0, 2.0, 1) == pytest.approx(math.exp(-1.0), rel=1e-15)
    with pytest.raises(DomainError):
        increment_pmf(flat, 2.0, 1.0, 0)


@given(paths(), st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_samples_are_simple_and_within_window(p, seed):
    batch = PathBatch.from_paths([p]).repeat(32)
    for draw in (timechange_batch, sequential_batch):
        pat = draw(batch, substream(seed))
        assert pat.strictly_increasing()
        a = pat.arrivals[np.isfinite(pat.arrivals)]
        assert np.all((a > 0) & (a <= p.horizon))


@given(paths(), st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_no_arrivals_where_level_is_zero(p, seed):
    pat = timechange_batch(PathBatch.from_paths([p]).repeat(16), substream(seed))
    a = pat.arrivals[np.isfinite(pat.arrivals)]
    if len(a):
        assert np.all(p.level_at(a) > 0)


def test_sequential_respects_start():
    batch = PathBatch.from_paths([IntensityPath.constant(3.0, 2.0)]).repeat(64)
    start = np.full(64, 1.2)
    start[:8] = np.inf
    pat = sequential_batch(batch, substream(4), start=start)
    assert np.all(pat.sizes[:8] == 0)
    a = pat.arrivals[np.isfinite(pat.arrivals)]
    assert np.all(a > 1.2)


def test_pattern_batch_roundtrip():
    pats = [PointPattern([0.2, 0.9], 1.0), PointPattern([], 1.0), PointPattern([0.5], 1.0)]
    b = PatternBatch.from_patterns(pats)
    assert [b.pattern(i) for i in range(3)] == pats
    np.testing.assert_array_equal(b.count(0.6), [1, 0, 1])
    np.testing.assert_array_equal(b.arrival(np.array([2, 1, 2])), [0.9, np.inf, np.inf])


def test_poisson_count_law_at_mean_four():
    prior = FixedPrior(IntensityPath.constant(4.0, 1.0))
    row = count_law_test(prior, 0.0, 1.0, 100_000, seed=101)
    assert row.status == PASS, row


def test_sequential_interarrivals_exponential():
    row = interarrival_ks_test(1.0, 10_000, seed=102)
    assert row.status == PASS, row


def test_samplers_agree_on_three_piece_path():
    row = sampler_equivalence_test(THREE_PIECE, (1.0, 2.0), 100_000, seed=103)
    assert row.status == PASS, row


def test_random_level_count_law_sequential():
    prior = RandomLevelPrior(DiscreteLaw((1.0, 2.0), (0.5, 0.5)), 1.0)
    row = count_law_test(prior, 0.0, 1.0, 50_000, seed=104, sampler="sequential")
    assert row.status == PASS, row


def test_disjoint_increments_independent():
    row = increment_independence_test(THREE_PIECE, (0.0, 0.8), (0.8, 2.0), 50_000, seed=105)
    assert row.status == PASS, row


def test_independence_needs_disjoint_intervals():
    with pytest.raises(DomainError):
        increment_independence_test(THREE_PIECE, (0.0, 1.0), (0.5, 2.0), 10, seed=0)
