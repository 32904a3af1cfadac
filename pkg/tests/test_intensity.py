from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from coxkit.errors import ConfigError, DomainError
from coxkit.intensity import (
    CompoundPoissonPrior,
    DiscreteLaw,
    ExponentialLaw,
    FixedPrior,
    GammaLaw,
    IntensityPath,
    PathBatch,
    PointMass,
    RandomLevelPrior,
    UniformLaw,
    cumulative,
    inverse_cumulative,
    sample_paths,
    sample_prior,
)
from coxkit.streams import substream
from strategies import paths


def test_cumulative_constant_rate_times_time():
    assert cumulative(IntensityPath.constant(2.0, 3.0), 3.0) == 6.0


def test_cumulative_at_zero():
    p = IntensityPath([0.0, 0.7], [3.0, 1.0], 2.0)
    assert cumulative(p, 0.0) == 0.0


def test_cumulative_two_pieces():
    assert cumulative(IntensityPath([0.0, 1.0], [1.0, 3.0], 2.0), 2.0) == 4.0


def test_cumulative_outside_window_raises():
    p = IntensityPath.constant(1.0, 1.0)
    with pytest.raises(DomainError):
        cumulative(p, 1.5)
    with pytest.raises(DomainError):
        cumulative(p, -0.1)


def test_inverse_examples():
    p = IntensityPath.constant(2.0, 3.0)
    assert inverse_cumulative(p, 4.0) == 2.0
    assert inverse_cumulative(p, 0.0) == 0.0
    plateau = IntensityPath([0.0, 1.0], [0.0, 1.0], 2.0)
    assert inverse_cumulative(plateau, 0.5) == 1.5


def test_inverse_beyond_total_is_none():
    p = IntensityPath.constant(2.0, 3.0)
    assert inverse_cumulative(p, 6.5) is None
    assert np.isinf(p.inverse_cumulative(np.array([6.5]))[0])


def test_inverse_smallest_t_on_plateau():
    p = IntensityPath([0.0, 1.0, 2.0], [1.0, 0.0, 1.0], 3.0)
    # Lambda = 1 on the whole plateau [1, 2]; the left end is returned
    assert inverse_cumulative(p, 1.0) == 1.0


def test_path_validation():
    with pytest.raises(DomainError):
        IntensityPath([0.1], [1.0], 1.0)
    with pytest.raises(DomainError):
        IntensityPath([0.0, 0.0], [1.0, 2.0], 1.0)
    with pytest.raises(DomainError):
        IntensityPath([0.0], [-1.0], 1.0)
    with pytest.raises(DomainError):
        IntensityPath([0.0, 1.0], [1.0, 2.0], 1.0)
    with pytest.raises(DomainError):
        IntensityPath([0.0], [1.0], math.inf)


def test_right_continuity_at_breakpoint():
    p = IntensityPath([0.0, 1.0], [1.0, 3.0], 2.0)
    assert p.level_at(1.0) == 3.0
    assert p.level_at(np.nextafter(1.0, 0.0)) == 1.0


def test_tail_extension():
    p = IntensityPath([0.0, 1.0], [2.0, 0.0], 3.0)
    assert p.extended_cumulative(math.inf) == 2.0
    assert p.tail_integral(0.5) == 1.0
    assert math.isinf(IntensityPath.constant(1.0, 1.0).tail_integral(0.3))
    assert p.integral(0.0, 10.0) == 2.0


def test_restrict():
    p = IntensityPath([0.0, 1.0, 2.0], [1.0, 2.0, 3.0], 3.0)
    q = p.restrict(1.5)
    assert q == IntensityPath([0.0, 1.0], [1.0, 2.0], 1.5)


def test_batch_matches_scalar_paths():
    ps = [IntensityPath([0.0, 0.5], [1.0, 2.0], 2.0), IntensityPath([0.0, 0.2, 1.4], [0.0, 3.0, 0.5], 2.0)]
    batch = PathBatch.from_paths(ps)
    t = np.array([1.7, 1.1])
    np.testing.assert_array_equal(batch.cumulative(t), [ps[0].cumulative(1.7), ps[1].cumulative(1.1)])
    np.testing.assert_array_equal(batch.level_at(t), [2.0, 3.0])
    assert batch.path(1) == ps[1]


@given(paths(), st.floats(0, 1), st.floats(0, 1))
def test_cumulative_monotone(p, a, b):
    t1, t2 = sorted((a * p.horizon, b * p.horizon))
    assert p.cumulative(t2) - p.cumulative(t1) >= 0


@given(paths(), st.floats(0, 1))
def test_inverse_of_cumulative_never_overshoots(p, a):
    t = a * p.horizon
    back = p.inverse_cumulative(p.cumulative(t))
    assert back is not None and back <= t + 1e-12 * max(1.0, t)
    seg = np.searchsorted(p.breakpoints, t, side="right") - 1
    if p.levels[seg] > 0 and t > p.breakpoints[seg]:
        assert back == pytest.approx(t, rel=1e-12, abs=1e-12)


@given(paths(positive=True), st.floats(0, 1))
def test_cumulative_of_inverse_roundtrip(p, a):
    u = a * p.total
    t = p.inverse_cumulative(u)
    assert t is not None
    assert p.cumulative(t) == pytest.approx(u, rel=1e-12, abs=1e-12)


def test_sample_prior_fixed_and_degenerate():
    rng = substream(1)
    path = IntensityPath([0.0, 0.3], [1.0, 2.0], 1.0)
    assert sample_prior(FixedPrior(path), rng) is path
    drawn = sample_prior(RandomLevelPrior(DiscreteLaw((1.0,), (1.0,)), 2.0), rng)
    assert drawn == IntensityPath.constant(1.0, 2.0)


def test_compound_poisson_structure():
    prior = CompoundPoissonPrior(1.0, 2.0, PointMass(0.5), 10.0)
    p = sample_prior(prior, substream(7))
    assert p.levels[0] == 1.0
    np.testing.assert_allclose(np.diff(p.levels), 0.5, rtol=0, atol=1e-15)
    assert np.all(np.diff(p.breakpoints) > 0)


def test_compound_poisson_jump_count_is_poisson():
    prior = CompoundPoissonPrior(1.0, 2.0, PointMass(0.5), 10.0)
    batch = sample_paths(prior, substream(11), 20_000)
    counts = (np.isfinite(batch.breakpoints) & (batch.breakpoints > 0)).sum(axis=1)
    ks = np.arange(8, 34)
    observed = np.array([np.sum(counts <= ks[0])] + [np.sum(counts == k) for k in ks[1:-1]] + [np.sum(counts >= ks[-1])])
    probs = np.concatenate([[stats.poisson.cdf(ks[0], 20)], stats.poisson.pmf(ks[1:-1], 20), [stats.poisson.sf(ks[-1] - 1, 20)]])
    _, pvalue = stats.chisquare(observed, probs * len(counts))
    assert pvalue > 1e-3


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=20)
def test_compound_poisson_paths_nondecreasing(seed):
    prior = CompoundPoissonPrior(0.5, 1.5, ExponentialLaw(0.7), 3.0)
    batch = sample_paths(prior, substream(seed), 16)
    for i in range(len(batch)):
        p = batch.path(i)
        assert np.all(np.diff(p.levels) >= 0)
        assert np.all(p.levels >= 0.5)


def test_sample_prior_deterministic_given_seed():
    prior = CompoundPoissonPrior(1.0, 1.0, DiscreteLaw((0.5, 1.0), (0.5, 0.5)), 4.0)
    assert sample_prior(prior, substream(3)) == sample_prior(prior, substream(3))


def test_malformed_laws_raise_config_error():
    with pytest.raises(ConfigError):
        DiscreteLaw((1.0, 2.0), (0.5,))
    with pytest.raises(ConfigError):
        DiscreteLaw((1.0, 2.0), (0.6, 0.6))
    with pytest.raises(ConfigError):
        CompoundPoissonPrior(1.0, 1.0, UniformLaw(0.0, 1.0), 1.0)
    with pytest.raises(ConfigError):
        CompoundPoissonPrior(1.0, 1.0, PointMass(0.0), 1.0)


@pytest.mark.parametrize("law", [ExponentialLaw(0.8), UniformLaw(0.5, 2.0), GammaLaw(2.0, 0.75)])
def test_continuous_law_sampling_matches_cdf(law):
    draws = law.sample(substream(5), 20_000)
    assert stats.kstest(draws, law.cdf).pvalue > 1e-3


def test_mgf_condition():
    assert ExponentialLaw(0.5).mgf_finite(1.9)
    assert not ExponentialLaw(0.5).mgf_finite(2.0)
    assert DiscreteLaw((0.5, 1.5), (0.5, 0.5)).mgf_finite(100.0)
