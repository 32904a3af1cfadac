from __future__ import annotations

import numpy as np
import pytest

from coxkit.checks import FAIL, INCONCLUSIVE, PASS, band_status, chisquare_counts, merge_cells, tolerance_row
from coxkit.streams import BLOCK_SIZE, THREADS_ENV, block_sizes, exponentials, run_blocks, stream_tag, substream


def test_substreams_are_reproducible_and_distinct():
    a = substream(42, 3, 7).random(4)
    np.testing.assert_array_equal(a, substream(42, 3, 7).random(4))
    assert not np.array_equal(a, substream(42, 4, 7).random(4))
    assert not np.array_equal(a, substream(42, 3, 8).random(4))
    assert not np.array_equal(a, substream(43, 3, 7).random(4))


def test_stream_tag_stable():
    assert stream_tag("girsanov") == stream_tag("girsanov")
    assert stream_tag("girsanov") != stream_tag("filter")


def test_block_sizes():
    assert block_sizes(1) == [1]
    assert block_sizes(2 * BLOCK_SIZE + 5) == [BLOCK_SIZE, BLOCK_SIZE, 5]
    with pytest.raises(ValueError):
        block_sizes(0)


@pytest.mark.parametrize("threads", ["1", "3", "8"])
def test_run_blocks_independent_of_threads(monkeypatch, threads):
    def block(rng, size):
        return exponentials(rng, size), rng.integers(0, 10, size)

    monkeypatch.setenv(THREADS_ENV, "1")
    ref = run_blocks(block, 3 * BLOCK_SIZE + 17, seed=9, tag=2)
    monkeypatch.setenv(THREADS_ENV, threads)
    got = run_blocks(block, 3 * BLOCK_SIZE + 17, seed=9, tag=2)
    for a, b in zip(ref, got):
        assert a.tobytes() == b.tobytes()


def test_exponentials_by_inverse_cdf():
    u = substream(5).random(6)
    np.testing.assert_array_equal(exponentials(substream(5), 6), -np.log1p(-u))


def test_band_and_tolerance_status():
    assert band_status(1.0, 1.3, 0.1) == PASS
    assert band_status(1.0, 1.5, 0.1) == FAIL
    assert tolerance_row("x", 1.0, 1.0 + 1e-13, 1e-12).status == PASS
    assert tolerance_row("x", 1.0, 1.1, 1e-12).status == FAIL
    assert INCONCLUSIVE not in (PASS, FAIL)


def test_merge_cells_reaches_minimum():
    groups = merge_cells(np.array([3.0, 40.0, 30.0, 10.0, 10.0, 2.0]))
    assert sorted(i for g in groups for i in g) == list(range(6))
    assert all(np.array([3.0, 40.0, 30.0, 10.0, 10.0, 2.0])[g].sum() >= 25 for g in groups)


def test_chisquare_counts_uniform():
    rng = substream(1)
    counts = rng.integers(0, 4, 20_000)
    probs = np.full((20_000, 4), 0.25)
    _, p, dof = chisquare_counts(counts, probs)
    assert dof == 3 and p > 1e-3
