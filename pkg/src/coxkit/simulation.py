"""Conditional Poisson sampling given an intensity path.

Two independent samplers realise the same law:

* ``sample_cox_timechange`` maps unit-rate Poisson epochs through the
  inverse cumulative intensity;
* ``sample_cox_sequential`` draws each next arrival from the interarrival
  kernel started at the previous arrival, by exact inversion of its survival
  function ``exp(-(Lambda(t) - Lambda(T_n)))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .checks import (
    CheckRow,
    chisquare_counts,
    chisquare_homogeneity,
    chisquare_independence,
    ks_exponential,
    pvalue_row,
)
from .errors import ConsistencyError, DomainError
from .intensity import IntensityPath, PathBatch, sample_paths, unit_rate_epochs
from .streams import exponentials, run_blocks


@dataclass(frozen=True, eq=False)
class PointPattern:
    """Strictly increasing arrival times in ``(0, horizon]``."""

    arrivals: np.ndarray
    horizon: float

    def __post_init__(self):
        a = np.array(self.arrivals, dtype=float).reshape(-1)
        h = float(self.horizon)
        if not (np.isfinite(h) and h > 0):
            raise DomainError("horizon must be positive and finite")
        if len(a) and (a[0] <= 0 or a[-1] > h or not np.all(np.isfinite(a))):
            raise DomainError("arrivals must lie in (0, horizon]")
        if np.any(np.diff(a) <= 0):
            raise DomainError("arrivals must be strictly increasing")
        a.setflags(write=False)
        object.__setattr__(self, "arrivals", a)
        object.__setattr__(self, "horizon", h)

    def __len__(self) -> int:
        return len(self.arrivals)

    def count(self, t):
        """N_t = #{n : T_n <= t}."""
        out = np.searchsorted(self.arrivals, t, side="right")
        return int(out) if np.ndim(out) == 0 else out

    def count_before(self, t):
        """N_{t-} = #{n : T_n < t}."""
        out = np.searchsorted(self.arrivals, t, side="left")
        return int(out) if np.ndim(out) == 0 else out

    def arrival(self, n: int) -> float:
        """T_n with T_0 = 0 and T_n = inf past the last arrival."""
        if n == 0:
            return 0.0
        return float(self.arrivals[n - 1]) if n <= len(self.arrivals) else math.inf

    def upto(self, t: float) -> PointPattern:
        return PointPattern(self.arrivals[self.arrivals <= t], self.horizon)

    def __eq__(self, other):
        if not isinstance(other, PointPattern):
            return NotImplemented
        return self.horizon == other.horizon and np.array_equal(self.arrivals, other.arrivals)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class PatternBatch:
    """R point patterns padded with inf to a common width."""

    arrivals: np.ndarray
    horizon: float

    def __len__(self) -> int:
        return self.arrivals.shape[0]

    @classmethod
    def from_patterns(cls, patterns) -> PatternBatch:
        patterns = list(patterns)
        width = max((len(p) for p in patterns), default=0)
        a = np.full((len(patterns), width), np.inf)
        for i, p in enumerate(patterns):
            a[i, : len(p)] = p.arrivals
        return cls(a, patterns[0].horizon)

    @property
    def sizes(self) -> np.ndarray:
        return np.isfinite(self.arrivals).sum(axis=1)

    def count(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if t.ndim == 0:
            return (self.arrivals <= t).sum(axis=1)
        return (self.arrivals <= t[:, None]).sum(axis=1)

    def arrival(self, n) -> np.ndarray:
        """T_n per row (T_0 = 0, inf when fewer than n arrivals)."""
        n = np.broadcast_to(np.asarray(n), (len(self),))
        padded = np.concatenate([np.zeros((len(self), 1)), self.arrivals, np.full((len(self), 1), np.inf)], axis=1)
        idx = np.minimum(n, padded.shape[1] - 1)
        return padded[np.arange(len(self)), idx]

    def truncate(self, t) -> PatternBatch:
        """Arrivals after ``t`` removed (the information available at ``t``)."""
        t = np.asarray(t, dtype=float)
        cut = t if t.ndim == 0 else t[:, None]
        return PatternBatch(np.where(self.arrivals <= cut, self.arrivals, np.inf), self.horizon)

    def pattern(self, i: int) -> PointPattern:
        row = self.arrivals[i]
        return PointPattern(row[np.isfinite(row)], self.horizon)

    def strictly_increasing(self) -> bool:
        a = self.arrivals
        if a.shape[1] < 2:
            return True
        with np.errstate(invalid="ignore"):
            d = np.diff(a, axis=1)
        both = np.isfinite(a[:, 1:])
        return bool(np.all(d[both] > 0))


def timechange_arrivals(paths: PathBatch, epochs: np.ndarray) -> PatternBatch:
    """Map unit-rate epochs (R, K), inf-padded, through Lambda^{-1} row by row."""
    if epochs.shape[1] == 0:
        return PatternBatch(np.empty((len(paths), 0)), paths.horizon)
    t = paths.inverse_cumulative(epochs)
    t = np.where(np.isfinite(epochs), t, np.inf)
    keep = int(np.isfinite(t).sum(axis=1).max()) if t.size else 0
    return PatternBatch(t[:, :keep], paths.horizon)


def timechange_batch(paths: PathBatch, rng: np.random.Generator) -> PatternBatch:
    return timechange_arrivals(paths, unit_rate_epochs(rng, paths.total))


def sequential_batch(
    paths: PathBatch,
    rng: np.random.Generator,
    start=None,
) -> PatternBatch:
    """Arrivals strictly after ``start`` (default 0) drawn one kernel at a time.

    Rows with ``start = inf`` produce no arrivals. Every step draws one
    uniform per row, live or not, so consumption is fixed by the step count.
    """
    n = len(paths)
    cur = np.zeros(n) if start is None else np.asarray(start, dtype=float).copy()
    alive = np.isfinite(cur)
    cur = np.where(alive, cur, 0.0)
    base = paths.cumulative(cur)
    out = []
    while alive.any():
        target = base + exponentials(rng, n)
        nxt = paths.inverse_cumulative(target)
        alive &= np.isfinite(nxt)
        out.append(np.where(alive, nxt, np.inf))
        cur = np.where(alive, nxt, cur)
        base = np.where(alive, paths.cumulative(cur), base)
    # the final column is the all-dead step
    arr = np.stack(out[:-1], axis=1) if len(out) > 1 else np.empty((n, 0))
    return PatternBatch(arr, paths.horizon)


def sample_cox_timechange(path: IntensityPath, rng: np.random.Generator) -> PointPattern:
    """Cox arrivals on ``[0, horizon]`` by time change of a unit-rate Poisson process."""
    return timechange_batch(PathBatch.from_paths([path]), rng).pattern(0)


def sample_cox_sequential(path: IntensityPath, rng: np.random.Generator) -> PointPattern:
    """Cox arrivals on ``[0, horizon]`` drawn arrival by arrival from the interarrival kernels."""
    return sequential_batch(PathBatch.from_paths([path]), rng).pattern(0)


def poisson_log_pmf(n, mean):
    """log of e^{-m} m^n / n! with 0^0 = 1; vectorised."""
    n = np.asarray(n, dtype=float)
    m = np.asarray(mean, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        logm = np.log(m)
        body = np.where(n == 0, 0.0, n * logm)
    out = -m + body - gammaln(n + 1)
    return np.where(np.isinf(m), -np.inf, out)


def increment_pmf(path: IntensityPath, r: float, t: float, n: int) -> float:
    """P[N_t - N_r = n | path]: Poisson pmf with mean Lambda(t) - Lambda(r)."""
    if not 0 <= r <= t <= path.horizon:
        raise DomainError("need 0 <= r <= t <= horizon")
    if n < 0:
        raise DomainError("n must be nonnegative")
    mean = path.cumulative(t) - path.cumulative(r)
    return float(np.exp(poisson_log_pmf(n, mean)))


# ---------------------------------------------------------------------------
# distributional checks of the samplers
# ---------------------------------------------------------------------------

SAMPLERS = {"timechange": timechange_batch, "sequential": sequential_batch}


def _sampler(name: str):
    try:
        return SAMPLERS[name]
    except KeyError:
        raise ValueError(f"unknown sampler {name!r}; expected one of {sorted(SAMPLERS)}") from None


def count_law_test(prior, r: float, t: float, replicates: int, seed: int,
                   sampler: str = "timechange", tag: int = 0) -> CheckRow:
    """Chi-square fit of N_t - N_r to the conditional Poisson pmf, replicate by replicate.

    Expected cell counts are sums over replicates of increment_pmf given each
    replicate's own path, so random priors need no mixture formula.
    """
    draw = _sampler(sampler)

    def block(rng, size):
        paths = sample_paths(prior, rng, size)
        patterns = draw(paths, rng)
        counts = patterns.count(t) - patterns.count(r)
        means = paths.cumulative(np.full(size, t)) - paths.cumulative(np.full(size, r))
        return counts, means

    counts, means = run_blocks(block, replicates, seed, tag)
    top = float(means.max())
    cap = int(np.ceil(top + 10.0 * np.sqrt(top) + 10))
    n = np.arange(cap)
    probs = np.exp(poisson_log_pmf(n[None, :], means[:, None]))
    probs = np.concatenate([probs, np.clip(1.0 - probs.sum(axis=1, keepdims=True), 0.0, None)], axis=1)
    stat, p, dof = chisquare_counts(counts, probs)
    return pvalue_row(f"count_law[{sampler}] N({r:g},{t:g}] chi2={stat:.3f} dof={dof}", p)


def sampler_equivalence_test(prior, times, replicates: int, seed: int, tag: int = 0) -> CheckRow:
    """Two-sample chi-square on the joint counts at ``times`` from the two samplers."""
    times = tuple(times)

    def make(draw):
        def block(rng, size):
            paths = sample_paths(prior, rng, size)
            patterns = draw(paths, rng)
            return np.stack([patterns.count(s) for s in times], axis=1)
        return block

    a, = run_blocks(make(timechange_batch), replicates, seed, tag)
    b, = run_blocks(make(sequential_batch), replicates, seed, tag + 1)
    base = int(max(a.max(), b.max())) + 1
    code = lambda m: (m * base ** np.arange(m.shape[1])).sum(axis=1)
    stat, p, dof = chisquare_homogeneity(code(a), code(b))
    label = ",".join(f"{s:g}" for s in times)
    return pvalue_row(f"sampler_equivalence N({label}) chi2={stat:.3f} dof={dof}", p)


def interarrival_ks_test(level: float, replicates: int, seed: int, gaps_per_path: int = 10,
                         tag: int = 0) -> CheckRow:
    """KS test that sequential interarrivals under a constant level are Exp(level).

    Only the first ``gaps_per_path`` gaps of each replicate are used, on a
    horizon long enough that they are observed with probability 1 - 1e-12;
    later gaps would be biased by truncation at the horizon.
    """
    k = gaps_per_path
    horizon = (k + 10.0 * np.sqrt(k) + 30.0) / level
    path = IntensityPath.constant(level, horizon)
    paths = PathBatch.from_paths([path])

    def block(rng, size):
        patterns = sequential_batch(paths.repeat(size), rng)
        a = patterns.arrivals[:, :k]
        if a.shape[1] < k or not np.all(np.isfinite(a)):
            raise ConsistencyError("horizon too short for the requested gaps")
        return np.diff(np.concatenate([np.zeros((size, 1)), a], axis=1), axis=1).reshape(-1)

    gaps, = run_blocks(block, replicates, seed, tag)
    stat, p = ks_exponential(gaps, level)
    return pvalue_row(f"interarrival_ks level={level:g} n={len(gaps)} D={stat:.5f}", p)


def increment_independence_test(prior, first, second, replicates: int, seed: int,
                                sampler: str = "timechange", tag: int = 0) -> CheckRow:
    """Chi-square independence of counts on two disjoint intervals (fixed-path priors)."""
    (r1, t1), (r2, t2) = first, second
    if not (t1 <= r2 or t2 <= r1):
        raise DomainError("intervals must be disjoint")
    draw = _sampler(sampler)

    def block(rng, size):
        patterns = draw(sample_paths(prior, rng, size), rng)
        return patterns.count(t1) - patterns.count(r1), patterns.count(t2) - patterns.count(r2)

    x, y = run_blocks(block, replicates, seed, tag)
    stat, p, dof = chisquare_independence(x, y)
    return pvalue_row(f"increment_independence ({r1:g},{t1:g}] vs ({r2:g},{t2:g}] chi2={stat:.3f} dof={dof}", p)
