"""Piecewise-constant intensity paths, their priors, and exact cumulative integrals.

A path holds level ``levels[j]`` on ``[breakpoints[j], breakpoints[j+1])`` and
the last level on ``[breakpoints[-1], horizon]``. Beyond the horizon the last
level is extended to infinity, which gives tail integrals ``int_r^inf X`` a
definite value (finite exactly when the last level is zero).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import special

from .errors import ConfigError, DomainError
from .streams import exponentials, uniforms


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class IntensityPath:
    """Right-continuous nonnegative step path on ``[0, horizon]``."""

    breakpoints: np.ndarray
    levels: np.ndarray
    horizon: float
    _cum: np.ndarray = field(init=False, repr=False)
    _cum_next: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        b = np.atleast_1d(np.array(self.breakpoints, dtype=float))
        lv = np.atleast_1d(np.array(self.levels, dtype=float))
        h = float(self.horizon)
        if b.ndim != 1 or lv.ndim != 1 or len(b) != len(lv) or len(b) == 0:
            raise DomainError("breakpoints and levels must be nonempty 1-d sequences of equal length")
        if not np.isfinite(h) or h <= 0:
            raise DomainError(f"horizon must be positive and finite, got {h}")
        if b[0] != 0.0:
            raise DomainError("first breakpoint must be 0")
        if np.any(np.diff(b) <= 0):
            raise DomainError("breakpoints must be strictly increasing")
        if b[-1] >= h:
            raise DomainError("every breakpoint must lie before the horizon")
        if not np.all(np.isfinite(lv)) or np.any(lv < 0):
            raise DomainError("levels must be finite and nonnegative")
        lengths = np.diff(np.append(b, h))
        running = np.cumsum(lv * lengths)
        object.__setattr__(self, "breakpoints", _frozen(b))
        object.__setattr__(self, "levels", _frozen(lv))
        object.__setattr__(self, "horizon", h)
        object.__setattr__(self, "_cum", _frozen(np.concatenate(([0.0], running[:-1]))))
        object.__setattr__(self, "_cum_next", _frozen(running))

    @classmethod
    def constant(cls, level: float, horizon: float) -> IntensityPath:
        return cls([0.0], [level], horizon)

    @property
    def total(self) -> float:
        """Cumulative intensity over the whole horizon."""
        return float(self._cum_next[-1])

    @property
    def last_level(self) -> float:
        return float(self.levels[-1])

    def _segment(self, t):
        return np.searchsorted(self.breakpoints, t, side="right") - 1

    def level_at(self, t):
        """X_t, right-continuous; times beyond the horizon see the extended last level."""
        arr = np.asarray(t, dtype=float)
        if np.any(arr < 0) or np.any(np.isnan(arr)):
            raise DomainError("level_at needs t >= 0")
        out = self.levels[self._segment(arr)]
        return float(out) if np.ndim(out) == 0 else out

    def cumulative(self, t):
        """Lambda(t) = int_0^t X_s ds for t in [0, horizon], exact."""
        arr = np.asarray(t, dtype=float)
        if np.any(~(arr >= 0)) or np.any(arr > self.horizon):
            raise DomainError(f"t must lie in [0, {self.horizon}]")
        return self._cumulative_unchecked(arr)

    def _cumulative_unchecked(self, arr):
        seg = self._segment(arr)
        out = self._cum[seg] + self.levels[seg] * (arr - self.breakpoints[seg])
        return float(out) if np.ndim(out) == 0 else out

    def extended_cumulative(self, t):
        """Lambda(t) for any t >= 0, including +inf, under the tail extension."""
        arr = np.asarray(t, dtype=float)
        if np.any(~(arr >= 0)):
            raise DomainError("t must be >= 0")
        with np.errstate(invalid="ignore"):
            out = np.where(np.isinf(arr), np.inf if self.last_level > 0 else self.total,
                           self._cumulative_unchecked(np.where(np.isinf(arr), 0.0, arr)))
        return float(out) if np.ndim(out) == 0 else out

    def integral(self, r, t):
        """int_r^t X_s ds; ``t`` may exceed the horizon or be infinite."""
        return self.extended_cumulative(t) - self.extended_cumulative(r)

    def tail_integral(self, r):
        """int_r^inf X_s ds under the tail extension."""
        if self.last_level > 0:
            return np.inf if np.ndim(r) == 0 else np.full(np.shape(r), np.inf)
        return self.total - self.extended_cumulative(np.minimum(r, self.horizon))

    def inverse_cumulative(self, u):
        """Smallest t with Lambda(t) >= u; None (inf for arrays) when u > Lambda(horizon)."""
        arr = np.asarray(u, dtype=float)
        if np.any(~(arr >= 0)):
            raise DomainError("u must be >= 0")
        seg = np.searchsorted(self._cum_next, arr, side="left")
        beyond = seg >= len(self.levels)
        seg = np.minimum(seg, len(self.levels) - 1)
        lv = self.levels[seg]
        base = self._cum[seg]
        start = self.breakpoints[seg]
        stop = np.append(self.breakpoints[1:], self.horizon)[seg]
        moving = (lv > 0) & (arr > base)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(moving, np.minimum(start + (arr - base) / np.where(moving, lv, 1.0), stop), start)
        if np.ndim(t) == 0:
            return None if bool(beyond) else float(t)
        return np.where(beyond, np.inf, t)

    def restrict(self, horizon: float) -> IntensityPath:
        """The same path on the shorter window ``[0, horizon]``."""
        if not 0 < horizon <= self.horizon:
            raise DomainError("restricted horizon must lie in (0, horizon]")
        keep = self.breakpoints < horizon
        return IntensityPath(self.breakpoints[keep], self.levels[keep], horizon)

    def __eq__(self, other):
        if not isinstance(other, IntensityPath):
            return NotImplemented
        return (
            self.horizon == other.horizon
            and np.array_equal(self.breakpoints, other.breakpoints)
            and np.array_equal(self.levels, other.levels)
        )

    __hash__ = None


def cumulative(path: IntensityPath, t):
    return path.cumulative(t)


def inverse_cumulative(path: IntensityPath, u):
    return path.inverse_cumulative(u)


@dataclass(frozen=True, eq=False)
class PathBatch:
    """R step paths sharing a horizon, padded to a common width.

    Padding columns carry breakpoint ``inf`` and level 0, so they are never
    active at a finite time.
    """

    breakpoints: np.ndarray
    levels: np.ndarray
    horizon: float
    cum: np.ndarray = field(init=False, repr=False)
    cum_next: np.ndarray = field(init=False, repr=False)
    seg_end: np.ndarray = field(init=False, repr=False)
    nseg: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        lv = np.asarray(self.levels, dtype=float)
        h = float(self.horizon)
        valid = np.isfinite(b)
        nseg = valid.sum(axis=1)
        nxt = np.concatenate([b[:, 1:], np.full((len(b), 1), np.inf)], axis=1)
        seg_end = np.where(np.isfinite(nxt), nxt, h)
        lengths = np.where(valid, seg_end - np.where(valid, b, 0.0), 0.0)
        running = np.cumsum(np.where(valid, lv, 0.0) * lengths, axis=1)
        cum = np.concatenate([np.zeros((len(b), 1)), running[:, :-1]], axis=1)
        object.__setattr__(self, "horizon", h)
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "levels", np.where(valid, lv, 0.0))
        object.__setattr__(self, "cum", cum)
        object.__setattr__(self, "cum_next", np.where(valid, running, np.inf))
        object.__setattr__(self, "seg_end", seg_end)
        object.__setattr__(self, "nseg", nseg)

    @classmethod
    def from_paths(cls, paths) -> PathBatch:
        paths = list(paths)
        horizon = paths[0].horizon
        if any(p.horizon != horizon for p in paths):
            raise DomainError("all paths in a batch must share a horizon")
        width = max(len(p.levels) for p in paths)
        b = np.full((len(paths), width), np.inf)
        lv = np.zeros((len(paths), width))
        for i, p in enumerate(paths):
            b[i, : len(p.levels)] = p.breakpoints
            lv[i, : len(p.levels)] = p.levels
        return cls(b, lv, horizon)

    @classmethod
    def constant(cls, levels, horizon: float) -> PathBatch:
        lv = np.asarray(levels, dtype=float).reshape(-1, 1)
        return cls(np.zeros_like(lv), lv, horizon)

    def __len__(self) -> int:
        return self.breakpoints.shape[0]

    @property
    def total(self) -> np.ndarray:
        return self.cum_next[np.arange(len(self)), self.nseg - 1]

    @property
    def last_level(self) -> np.ndarray:
        return self.levels[np.arange(len(self)), self.nseg - 1]

    @property
    def min_level(self) -> np.ndarray:
        return np.where(np.isfinite(self.breakpoints), self.levels, np.inf).min(axis=1)

    def path(self, i: int) -> IntensityPath:
        n = int(self.nseg[i])
        return IntensityPath(self.breakpoints[i, :n], self.levels[i, :n], self.horizon)

    def repeat(self, k: int) -> PathBatch:
        """Each row repeated ``k`` times consecutively."""
        return PathBatch(np.repeat(self.breakpoints, k, axis=0), np.repeat(self.levels, k, axis=0), self.horizon)

    def _prep(self, t):
        t = np.asarray(t, dtype=float)
        if t.ndim == 0:
            t = np.full(len(self), float(t))
        return t

    def _take(self, arr, idx):
        if idx.ndim == 1:
            return np.take_along_axis(arr, idx[:, None], axis=1)[:, 0]
        return np.take_along_axis(arr, idx, axis=1)

    def _compare_count(self, arr, t, strict: bool):
        if t.ndim == 1:
            a, q = arr, t[:, None]
        else:
            a, q = arr[:, None, :], t[..., None]
        return (a < q).sum(axis=-1) if strict else (a <= q).sum(axis=-1)

    def segment(self, t) -> np.ndarray:
        t = self._prep(t)
        return np.maximum(self._compare_count(self.breakpoints, t, strict=False) - 1, 0)

    def level_at(self, t) -> np.ndarray:
        t = self._prep(t)
        return self._take(self.levels, self.segment(t))

    def cumulative(self, t) -> np.ndarray:
        """Lambda per row at ``t`` (shape (R,) or (R, K)); inf-valued t maps to the tail limit."""
        t = self._prep(t)
        seg = self.segment(t)
        finite_t = np.where(np.isinf(t), 0.0, t)
        out = self._take(self.cum, seg) + self._take(self.levels, seg) * (finite_t - self._take(self.breakpoints, seg))
        if np.any(np.isinf(t)):
            last, total = self.last_level, self.total
            if t.ndim == 2:
                last, total = last[:, None], total[:, None]
            out = np.where(np.isinf(t), np.where(last > 0, np.inf, total), out)
        return out

    def inverse_cumulative(self, u) -> np.ndarray:
        """Smallest t with Lambda(t) >= u per row; inf where u exceeds Lambda(horizon)."""
        u = self._prep(u)
        seg = self._compare_count(self.cum_next, u, strict=True)
        nseg = self.nseg if u.ndim == 1 else self.nseg[:, None]
        beyond = seg >= nseg
        seg = np.minimum(seg, nseg - 1)
        lv = self._take(self.levels, seg)
        base = self._take(self.cum, seg)
        start = self._take(self.breakpoints, seg)
        stop = self._take(self.seg_end, seg)
        moving = (lv > 0) & (u > base)
        with np.errstate(invalid="ignore"):
            t = np.where(moving, np.minimum(start + (u - base) / np.where(moving, lv, 1.0), stop), start)
        return np.where(beyond | np.isinf(u), np.inf, t)


# ---------------------------------------------------------------------------
# distributions for random levels and jumps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PointMass:
    value: float

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ConfigError("fixed value must be finite")

    def sample(self, rng, size):
        return np.full(size, float(self.value))

    def atoms(self):
        return np.array([float(self.value)]), np.array([1.0])

    @property
    def lower_bound(self) -> float:
        return float(self.value)

    def mgf_finite(self, alpha: float) -> bool:
        return True


@dataclass(frozen=True)
class DiscreteLaw:
    values: tuple
    probs: tuple

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        if v.ndim != 1 or v.shape != p.shape or len(v) == 0:
            raise ConfigError("discrete table needs equally many values and probabilities")
        if not np.all(np.isfinite(v)) or np.any(p < 0) or not np.isclose(p.sum(), 1.0, atol=1e-12):
            raise ConfigError("discrete table probabilities must be nonnegative and sum to 1")
        object.__setattr__(self, "values", tuple(float(x) for x in v))
        object.__setattr__(self, "probs", tuple(float(x) for x in p))

    def sample(self, rng, size):
        cdf = np.cumsum(self.probs)
        cdf[-1] = 1.0
        idx = np.searchsorted(cdf, uniforms(rng, size), side="right")
        return np.asarray(self.values)[np.minimum(idx, len(cdf) - 1)]

    def atoms(self):
        p = np.asarray(self.probs)
        keep = p > 0
        return np.asarray(self.values)[keep], p[keep]

    @property
    def lower_bound(self) -> float:
        return float(min(v for v, p in zip(self.values, self.probs) if p > 0))

    def mgf_finite(self, alpha: float) -> bool:
        return True


@dataclass(frozen=True)
class ExponentialLaw:
    mean: float

    def __post_init__(self):
        if not (np.isfinite(self.mean) and self.mean > 0):
            raise ConfigError("exponential mean must be positive")

    def sample(self, rng, size):
        return exponentials(rng, size, self.mean)

    def atoms(self):
        return None

    def ppf(self, q):
        return -self.mean * np.log1p(-np.asarray(q, dtype=float))

    def cdf(self, x):
        return -np.expm1(-np.maximum(np.asarray(x, dtype=float), 0.0) / self.mean)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, np.exp(-np.maximum(x, 0.0) / self.mean) / self.mean, 0.0)

    @property
    def lower_bound(self) -> float:
        return 0.0

    def mgf_finite(self, alpha: float) -> bool:
        return alpha * self.mean < 1.0


@dataclass(frozen=True)
class UniformLaw:
    low: float
    high: float

    def __post_init__(self):
        if not (np.isfinite(self.low) and np.isfinite(self.high) and self.low < self.high):
            raise ConfigError("uniform law needs finite low < high")

    def sample(self, rng, size):
        return self.low + (self.high - self.low) * uniforms(rng, size)

    def atoms(self):
        return None

    def ppf(self, q):
        return self.low + (self.high - self.low) * np.asarray(q)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= self.low) & (x <= self.high), 1.0 / (self.high - self.low), 0.0)

    def cdf(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.low) / (self.high - self.low), 0.0, 1.0)

    @property
    def lower_bound(self) -> float:
        return float(self.low)

    def mgf_finite(self, alpha: float) -> bool:
        return True


@dataclass(frozen=True)
class GammaLaw:
    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ConfigError("gamma law needs positive shape and scale")

    def sample(self, rng, size):
        return self.scale * special.gammaincinv(self.shape, uniforms(rng, size))

    def atoms(self):
        return None

    def ppf(self, q):
        return self.scale * special.gammaincinv(self.shape, np.asarray(q))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            logp = (self.shape - 1) * np.log(x) - x / self.scale - special.gammaln(self.shape) - self.shape * np.log(self.scale)
        return np.where(x > 0, np.exp(logp), 0.0)

    def cdf(self, x):
        return special.gammainc(self.shape, np.maximum(np.asarray(x, dtype=float), 0.0) / self.scale)

    @property
    def lower_bound(self) -> float:
        return 0.0

    def mgf_finite(self, alpha: float) -> bool:
        return alpha * self.scale < 1.0


Law = Union[PointMass, DiscreteLaw, ExponentialLaw, UniformLaw, GammaLaw]
JUMP_LAWS = (PointMass, DiscreteLaw, ExponentialLaw)


# ---------------------------------------------------------------------------
# priors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FixedPrior:
    """The intensity path is known at time 0."""

    path: IntensityPath

    @property
    def horizon(self) -> float:
        return self.path.horizon

    def strictly_positive(self) -> bool:
        return bool(np.all(self.path.levels > 0))


@dataclass(frozen=True)
class RandomLevelPrior:
    """X is constant in time with a random level drawn from ``law``."""

    law: Law
    horizon: float

    def __post_init__(self):
        if not (np.isfinite(self.horizon) and self.horizon > 0):
            raise ConfigError("horizon must be positive")
        if self.law.lower_bound < 0:
            raise ConfigError("random level must be nonnegative")

    def strictly_positive(self) -> bool:
        if isinstance(self.law, (PointMass, DiscreteLaw)):
            return self.law.lower_bound > 0
        # continuous laws put zero mass on the boundary point
        return self.law.lower_bound >= 0


@dataclass(frozen=True)
class CompoundPoissonPrior:
    """X_t = x0 + sum of the jumps of an independent Poisson process up to t."""

    x0: float
    jump_rate: float
    jump_law: Law
    horizon: float

    def __post_init__(self):
        if not (np.isfinite(self.x0) and self.x0 > 0):
            raise ConfigError("x0 must be positive")
        if not (np.isfinite(self.jump_rate) and self.jump_rate > 0):
            raise ConfigError("jump_rate must be positive")
        if not isinstance(self.jump_law, JUMP_LAWS):
            raise ConfigError("jump_law must be exponential, fixed or a discrete table")
        if not isinstance(self.jump_law, ExponentialLaw) and self.jump_law.lower_bound <= 0:
            raise ConfigError("jumps must be strictly positive")
        if not (np.isfinite(self.horizon) and self.horizon > 0):
            raise ConfigError("horizon must be positive")

    def strictly_positive(self) -> bool:
        return True


PriorSpec = Union[FixedPrior, RandomLevelPrior, CompoundPoissonPrior]


def unit_rate_epochs(rng: np.random.Generator, totals) -> np.ndarray:
    """Arrival epochs of unit-rate Poisson processes, row i truncated at ``totals[i]``.

    Returns an (R, K) array of increasing partial sums of Exp(1) draws, padded
    with inf. Draws proceed in column chunks until every row has passed its
    total, so consumption depends only on ``totals``.
    """
    totals = np.asarray(totals, dtype=float)
    n = len(totals)
    if n == 0:
        return np.empty((0, 0))
    top = float(totals.max())
    if not np.isfinite(top):
        raise DomainError("cumulative intensity must be finite")
    width = max(8, int(np.ceil(top + 4.0 * np.sqrt(top) + 8)))
    chunks = []
    acc = np.zeros(n)
    while True:
        c = acc[:, None] + np.cumsum(exponentials(rng, (n, width)), axis=1)
        chunks.append(c)
        acc = c[:, -1]
        if np.all(acc > totals):
            break
    u = np.concatenate(chunks, axis=1)
    u[u > totals[:, None]] = np.inf
    keep = int(np.isfinite(u).sum(axis=1).max())
    return u[:, :keep]


def sample_paths(prior: PriorSpec, rng: np.random.Generator, size: int) -> PathBatch:
    """Draw ``size`` intensity paths from the prior."""
    if isinstance(prior, FixedPrior):
        p = prior.path
        return PathBatch(
            np.broadcast_to(p.breakpoints, (size, len(p.levels))),
            np.broadcast_to(p.levels, (size, len(p.levels))),
            p.horizon,
        )
    if isinstance(prior, RandomLevelPrior):
        return PathBatch.constant(prior.law.sample(rng, size), prior.horizon)
    if isinstance(prior, CompoundPoissonPrior):
        epochs = unit_rate_epochs(rng, np.full(size, prior.jump_rate * prior.horizon))
        times = epochs / prior.jump_rate
        finite = np.isfinite(times)
        jumps = np.where(finite, prior.jump_law.sample(rng, times.shape), 0.0)
        b = np.concatenate([np.zeros((size, 1)), times], axis=1)
        lv = prior.x0 + np.concatenate([np.zeros((size, 1)), np.cumsum(jumps, axis=1)], axis=1)
        return PathBatch(b, lv, prior.horizon)
    raise ConfigError(f"unsupported prior {type(prior).__name__}")


def sample_prior(prior: PriorSpec, rng: np.random.Generator) -> IntensityPath:
    """One intensity path from the prior; deterministic given the generator state."""
    if isinstance(prior, FixedPrior):
        return prior.path
    return sample_paths(prior, rng, 1).path(0)


def prior_horizon(prior: PriorSpec) -> float:
    return float(prior.horizon)
