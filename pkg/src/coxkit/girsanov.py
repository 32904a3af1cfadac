"""Intensity change by the stochastic exponential

    Z_t = exp(-int_0^t (Y_s - 1) X_s ds) * prod_{T_k <= t} Y_{T_k}

and Monte Carlo checks of its three consequences: E[Z_t] = 1, the
Z-reweighted counting process is Cox with intensity Y X, and the closed form
of E[prod_{k<=n} Y_{T_k} 1{N_t = n} | F_{T_{n-j}}].

Weights stay in log space until aggregation. Multipliers Y are functions of
time and of the drawn X path only (rules below).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .checks import CheckReport, CheckRow, band_status, mean_and_se, merge_cells
from .errors import ConfigError, DomainError
from .intensity import IntensityPath, PathBatch, PriorSpec, sample_paths
from .simulation import PatternBatch, PointPattern, poisson_log_pmf, sequential_batch, timechange_batch
from .streams import run_blocks


def _safe_log(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


def _masked_sum(values, mask):
    return np.where(mask, values, 0.0).sum(axis=-1)


# ---------------------------------------------------------------------------
# multiplier rules Y = rule(X)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstantMultiplier:
    """Y = value at all times."""

    value: float

    def __post_init__(self):
        if not (np.isfinite(self.value) and self.value >= 0):
            raise ConfigError("multiplier value must be finite and nonnegative")

    @property
    def name(self) -> str:
        return f"Y={self.value:g}"

    def validate(self, prior: PriorSpec) -> None:
        pass

    def path(self, x: IntensityPath) -> IntensityPath:
        return IntensityPath.constant(self.value, x.horizon)

    def log_at(self, paths: PathBatch, times: np.ndarray) -> np.ndarray:
        return np.full(np.shape(times), float(_safe_log(self.value)))

    def shift(self, paths: PathBatch, r, t) -> np.ndarray:
        """int_r^t (Y - 1) X ds per row."""
        return (self.value - 1.0) * (paths.cumulative(t) - paths.cumulative(r))

    def integral(self, paths: PathBatch, r, t) -> np.ndarray:
        """int_r^t Y X ds per row."""
        return self.value * (paths.cumulative(t) - paths.cumulative(r))


@dataclass(frozen=True)
class InverseMultiplier:
    """Y = scale / X; needs X > 0 everywhere."""

    scale: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise ConfigError("inverse multiplier scale must be positive")

    @property
    def name(self) -> str:
        return "Y=1/X" if self.scale == 1.0 else f"Y={self.scale:g}/X"

    def validate(self, prior: PriorSpec) -> None:
        if not prior.strictly_positive():
            raise ConfigError(f"{self.name} requires a prior with strictly positive levels")

    def path(self, x: IntensityPath) -> IntensityPath:
        if np.any(x.levels <= 0):
            raise DomainError(f"{self.name} undefined where X = 0")
        return IntensityPath(x.breakpoints, self.scale / x.levels, x.horizon)

    def log_at(self, paths: PathBatch, times: np.ndarray) -> np.ndarray:
        t = np.where(np.isfinite(times), times, 0.0)
        return math.log(self.scale) - np.log(paths.level_at(t))

    def shift(self, paths: PathBatch, r, t) -> np.ndarray:
        return self.scale * (np.asarray(t) - np.asarray(r)) - (paths.cumulative(t) - paths.cumulative(r))

    def integral(self, paths: PathBatch, r, t) -> np.ndarray:
        return self.scale * (np.asarray(t, dtype=float) - np.asarray(r, dtype=float)) * np.ones(len(paths))


@dataclass(frozen=True)
class TableMultiplier:
    """Y is a fixed step path, the same for every X."""

    table: IntensityPath

    @property
    def name(self) -> str:
        return "Y=table"

    def validate(self, prior: PriorSpec) -> None:
        if self.table.horizon < prior.horizon:
            raise ConfigError("multiplier table must cover the prior horizon")

    def path(self, x: IntensityPath) -> IntensityPath:
        return self.table if self.table.horizon == x.horizon else self.table.restrict(x.horizon)

    def log_at(self, paths: PathBatch, times: np.ndarray) -> np.ndarray:
        t = np.where(np.isfinite(times), times, 0.0)
        return _safe_log(self.table.level_at(t))

    def _pieces(self, paths: PathBatch, r, t):
        r = np.broadcast_to(np.asarray(r, dtype=float), (len(paths),))
        t = np.broadcast_to(np.asarray(t, dtype=float), (len(paths),))
        edges = np.append(self.table.breakpoints, np.inf)
        for lo, hi, y in zip(edges[:-1], edges[1:], self.table.levels):
            a = np.clip(lo, r, t)
            b = np.clip(hi, r, t)
            yield y, paths.cumulative(b) - paths.cumulative(a)

    def shift(self, paths: PathBatch, r, t) -> np.ndarray:
        return sum((y - 1.0) * d for y, d in self._pieces(paths, r, t))

    def integral(self, paths: PathBatch, r, t) -> np.ndarray:
        return sum(y * d for y, d in self._pieces(paths, r, t))


MultiplierRule = ConstantMultiplier | InverseMultiplier | TableMultiplier


# ---------------------------------------------------------------------------
# pathwise stochastic exponential
# ---------------------------------------------------------------------------


def _compensator_shift(x: IntensityPath, y: IntensityPath, r: float, t: float) -> float:
    """int_r^t (Y - 1) X ds on the merged breakpoint grid."""
    grid = np.union1d(np.union1d(x.breakpoints, y.breakpoints), [r, t])
    grid = grid[(grid >= r) & (grid <= t)]
    if len(grid) < 2:
        return 0.0
    left = grid[:-1]
    return float(np.sum((y.level_at(left) - 1.0) * x.level_at(left) * np.diff(grid)))


def log_increment(x: IntensityPath, y: IntensityPath, pattern: PointPattern, r: float, t: float) -> float:
    """log(Z_t / Z_r) from the compensator on (r, t] and the arrivals in (r, t]."""
    if not 0 <= r <= t <= min(x.horizon, y.horizon, pattern.horizon):
        raise DomainError("need 0 <= r <= t <= common horizon")
    a = pattern.arrivals
    hits = a[(a > r) & (a <= t)]
    jumps = float(np.sum(_safe_log(y.level_at(hits)))) if len(hits) else 0.0
    return -_compensator_shift(x, y, r, t) + jumps


def stochastic_exponential(x: IntensityPath, y: IntensityPath, pattern: PointPattern, t: float) -> float:
    """log Z_t; -inf when Y vanishes at some arrival up to t."""
    return log_increment(x, y, pattern, 0.0, t)


@dataclass(frozen=True)
class WeightedSample:
    path: IntensityPath
    multiplier: IntensityPath
    pattern: PointPattern
    time: float
    log_weight: float

    @property
    def weight(self) -> float:
        return math.exp(self.log_weight)

    def log_weight_at(self, t: float) -> float:
        return stochastic_exponential(self.path, self.multiplier, self.pattern, t)


def weighted_sample(x: IntensityPath, rule: MultiplierRule, pattern: PointPattern, t: float) -> WeightedSample:
    y = rule.path(x)
    return WeightedSample(x, y, pattern, float(t), stochastic_exponential(x, y, pattern, t))


def log_weights(paths: PathBatch, patterns: PatternBatch, rule: MultiplierRule, t) -> np.ndarray:
    """log Z_t for every row of a batch."""
    t = np.broadcast_to(np.asarray(t, dtype=float), (len(paths),))
    a = patterns.arrivals
    mask = a <= t[:, None]
    logy = rule.log_at(paths, a) if a.shape[1] else np.zeros_like(a)
    return -rule.shift(paths, 0.0, t) + _masked_sum(logy, mask)


# ---------------------------------------------------------------------------
# Monte Carlo checks
# ---------------------------------------------------------------------------


def expectation_of_z_test(prior: PriorSpec, rule: MultiplierRule, t: float, replicates: int, seed: int,
                          tag: int = 0) -> CheckReport:
    """E[Z_t] = 1 within 4 standard errors.

    Diagnostics: max Z, sum(Z)/max(Z) and the Kish effective sample size.
    """
    rule.validate(prior)
    if not 0 <= t <= prior.horizon:
        raise DomainError("t must lie within the horizon")

    def block(rng, size):
        paths = sample_paths(prior, rng, size)
        patterns = timechange_batch(paths, rng)
        return np.exp(log_weights(paths, patterns, rule, t))

    z, = run_blocks(block, replicates, seed, tag)
    m, se = mean_and_se(z)
    report = CheckReport("girsanov-expectation")
    report.rows.append(CheckRow(f"E[Z_{t:g}] {rule.name}", m, 1.0, se, band_status(m, 1.0, se)))
    sq = float(np.sum(z * z))
    top = float(z.max())
    report.diagnostics.update(
        max_z=top,
        ess=float(np.sum(z) / top) if top > 0 else 0.0,
        kish_ess=float(np.sum(z) ** 2 / sq) if sq > 0 else 0.0,
        replicates=len(z),
    )
    return report


def reweighted_law_test(prior: PriorSpec, rule: MultiplierRule, intervals, replicates: int, seed: int,
                        n_max: int = 8, tag: int = 0) -> CheckReport:
    """Z-weighted increment laws against Poisson(int_r^t Y X), cell by cell.

    Each interval (r, t] is weighted by Z_t, the conditional mean of Z_horizon
    given F_t, which leaves the target unchanged and lowers the variance.

    Cells n = 0..n_max-1 and the tail n >= n_max are merged left to right
    until each both expects 25 hits under the reweighted law and received 25
    unweighted draws; a cell the sampler barely visits has no usable
    standard error. Each row compares E[Z 1{N_t - N_r in cell}]
    with the mean conditional Poisson probability of the cell, by the paired
    per-replicate difference.
    """
    rule.validate(prior)
    intervals = [(float(r), float(t)) for r, t in intervals]
    for r, t in intervals:
        if not 0 <= r < t <= prior.horizon:
            raise DomainError(f"interval ({r}, {t}] outside [0, horizon]")

    def block(rng, size):
        paths = sample_paths(prior, rng, size)
        patterns = timechange_batch(paths, rng)
        w = np.stack([np.exp(log_weights(paths, patterns, rule, t)) for r, t in intervals], axis=1)
        d = np.stack([patterns.count(t) - patterns.count(r) for r, t in intervals], axis=1)
        m = np.stack([rule.integral(paths, r, t) for r, t in intervals], axis=1)
        return w, d, m

    w, d, m = run_blocks(block, replicates, seed, tag)
    report = CheckReport("girsanov-reweighted")
    n = np.arange(n_max)
    for i, (r, t) in enumerate(intervals):
        pmf = np.exp(poisson_log_pmf(n[None, :], m[:, i : i + 1]))
        probs = np.concatenate([pmf, np.clip(1.0 - pmf.sum(axis=1, keepdims=True), 0.0, None)], axis=1)
        cells = np.minimum(d[:, i], n_max)
        sampled = np.bincount(cells, minlength=n_max + 1)
        for group in merge_cells(np.minimum(probs.sum(axis=0), sampled)):
            lhs = w[:, i] * np.isin(cells, group)
            rhs = probs[:, group].sum(axis=1)
            diff, se = mean_and_se(lhs - rhs)
            label = _cell_label(group, n_max)
            report.rows.append(
                CheckRow(f"Q[N({r:g},{t:g}] {label}] {rule.name}", float(np.mean(lhs)), float(np.mean(rhs)), se,
                         band_status(diff, 0.0, se))
            )
    report.diagnostics.update(max_z=float(w.max()), mean_z=float(np.mean(w)))
    return report


def _cell_label(group, n_max: int) -> str:
    lo, hi = group[0], group[-1]
    if hi >= n_max:
        return f">={lo}"
    return f"={lo}" if lo == hi else f"in{lo}..{hi}"


def induction_identity_test(prior: PriorSpec, rule: MultiplierRule, t: float, n: int, j: int,
                            replicates: int, seed: int, inner: int = 16, tag: int = 0) -> CheckReport:
    """Check E[prod_{k<=n} Y_{T_k} 1{N_t=n} | F_{T_{n-j}}] against its closed form.

    Per outer replicate: draw X and the arrivals up to T_{n-j}, then estimate
    the left side by ``inner`` independent continuations after T_{n-j}; the
    right side is e^{-int X} (int Y X)^j / j! 1{T_{n-j} <= t} prod_{k<=n-j} Y_{T_k}
    with integrals over (T_{n-j}, t].
    """
    rule.validate(prior)
    if not 0 <= j <= n:
        raise DomainError("need 0 <= j <= n")
    if not 0 <= t <= prior.horizon:
        raise DomainError("t must lie within the horizon")
    m = n - j

    def block(rng, size):
        paths = sample_paths(prior, rng, size)
        first = sequential_batch(paths, rng)
        tm = first.arrival(m)
        active = tm <= t
        prefix = first.arrivals[:, :m]
        if prefix.shape[1] < m:
            prefix = np.concatenate([prefix, np.full((size, m - prefix.shape[1]), np.inf)], axis=1)
        log_prefix = _masked_sum(rule.log_at(paths, prefix), np.isfinite(prefix)) if m else np.zeros(size)
        start = np.where(active, tm, 0.0)
        log_rhs = (
            -(paths.cumulative(np.full(size, t)) - paths.cumulative(start))
            + _jlog(rule.integral(paths, start, np.full(size, t)), j)
            - gammaln(j + 1)
            + log_prefix
        )
        rhs = np.where(active, np.exp(log_rhs), 0.0)

        rep = paths.repeat(inner)
        cont = sequential_batch(rep, rng, start=np.repeat(np.where(active, tm, np.inf), inner))
        ok = (cont.count(t) == j) & np.repeat(active, inner)
        head = cont.arrivals[:, :j]
        if j:
            if head.shape[1] < j:
                head = np.concatenate([head, np.full((len(rep), j - head.shape[1]), np.inf)], axis=1)
            log_cont = _masked_sum(rule.log_at(rep, head), np.isfinite(head))
        else:
            log_cont = np.zeros(len(rep))
        vals = np.where(ok, np.exp(np.repeat(log_prefix, inner) + log_cont), 0.0)
        return vals.reshape(size, inner).mean(axis=1), rhs

    lhs, rhs = run_blocks(block, replicates, seed, tag)
    diff, se = mean_and_se(lhs - rhs)
    report = CheckReport("girsanov-induction")
    report.rows.append(
        CheckRow(f"induction n={n} j={j} t={t:g} {rule.name}", float(np.mean(lhs)), float(np.mean(rhs)), se,
                 band_status(diff, 0.0, se))
    )
    report.diagnostics.update(inner=inner, outer=replicates)
    return report


def _jlog(x, j: int):
    """j * log x with 0 * log 0 = 0."""
    if j == 0:
        return np.zeros(np.shape(x))
    return j * _safe_log(x)


def closed_form_induction(x: IntensityPath, y: IntensityPath, t: float, n: int, j: int, prefix=()) -> float:
    """Right side of the induction identity for one path, given T_1..T_{n-j} in ``prefix``."""
    prefix = list(prefix)
    if len(prefix) != n - j:
        raise DomainError("prefix must hold exactly n - j arrival times")
    tm = prefix[-1] if prefix else 0.0
    if tm > t:
        return 0.0
    lam = x.cumulative(t) - x.cumulative(tm)
    yx = _compensator_shift(x, y, tm, t) + lam
    prod = float(np.prod(y.level_at(np.asarray(prefix)))) if prefix else 1.0
    return math.exp(-lam) * yx**j / math.factorial(j) * prod

