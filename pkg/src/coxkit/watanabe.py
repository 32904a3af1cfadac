"""Executable forms of the martingale characterisation of Cox processes.

* the compensated process N_t - Lambda(t) has zero-mean increments on every
  event known at the start of the increment, also when stopped at T_n;
* for nonnegative predictable phi, E[sum_k phi(T_k)] = E[int phi X ds].

Conditioning events and predictable integrands only ever see the pattern
truncated at the time they are allowed to know, so they cannot look ahead.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .checks import INCONCLUSIVE, CheckReport, CheckRow, band_status, mean_and_se
from .errors import DomainError
from .intensity import IntensityPath, PathBatch, PriorSpec, sample_paths
from .simulation import PatternBatch, PointPattern, timechange_batch
from .streams import run_blocks


@dataclass(frozen=True)
class CompensatedPath:
    """t -> N_t - Lambda(t) for one pattern and its intensity path."""

    pattern: PointPattern
    path: IntensityPath

    def __call__(self, t):
        return self.pattern.count(t) - self.path.cumulative(t)

    def left_limit(self, t):
        return self.pattern.count_before(t) - self.path.cumulative(t)

    def jump(self, t) -> int:
        """Size of the jump at t. Lambda is continuous, so only N contributes."""
        return int(self.pattern.count(t) - self.pattern.count_before(t))

    def jumps_at_arrivals(self) -> np.ndarray:
        a = self.pattern.arrivals
        return self.pattern.count(a) - self.pattern.count_before(a)


def compensate(pattern: PointPattern, path: IntensityPath) -> CompensatedPath:
    if pattern.horizon != path.horizon:
        raise DomainError(f"pattern horizon {pattern.horizon} differs from path horizon {path.horizon}")
    return CompensatedPath(pattern, path)


# ---------------------------------------------------------------------------
# conditioning events: functions of (paths, pattern truncated at r, r)
# ---------------------------------------------------------------------------

EventFn = Callable[[PathBatch, PatternBatch, float], np.ndarray]


@dataclass(frozen=True)
class ConditioningEvent:
    name: str
    indicator: EventFn


def whole_space() -> ConditioningEvent:
    return ConditioningEvent("all", lambda paths, past, r: np.ones(len(paths), dtype=bool))


def no_arrivals_by_r() -> ConditioningEvent:
    return ConditioningEvent("N_r=0", lambda paths, past, r: past.count(r) == 0)


def count_at_r(k: int) -> ConditioningEvent:
    return ConditioningEvent(f"N_r={k}", lambda paths, past, r: past.count(r) == k)


def count_at_least(k: int) -> ConditioningEvent:
    return ConditioningEvent(f"N_r>={k}", lambda paths, past, r: past.count(r) >= k)


def level_above(threshold: float, at: float = 0.0) -> ConditioningEvent:
    """{X_at > threshold}; X is known at time 0, so any ``at`` is admissible."""
    return ConditioningEvent(f"X_{at:g}>{threshold:g}", lambda paths, past, r: paths.level_at(at) > threshold)


def level_above_and_quiet(threshold: float) -> ConditioningEvent:
    return ConditioningEvent(
        f"X_0>{threshold:g}&N_r=0",
        lambda paths, past, r: (paths.level_at(0.0) > threshold) & (past.count(r) == 0),
    )


def _compensated(paths: PathBatch, patterns: PatternBatch, t: np.ndarray) -> np.ndarray:
    return patterns.count(t) - paths.cumulative(t)


def martingale_test(
    prior: PriorSpec,
    r: float,
    t: float,
    events,
    replicates: int,
    seed: int,
    stop_at=(),
    tag: int = 0,
) -> CheckReport:
    """Monte Carlo check of E[(Ntilde_t - Ntilde_r) 1_A] = 0 for each event A.

    ``stop_at`` lists arrival indices n for the localised variant with both
    times replaced by their minimum with T_n. An event with no hits is
    reported inconclusive.
    """
    horizon = prior.horizon
    if not 0 <= r < t <= horizon:
        raise DomainError("need 0 <= r < t <= horizon")
    events = list(events)
    stops = [None] + [int(n) for n in stop_at]

    def block(rng, size):
        paths = sample_paths(prior, rng, size)
        patterns = timechange_batch(paths, rng)
        past = patterns.truncate(r)
        hits = np.stack([np.asarray(e.indicator(paths, past, r), dtype=bool) for e in events], axis=1)
        incs = []
        for n in stops:
            if n is None:
                tt, rr = np.full(size, t), np.full(size, r)
            else:
                tn = patterns.arrival(n)
                tt, rr = np.minimum(t, tn), np.minimum(r, tn)
            incs.append(_compensated(paths, patterns, tt) - _compensated(paths, patterns, rr))
        return hits, np.stack(incs, axis=1)

    hits, incs = run_blocks(block, replicates, seed, tag)
    report = CheckReport("watanabe-martingale")
    for si, n in enumerate(stops):
        suffix = "" if n is None else f"|stopped T_{n}"
        for ei, event in enumerate(events):
            name = f"martingale ({r:g},{t:g}] A={event.name}{suffix}"
            mask = hits[:, ei]
            if not mask.any():
                report.rows.append(CheckRow(name, float("nan"), 0.0, float("nan"), INCONCLUSIVE))
                continue
            est, se = mean_and_se(incs[:, si] * mask)
            report.rows.append(CheckRow(name, est, 0.0, se, band_status(est, 0.0, se)))
        report.diagnostics[f"hits{suffix}"] = hits.sum(axis=0).tolist()
    return report


# ---------------------------------------------------------------------------
# predictable integrands
# ---------------------------------------------------------------------------

CellRule = Callable[[int, PathBatch, PatternBatch, float], np.ndarray]


@dataclass(frozen=True)
class SimplePredictableProcess:
    """phi = v_j on (s_{j-1}, s_j], with v_j computed from the path and the pattern up to s_{j-1}."""

    name: str
    grid: tuple
    rule: CellRule

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        if len(g) < 2 or g[0] != 0.0 or np.any(np.diff(g) <= 0):
            raise DomainError("grid must start at 0 and increase strictly")
        object.__setattr__(self, "grid", tuple(float(x) for x in g))

    def cell_values(self, paths: PathBatch, patterns: PatternBatch) -> np.ndarray:
        """(R, m) cell values, each computed from information up to the cell's left end."""
        out = []
        for j in range(1, len(self.grid)):
            left = self.grid[j - 1]
            v = np.asarray(self.rule(j, paths, patterns.truncate(left), left), dtype=float)
            v = np.broadcast_to(v, (len(paths),))
            if np.any(v < 0):
                raise DomainError(f"predictable process {self.name} took a negative value")
            out.append(v)
        return np.stack(out, axis=1)


def constant_phi(value: float, grid) -> SimplePredictableProcess:
    return SimplePredictableProcess(f"const{value:g}", tuple(grid), lambda j, paths, past, s: np.full(len(paths), value))


def no_arrival_yet_phi(grid) -> SimplePredictableProcess:
    return SimplePredictableProcess(
        "1{N_s-=0}", tuple(grid), lambda j, paths, past, s: (past.count(s) == 0).astype(float)
    )


def level_damped_phi(grid) -> SimplePredictableProcess:
    """v_j = X_{s_{j-1}} / (1 + N_{s_{j-1}}): uses both the path and the past pattern."""
    return SimplePredictableProcess(
        "X/(1+N)", tuple(grid), lambda j, paths, past, s: paths.level_at(s) / (1.0 + past.count(s))
    )


def predictable_integral_test(
    prior: PriorSpec,
    phi: SimplePredictableProcess,
    replicates: int,
    seed: int,
    tag: int = 0,
) -> CheckReport:
    """Paired check of E[sum_k phi(T_k)] = E[int phi X ds] on [0, grid end]."""
    grid = np.asarray(phi.grid)
    if grid[-1] > prior.horizon:
        raise DomainError("predictable grid extends past the horizon")

    def block(rng, size):
        paths = sample_paths(prior, rng, size)
        patterns = timechange_batch(paths, rng)
        values = phi.cell_values(paths, patterns)
        lam = np.stack([paths.cumulative(np.full(size, s)) for s in grid], axis=1)
        rhs = (values * np.diff(lam, axis=1)).sum(axis=1)
        cnt = np.stack([patterns.count(s) for s in grid], axis=1)
        lhs = (values * np.diff(cnt, axis=1)).sum(axis=1)
        return lhs, rhs

    lhs, rhs = run_blocks(block, replicates, seed, tag)
    report = CheckReport("watanabe-predictable")
    m_l, se_l = mean_and_se(lhs)
    m_r, se_r = mean_and_se(rhs)
    diff, se_d = mean_and_se(lhs - rhs)
    report.rows.append(CheckRow(f"predictable phi={phi.name} paired", diff, 0.0, se_d, band_status(diff, 0.0, se_d)))
    report.diagnostics.update(lhs_mean=m_l, lhs_se=se_l, rhs_mean=m_r, rhs_se=se_r)
    return report

