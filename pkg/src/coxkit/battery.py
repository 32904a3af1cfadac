"""The verification battery: one function per acceptance criterion.

Each function takes the master seed (and a replicate count for the Monte
Carlo criteria) and returns a :class:`CheckReport`. Every check draws from
its own stream, tagged by the check's name, so adding or removing a check
never changes what another one sees. ``verify-all`` and the acceptance tests
both call these functions.
"""

from __future__ import annotations

import math

import numpy as np

from . import filtering as flt
from .checks import CheckReport, CheckRow, band_status, tolerance_row
from .densities import chou_meyer_intensity, psi
from .girsanov import (
    ConstantMultiplier,
    InverseMultiplier,
    TableMultiplier,
    expectation_of_z_test,
    induction_identity_test,
    reweighted_law_test,
)
from .intensity import (
    CompoundPoissonPrior,
    DiscreteLaw,
    FixedPrior,
    GammaLaw,
    IntensityPath,
    RandomLevelPrior,
    UniformLaw,
    sample_prior,
)
from .simulation import (
    PointPattern,
    count_law_test,
    increment_independence_test,
    interarrival_ks_test,
    sample_cox_sequential,
    sample_cox_timechange,
    sampler_equivalence_test,
)
from .streams import stream_tag, substream
from .watanabe import (
    count_at_least,
    count_at_r,
    constant_phi,
    level_above,
    level_above_and_quiet,
    level_damped_phi,
    martingale_test,
    no_arrival_yet_phi,
    no_arrivals_by_r,
    predictable_integral_test,
    whole_space,
)

# ---------------------------------------------------------------------------
# shared battery priors
# ---------------------------------------------------------------------------

UNIT = FixedPrior(IntensityPath.constant(1.0, 1.0))
PIECEWISE = FixedPrior(IntensityPath(np.array([0.0, 0.4, 1.0, 1.5]), np.array([2.0, 0.0, 3.5, 1.0]), 2.0))
SILENT = FixedPrior(IntensityPath.constant(0.0, 1.0))
TWO_POINT = RandomLevelPrior(DiscreteLaw((1.0, 2.0), (0.5, 0.5)), 1.0)
GAMMA_LEVEL = RandomLevelPrior(GammaLaw(2.0, 0.75), 2.0)
COMPOUND = CompoundPoissonPrior(1.0, 1.0, DiscreteLaw((0.5, 1.0), (0.5, 0.5)), 2.0)
COMPOUND_EXAMPLE = CompoundPoissonPrior(1.0, 1.0, DiscreteLaw((0.5, 1.5), (0.5, 0.5)), 2.0)

CRITERIA = (
    "normalization",
    "recurrence",
    "chou-meyer",
    "sampler-law",
    "watanabe",
    "girsanov",
    "filter-exact",
    "filter-oracle",
)


def _rng(seed: int, name: str) -> np.random.Generator:
    return substream(seed, 0, stream_tag(name))


def _random_path(rng: np.random.Generator, zero_prob: float = 0.2) -> IntensityPath:
    """A random step path with 1-5 pieces, some levels zero, horizon in [0.5, 3]."""
    horizon = float(rng.uniform(0.5, 3.0))
    pieces = int(rng.integers(1, 6))
    inner = np.sort(rng.uniform(0.0, horizon, pieces - 1))
    breaks = np.unique(np.concatenate([[0.0], inner]))
    levels = rng.uniform(0.0, 3.0, len(breaks))
    levels[rng.uniform(size=len(breaks)) < zero_prob] = 0.0
    return IntensityPath(breaks, levels, horizon)


def _rel_err(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


# ---------------------------------------------------------------------------
# 1-3: deterministic identities
# ---------------------------------------------------------------------------


def normalization(seed: int, configs: int = 24) -> CheckReport:
    """Arrival-time density plus atom at infinity integrates to one (closed form)."""
    rng = _rng(seed, "normalization")
    report = CheckReport("normalization")
    for i in range(configs):
        path = _random_path(rng)
        n = int(rng.integers(0, 6))
        observed = int(rng.integers(0, n + 1))
        r = float(rng.uniform(0.0, path.horizon))
        mass = psi(path, n, r, observed).total_mass()
        report.rows.append(tolerance_row(f"normalization #{i:02d} n={n} N_r={observed} r={r:.3f}", mass, 1.0, 1e-9))
    return report


def recurrence(seed: int, probes: int = 10_000) -> CheckReport:
    """psi^{n-1}(u) * int_r^u X = (n - N_r) psi^n(u), worst relative error over random probes."""
    rng = _rng(seed, "recurrence")
    worst = 0.0
    for _ in range(probes):
        path = _random_path(rng)
        n = int(rng.integers(1, 8))
        observed = int(rng.integers(0, n + 1))
        r = float(rng.uniform(0.0, path.horizon))
        u = float(rng.uniform(r, path.horizon))
        lhs = psi(path, n - 1, r, observed).eval(u) * float(path.integral(r, u))
        rhs = (n - observed) * psi(path, n, r, observed).eval(u)
        worst = max(worst, _rel_err(lhs, rhs))
    report = CheckReport("recurrence")
    report.rows.append(tolerance_row(f"recurrence max rel err over {probes} probes", worst, 0.0, 1e-12))
    return report


def chou_meyer(seed: int, probes: int = 10_000) -> CheckReport:
    """Intensity assembled from interarrival kernels equals X_t, worst relative error."""
    rng = _rng(seed, "chou-meyer")
    worst = 0.0
    for i in range(probes):
        path = _random_path(rng)
        sampler = sample_cox_timechange if i % 2 == 0 else sample_cox_sequential
        pattern = sampler(path, rng)
        t = float(rng.uniform(0.0, path.horizon))
        worst = max(worst, _rel_err(chou_meyer_intensity(path, pattern, t), float(path.level_at(t))))
    report = CheckReport("chou-meyer")
    report.rows.append(tolerance_row(f"chou-meyer max rel err over {probes} probes", worst, 0.0, 1e-10))
    return report


# ---------------------------------------------------------------------------
# 4: sampler law
# ---------------------------------------------------------------------------


def sampler_law(seed: int, replicates: int) -> CheckReport:
    report = CheckReport("sampler-law")
    cases = [
        ("constant", UNIT, 0.0, 1.0),
        ("piecewise", PIECEWISE, 0.0, 2.0),
        ("piecewise", PIECEWISE, 0.3, 1.2),
        ("random-level", TWO_POINT, 0.0, 1.0),
        ("random-level", GAMMA_LEVEL, 0.5, 2.0),
        ("compound-poisson", COMPOUND, 0.0, 2.0),
        ("compound-poisson", COMPOUND, 1.0, 2.0),
    ]
    for label, prior, r, t in cases:
        for sampler in ("timechange", "sequential"):
            name = f"count-law {label} ({r:g},{t:g}] {sampler}"
            row = count_law_test(prior, r, t, replicates, seed, sampler, tag=stream_tag(name))
            report.rows.append(CheckRow(f"{label} {row.name}", row.estimate, row.target, row.std_error, row.status))
    for label, prior, times in [("piecewise", PIECEWISE, (0.5, 1.2, 2.0)), ("compound-poisson", COMPOUND, (0.7, 2.0))]:
        row = sampler_equivalence_test(prior, times, replicates, seed, tag=stream_tag(f"equivalence {label}"))
        report.rows.append(CheckRow(f"{label} {row.name}", row.estimate, row.target, row.std_error, row.status))
    report.rows.append(interarrival_ks_test(1.5, replicates // 10, seed, tag=stream_tag("interarrival")))
    report.rows.append(
        increment_independence_test(PIECEWISE, (0.0, 0.7), (0.9, 2.0), replicates, seed, tag=stream_tag("independence"))
    )
    return report


# ---------------------------------------------------------------------------
# 5: martingale characterisation
# ---------------------------------------------------------------------------


def watanabe(seed: int, replicates: int) -> CheckReport:
    report = CheckReport("watanabe")
    runs = [
        ("unit", UNIT, 0.0, 1.0, [whole_space()], (1, 2)),
        ("unit", UNIT, 0.4, 1.0, [whole_space(), no_arrivals_by_r(), count_at_least(1)], ()),
        ("piecewise", PIECEWISE, 0.3, 1.6, [whole_space(), count_at_r(0), count_at_least(1)], (1,)),
        ("two-point", TWO_POINT, 0.5, 1.0, [whole_space(), no_arrivals_by_r(), level_above(1.5), level_above_and_quiet(1.5)], (1,)),
        ("compound", COMPOUND, 0.8, 2.0, [whole_space(), count_at_r(1), count_at_least(2), level_above(1.2, at=0.8)], (1, 3)),
        ("silent", SILENT, 0.0, 1.0, [whole_space()], ()),
    ]
    for label, prior, r, t, events, stops in runs:
        sub = martingale_test(prior, r, t, events, replicates, seed, stop_at=stops,
                              tag=stream_tag(f"martingale {label} {r} {t}"))
        for row in sub.rows:
            report.rows.append(CheckRow(f"{label} {row.name}", row.estimate, row.target, row.std_error, row.status))
    grid = (0.0, 0.25, 0.5, 1.0, 1.5, 2.0)
    for label, prior, phi in [
        ("compound", COMPOUND, level_damped_phi(grid)),
        ("compound", COMPOUND, no_arrival_yet_phi(grid)),
        ("piecewise", PIECEWISE, constant_phi(2.0, grid)),
        ("two-point", TWO_POINT, level_damped_phi((0.0, 0.3, 0.6, 1.0))),
    ]:
        sub = predictable_integral_test(prior, phi, replicates, seed, tag=stream_tag(f"predictable {label} {phi.name}"))
        for row in sub.rows:
            report.rows.append(CheckRow(f"{label} {row.name}", row.estimate, row.target, row.std_error, row.status))
    return report


# ---------------------------------------------------------------------------
# 6: change of intensity
# ---------------------------------------------------------------------------

TABLE_UNIT = TableMultiplier(IntensityPath(np.array([0.0, 0.5]), np.array([0.5, 1.5]), 1.0))
TABLE_COMPOUND = TableMultiplier(IntensityPath(np.array([0.0, 1.0]), np.array([0.5, 1.5]), 2.0))


def girsanov(seed: int, replicates: int, induction_outer: int | None = None, inner: int = 16) -> CheckReport:
    report = CheckReport("girsanov")

    def add(label, sub):
        for row in sub.rows:
            report.rows.append(CheckRow(f"{label} {row.name}", row.estimate, row.target, row.std_error, row.status))

    expectations = [
        ("unit", UNIT, ConstantMultiplier(1.0), 1.0),
        ("unit", UNIT, ConstantMultiplier(2.0), 1.0),
        ("unit", UNIT, TABLE_UNIT, 1.0),
        ("piecewise", PIECEWISE, ConstantMultiplier(0.5), 2.0),
        ("two-point", TWO_POINT, ConstantMultiplier(2.0), 1.0),
        ("two-point", TWO_POINT, InverseMultiplier(), 1.0),
        ("compound", COMPOUND, InverseMultiplier(), 1.0),
        ("compound", COMPOUND, InverseMultiplier(), 2.0),
        ("compound", COMPOUND, ConstantMultiplier(2.0), 2.0),
        ("compound", COMPOUND, TABLE_COMPOUND, 2.0),
    ]
    for label, prior, rule, t in expectations:
        add(label, expectation_of_z_test(prior, rule, t, replicates, seed,
                                         tag=stream_tag(f"expectation {label} {rule.name} {t}")))

    laws = [
        ("unit", UNIT, ConstantMultiplier(2.0), [(0.0, 1.0)]),
        ("unit", UNIT, ConstantMultiplier(1.0), [(0.0, 1.0), (0.5, 1.0)]),
        ("two-point", TWO_POINT, InverseMultiplier(), [(0.0, 1.0), (0.25, 0.75)]),
        ("compound", COMPOUND, InverseMultiplier(), [(0.0, 1.0), (0.5, 2.0)]),
        ("compound", COMPOUND, ConstantMultiplier(0.5), [(0.0, 2.0)]),
        ("compound", COMPOUND, TABLE_COMPOUND, [(0.0, 1.0), (0.5, 2.0)]),
    ]
    for label, prior, rule, intervals in laws:
        add(label, reweighted_law_test(prior, rule, intervals, replicates, seed,
                                       tag=stream_tag(f"reweighted {label} {rule.name}")))

    outer = induction_outer or max(1, replicates // 5)
    add("unit", induction_identity_test(UNIT, ConstantMultiplier(2.0), 1.0, 2, 2, outer, seed, inner,
                                        tag=stream_tag("induction unit")))
    for n in range(4):
        for j in range(n + 1):
            add("compound", induction_identity_test(COMPOUND, InverseMultiplier(), 1.5, n, j, outer, seed, inner,
                                                    tag=stream_tag(f"induction compound {n} {j}")))
    return report


# ---------------------------------------------------------------------------
# 7-8: filtering
# ---------------------------------------------------------------------------

NO_ARRIVAL_TARGET = (math.exp(-1) + 2 * math.exp(-2)) / (math.exp(-1) + math.exp(-2))
ONE_ARRIVAL_TARGET = (math.exp(-1) + 4 * math.exp(-2)) / (math.exp(-1) + 2 * math.exp(-2))


def _filter_row(name: str, est: flt.FilterEstimate, target: float) -> CheckRow:
    if est.std_error == 0.0:
        return tolerance_row(name, est.value, target, 1e-9 * max(1.0, abs(target)))
    return CheckRow(name, est.value, target, est.std_error, band_status(est.value, target, est.std_error))


def filter_exact(seed: int, replicates: int) -> CheckReport:
    report = CheckReport("filter-exact")
    for label, obs, target in [
        ("no arrival", PointPattern([], 1.0), NO_ARRIVAL_TARGET),
        ("one arrival", PointPattern([0.5], 1.0), ONE_ARRIVAL_TARGET),
    ]:
        est = flt.ks_filter(TWO_POINT, obs, flt.identity(), 1.0, replicates, seed, tag=stream_tag(f"exact {label}"))
        report.rows.append(_filter_row(f"two-point filter {label}", est, target))
        oracle = flt.grid_oracle(TWO_POINT, obs, flt.identity(), 1.0)
        report.rows.append(tolerance_row(f"two-point oracle {label}", oracle, target, 1e-12))
    fixed = FixedPrior(IntensityPath(np.array([0.0, 0.5]), np.array([1.0, 3.0]), 1.0))
    est = flt.fn_intensity(fixed, PointPattern([0.2, 0.7], 1.0), 0.8, 1000, seed, tag=stream_tag("exact point"))
    report.rows.append(tolerance_row("point prior filter", est.value, 3.0, 0.0))
    return report


def _random_prior(rng: np.random.Generator, kind: int):
    horizon = float(rng.uniform(1.0, 2.0))
    if kind == 0:
        atoms = np.sort(rng.uniform(0.3, 3.0, int(rng.integers(2, 5))))
        probs = rng.dirichlet(np.ones(len(atoms)))
        return RandomLevelPrior(DiscreteLaw(tuple(atoms), tuple(probs)), horizon), float(np.median(atoms))
    if kind == 1:
        low = float(rng.uniform(0.2, 1.0))
        high = low + float(rng.uniform(0.5, 2.5))
        return RandomLevelPrior(UniformLaw(low, high), horizon), 0.5 * (low + high)
    if kind == 2:
        shape, scale = float(rng.uniform(1.5, 4.0)), float(rng.uniform(0.3, 0.8))
        return RandomLevelPrior(GammaLaw(shape, scale), horizon), shape * scale
    atoms = np.sort(rng.uniform(0.2, 1.2, int(rng.integers(1, 3))))
    probs = rng.dirichlet(np.ones(len(atoms)))
    x0 = float(rng.uniform(0.5, 1.5))
    prior = CompoundPoissonPrior(x0, float(rng.uniform(0.5, 1.5)), DiscreteLaw(tuple(atoms), tuple(probs)), horizon)
    return prior, x0 + float(atoms[0]) * 0.5


def filter_oracle(seed: int, replicates: int, configs: int = 12) -> CheckReport:
    """Filters against the exact Bayes oracle on randomized priors and observations."""
    rng = _rng(seed, "filter-oracle")
    report = CheckReport("filter-oracle")
    for i in range(configs):
        kind = i % 4
        prior, threshold = _random_prior(rng, kind)
        truth = sample_prior(prior, rng)
        observed = sample_cox_sequential(truth, rng)
        t = float(rng.uniform(0.5, 1.0)) * prior.horizon
        func = [flt.identity(), flt.indicator(threshold), flt.exponential(float(rng.uniform(0.1, 0.6)))][i % 3]
        est = flt.ks_filter(prior, observed, func, t, replicates, seed, tag=stream_tag(f"filter-oracle {i}"))
        oracle = flt.grid_oracle(prior, observed, func, t)
        name = f"#{i:02d} {type(prior).__name__} f={func.name} t={t:.3f} N_t={observed.count(t)}"
        report.rows.append(_filter_row(name, est, oracle))

    # jump-size filter with known jump times: Monte Carlo and enumeration against the oracle
    prior = COMPOUND_EXAMPLE
    for label, obs, jumps, alpha in [
        ("one jump", PointPattern([0.7], 2.0), [0.4], 1.0),
        ("three jumps", PointPattern([0.3, 0.8, 1.1, 1.6], 2.0), [0.5, 0.9, 1.4], 0.5),
    ]:
        oracle = flt.grid_oracle(prior, obs, flt.exponential(alpha), 1.8, jump_times=jumps)
        mc = flt.laplace_filter(prior, obs, jumps, alpha, 1.8, replicates, seed, enumerate=False,
                                tag=stream_tag(f"laplace {label}"))
        report.rows.append(_filter_row(f"laplace {label} alpha={alpha:g} monte-carlo", mc, oracle))
        exact = flt.laplace_filter(prior, obs, jumps, alpha, 1.8)
        report.rows.append(_filter_row(f"laplace {label} alpha={alpha:g} enumeration", exact, oracle))
    zero = flt.laplace_filter(prior, PointPattern([0.7], 2.0), [0.4], 0.0, 1.0, replicates, seed, enumerate=False,
                              tag=stream_tag("laplace zero"))
    report.rows.append(tolerance_row("laplace alpha=0 exactly one", zero.value, 1.0, 0.0))
    return report


def run_criterion(name: str, seed: int, replicates: int) -> CheckReport:
    if name == "normalization":
        return normalization(seed)
    if name == "recurrence":
        return recurrence(seed)
    if name == "chou-meyer":
        return chou_meyer(seed)
    if name == "sampler-law":
        return sampler_law(seed, replicates)
    if name == "watanabe":
        return watanabe(seed, replicates)
    if name == "girsanov":
        return girsanov(seed, replicates)
    if name == "filter-exact":
        return filter_exact(seed, replicates)
    if name == "filter-oracle":
        return filter_oracle(seed, replicates)
    raise KeyError(name)


def run_battery(seed: int, replicates: int, include=CRITERIA) -> CheckReport:
    report = CheckReport("verify-all")
    for name in include:
        sub = run_criterion(name, seed, replicates)
        for row in sub.rows:
            report.rows.append(CheckRow(f"{name}: {row.name}", row.estimate, row.target, row.std_error, row.status))
    return report
