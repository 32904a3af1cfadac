"""Command-line harness: ``coxkit <subcommand> --config FILE [options]``.

Exit codes: 0 all checks passed, 1 some check failed, 2 bad arguments or config.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path

import numpy as np

from . import battery
from . import filtering as flt
from .checks import FAIL, INCONCLUSIVE, CheckReport, CheckRow, band_status, tolerance_row
from .config import DEFAULT_REPLICATES, ExperimentConfig, load_config
from .densities import psi
from .errors import ConfigError, CoxkitError
from .girsanov import expectation_of_z_test, induction_identity_test, reweighted_law_test
from .intensity import FixedPrior, IntensityPath, sample_paths, sample_prior
from .simulation import SAMPLERS, PointPattern
from .streams import run_blocks, stream_tag, substream
from .svg import Chart
from .watanabe import (
    constant_phi,
    count_at_least,
    count_at_r,
    level_above,
    level_above_and_quiet,
    level_damped_phi,
    martingale_test,
    no_arrival_yet_phi,
    no_arrivals_by_r,
    predictable_integral_test,
    whole_space,
)

SCHEMAS = {
    "simulate": "patterns.csv: replicate_id,arrivals (';'-joined)\n"
                "paths.csv: replicate_id,breakpoints,levels (';'-joined)",
    "densities": "densities.csv: t,psi_value; last row t=inf holds the atom at infinity",
    "watanabe-check": "watanabe.csv: event,estimate,std_error,pass",
    "girsanov-check": "girsanov.csv: check_name,estimate,target,std_error,pass",
    "filter": "filter.csv: t,estimate,std_error,ess,oracle_value,pass (last two empty without oracle)",
    "verify-all": "verify_all.csv: check,estimate,target,std_error,pass",
}

HELP = {
    "simulate": "draw intensity paths and Cox arrival patterns",
    "densities": "tabulate the conditional arrival-time density of one path",
    "watanabe-check": "martingale and predictable-integral checks",
    "girsanov-check": "stochastic-exponential checks for a multiplier rule",
    "filter": "filter the intensity from an observed pattern",
    "verify-all": "run the full verification battery (seed required)",
}


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def joined(values) -> str:
    return ";".join(fmt(float(v)) for v in values)


def status_text(status: str) -> str:
    return "inconclusive" if status == INCONCLUSIVE else ("false" if status == FAIL else "true")


def write_csv(path: Path, header, rows) -> Path:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coxkit",
        description="Cox process simulation, density, martingale, change-of-measure and filtering checks.",
        epilog="exit codes: 0 pass, 1 check failure, 2 config error. "
               "COXKIT_THREADS caps the worker count; results do not depend on it.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name in SCHEMAS:
        p = sub.add_parser(name, help=HELP[name], description=f"{HELP[name]}.\n\noutput {SCHEMAS[name]}",
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", required=name != "verify-all", help="experiment config file (INI)")
        p.add_argument("--seed", type=int, help="master seed (overrides [run] seed)")
        p.add_argument("--replicates", type=int, help=f"replicate count (default {DEFAULT_REPLICATES})")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--plot", action="store_true", help="also write an SVG chart")
    return parser


def _seed(args, cfg: ExperimentConfig | None, required: bool) -> int:
    seed = args.seed if args.seed is not None else (cfg.seed() if cfg is not None else None)
    if seed is None:
        if required:
            raise ConfigError("[run] seed: required for this command (or pass --seed)")
        seed = int(np.random.SeedSequence().entropy) & ((1 << 64) - 1)
        print(f"seed: {seed}", file=sys.stderr)
    if not 0 <= seed < 2**64:
        raise ConfigError("--seed: must be a 64-bit unsigned integer")
    return seed


def _replicates(args, cfg: ExperimentConfig | None) -> int:
    if args.replicates is not None:
        if args.replicates < 1:
            raise ConfigError("--replicates: must be at least 1")
        return args.replicates
    return cfg.replicates() if cfg is not None else DEFAULT_REPLICATES


def _times_within(values, horizon: float, where: str) -> list[float]:
    for v in values:
        if not 0 <= v <= horizon:
            raise ConfigError(f"{where}: time {v:g} outside [0, {horizon:g}]")
    return list(values)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args, cfg: ExperimentConfig, out: Path) -> int:
    prior = cfg.prior()
    name = cfg.text("simulate", "sampler", "timechange")
    if name not in SAMPLERS:
        raise ConfigError(f"[simulate] sampler: expected one of {sorted(SAMPLERS)}, got {name!r}")
    draw = SAMPLERS[name]
    seed, replicates = _seed(args, cfg, False), _replicates(args, cfg)

    def block(rng, size):
        paths = sample_paths(prior, rng, size)
        patterns = draw(paths, rng)
        arr = np.empty(size, dtype=object)
        brk = np.empty(size, dtype=object)
        lev = np.empty(size, dtype=object)
        for i in range(size):
            arr[i] = joined(patterns.pattern(i).arrivals)
            p = paths.path(i)
            brk[i] = joined(p.breakpoints)
            lev[i] = joined(p.levels)
        return arr, brk, lev

    arr, brk, lev = run_blocks(block, replicates, seed, stream_tag("simulate"))
    write_csv(out / "patterns.csv", ["replicate_id", "arrivals"], ([i, a] for i, a in enumerate(arr)))
    write_csv(out / "paths.csv", ["replicate_id", "breakpoints", "levels"],
              ([i, b, v] for i, (b, v) in enumerate(zip(brk, lev))))
    if args.plot:
        path = IntensityPath(_parse_list(brk[0]), _parse_list(lev[0]), prior.horizon)
        arrivals = _parse_list(arr[0])
        chart = Chart("replicate 0: N_t and cumulative intensity")
        chart.steps(np.concatenate([[0.0], arrivals]), np.arange(len(arrivals) + 1), "N_t", prior.horizon)
        grid = np.concatenate([path.breakpoints, [path.horizon]])
        chart.line(grid, path.cumulative(grid), "Lambda(t)")
        chart.write(out / "simulate.svg")
    return 0


def _parse_list(text: str) -> np.ndarray:
    return np.array([float(x) for x in text.split(";") if x], dtype=float)


def cmd_densities(args, cfg: ExperimentConfig, out: Path) -> int:
    prior = cfg.prior()
    if isinstance(prior, FixedPrior):
        path = prior.path
    else:
        path = sample_prior(prior, substream(_seed(args, cfg, False), 0, stream_tag("densities")))
    n = cfg.integer("densities", "n", 0, minimum=0)
    r = cfg.number("densities", "r", 0.0)
    observed = cfg.integer("densities", "observed_count", 0, minimum=0)
    if not 0 <= r <= path.horizon:
        raise ConfigError(f"[densities] r: must lie in [0, {path.horizon:g}]")
    grid = cfg.numbers("densities", "grid", list(np.linspace(0.0, path.horizon, 101)))
    if any(g < 0 for g in grid):
        raise ConfigError("[densities] grid: times must be nonnegative")
    kernel = psi(path, n, r, observed)
    values = [kernel.eval(g) for g in grid]
    rows = [[fmt(g), fmt(v)] for g, v in zip(grid, values)]
    rows.append(["inf", fmt(kernel.atom_at_infinity)])
    write_csv(out / "densities.csv", ["t", "psi_value"], rows)
    if args.plot:
        chart = Chart(f"arrival density n={n} r={r:g} N_r={observed}")
        chart.line(grid, values, "psi")
        chart.write(out / "densities.svg")
    return 0


def _event(token: str):
    head, _, arg = token.partition(":")
    try:
        if token == "all":
            return whole_space()
        if token == "quiet":
            return no_arrivals_by_r()
        if head == "count":
            return count_at_r(int(arg))
        if head == "atleast":
            return count_at_least(int(arg))
        if head == "level":
            return level_above(float(arg))
        if head == "level-quiet":
            return level_above_and_quiet(float(arg))
    except ValueError:
        pass
    raise ConfigError(f"[watanabe] events: unknown event {token!r}")


def _phi(token: str, grid):
    head, _, arg = token.partition(":")
    if head == "const":
        try:
            return constant_phi(float(arg), grid)
        except ValueError:
            pass
    if token == "no-arrival":
        return no_arrival_yet_phi(grid)
    if token == "level-damped":
        return level_damped_phi(grid)
    raise ConfigError(f"[watanabe] phi: unknown integrand {token!r}")


def cmd_watanabe(args, cfg: ExperimentConfig, out: Path) -> int:
    prior = cfg.prior()
    seed, replicates = _seed(args, cfg, False), _replicates(args, cfg)
    r = cfg.number("watanabe", "r", 0.0)
    t = cfg.number("watanabe", "t", prior.horizon)
    if not 0 <= r < t <= prior.horizon:
        raise ConfigError(f"[watanabe] t: need 0 <= r < t <= {prior.horizon:g}")
    events = [_event(w) for w in cfg.words("watanabe", "events", ["all"])]
    stops = []
    for s in cfg.words("watanabe", "stop_at", []):
        if not s.isdigit() or int(s) < 1:
            raise ConfigError(f"[watanabe] stop_at: {s!r} is not a positive integer")
        stops.append(int(s))
    report = martingale_test(prior, r, t, events, replicates, seed, stops, tag=stream_tag("watanabe-martingale"))
    grid = _times_within(cfg.numbers("watanabe", "phi_grid", list(np.linspace(0.0, prior.horizon, 5))),
                         prior.horizon, "[watanabe] phi_grid")
    for token in cfg.words("watanabe", "phi", []):
        try:
            phi = _phi(token, tuple(grid))
        except CoxkitError as exc:
            raise ConfigError(f"[watanabe] phi_grid: {exc}") from None
        report.extend(predictable_integral_test(prior, phi, replicates, seed, tag=stream_tag(f"watanabe {token}")))
    write_csv(out / "watanabe.csv", ["event", "estimate", "std_error", "pass"],
              ([row.name, fmt(row.estimate), fmt(row.std_error), status_text(row.status)] for row in report.rows))
    return 0 if report.passed else 1


def cmd_girsanov(args, cfg: ExperimentConfig, out: Path) -> int:
    prior = cfg.prior()
    rule = cfg.multiplier()
    seed, replicates = _seed(args, cfg, False), _replicates(args, cfg)
    report = CheckReport("girsanov-check")
    try:
        rule.validate(prior)
    except ConfigError as exc:
        raise ConfigError(f"[multiplier] type: {exc}") from None
    h = prior.horizon
    for t in _times_within(cfg.numbers("girsanov", "times", [h]), h, "[girsanov] times"):
        report.extend(expectation_of_z_test(prior, rule, t, replicates, seed, tag=stream_tag(f"girsanov E {t!r}")))
    intervals = cfg.pairs("girsanov", "intervals", [f"0:{h!r}"])
    for r, t in intervals:
        if not 0 <= r < t <= h:
            raise ConfigError(f"[girsanov] intervals: ({r:g}, {t:g}] outside [0, {h:g}]")
    report.extend(reweighted_law_test(prior, rule, intervals, replicates, seed, tag=stream_tag("girsanov law")))
    pairs = cfg.pairs("girsanov", "induction", [], kind=int)
    t_ind = cfg.number("girsanov", "induction_t", h)
    _times_within([t_ind], h, "[girsanov] induction_t")
    inner = cfg.integer("girsanov", "inner", 16, minimum=1)
    outer = cfg.integer("girsanov", "induction_replicates", max(1, replicates // 5), minimum=1)
    for n, j in pairs:
        if not 0 <= j <= n <= 5:
            raise ConfigError(f"[girsanov] induction: need 0 <= j <= n <= 5, got {n}:{j}")
        report.extend(induction_identity_test(prior, rule, t_ind, n, j, outer, seed, inner,
                                              tag=stream_tag(f"girsanov induction {n} {j}")))
    write_csv(out / "girsanov.csv", ["check_name", "estimate", "target", "std_error", "pass"],
              ([row.name, fmt(row.estimate), fmt(row.target), fmt(row.std_error), status_text(row.status)]
               for row in report.rows))
    return 0 if report.passed else 1


def _observation(cfg: ExperimentConfig, horizon: float):
    """Observed pattern and, when read from ``simulate`` output, the true path."""
    if cfg.has("filter", "observed_csv"):
        base = Path(cfg.source).parent
        src = base / cfg.text("filter", "observed_csv")
        row = cfg.integer("filter", "observed_row", 0, minimum=0)
        try:
            with src.open() as fh:
                records = list(csv.DictReader(fh))
        except OSError as exc:
            raise ConfigError(f"[filter] observed_csv: cannot read {src}: {exc.strerror}") from None
        if row >= len(records) or "arrivals" not in records[row]:
            raise ConfigError(f"[filter] observed_row: no arrivals for row {row} in {src}")
        observed = PointPattern(_parse_list(records[row]["arrivals"]), horizon)
        truth = None
        paths_csv = src.with_name("paths.csv")
        if paths_csv.exists():
            with paths_csv.open() as fh:
                recs = list(csv.DictReader(fh))
            if row < len(recs):
                truth = IntensityPath(_parse_list(recs[row]["breakpoints"]), _parse_list(recs[row]["levels"]), horizon)
        return observed, truth
    arrivals = cfg.numbers("filter", "arrivals", [])
    try:
        return PointPattern(arrivals, horizon), None
    except CoxkitError as exc:
        raise ConfigError(f"[filter] arrivals: {exc}") from None


def cmd_filter(args, cfg: ExperimentConfig, out: Path) -> int:
    prior = cfg.prior()
    seed, replicates = _seed(args, cfg, False), _replicates(args, cfg)
    observed, truth = _observation(cfg, prior.horizon)
    times = _times_within(cfg.numbers("filter", "times", [prior.horizon]), prior.horizon, "[filter] times")
    method = cfg.text("filter", "method", "ks")
    use_oracle = cfg.flag("filter", "oracle", False)
    if method == "ks":
        func = flt.parse_functional(cfg.text("filter", "f", "identity"))
        jumps = None
    elif method == "laplace":
        alpha = cfg.number("filter", "alpha")
        func = flt.exponential(alpha)
        jumps = cfg.numbers("filter", "jump_times", [])
    else:
        raise ConfigError(f"[filter] method: expected ks or laplace, got {method!r}")
    rows, estimates, failed = [], [], False
    for i, t in enumerate(times):
        tag = stream_tag(f"filter {i}")
        try:
            if method == "ks":
                est = flt.ks_filter(prior, observed, func, t, replicates, seed, tag=tag)
            else:
                est = flt.laplace_filter(prior, observed, jumps, alpha, t, replicates, seed, tag=tag)
        except ConfigError as exc:
            raise ConfigError(f"[prior] type: {exc}") from None
        estimates.append(est.value)
        row = [fmt(t), fmt(est.value), fmt(est.std_error), fmt(est.effective_sample_size), "", ""]
        if use_oracle:
            oracle = flt.grid_oracle(prior, observed, func, t, jump_times=jumps)
            check = _oracle_row(est, oracle)
            failed |= not check.passed
            row[4], row[5] = fmt(oracle), status_text(check.status)
        rows.append(row)
    write_csv(out / "filter.csv", ["t", "estimate", "std_error", "ess", "oracle_value", "pass"], rows)
    if args.plot:
        chart = Chart(f"filter estimate of {func.name}")
        chart.line(times, estimates, "estimate")
        if truth is not None:
            chart.steps(truth.breakpoints, func(truth.levels), "truth", truth.horizon)
        chart.write(out / "filter.svg")
    return 1 if failed else 0


def _oracle_row(est: flt.FilterEstimate, oracle: float) -> CheckRow:
    if est.std_error == 0.0:
        return tolerance_row("oracle", est.value, oracle, 1e-9 * max(1.0, abs(oracle)))
    return CheckRow("oracle", est.value, oracle, est.std_error, band_status(est.value, oracle, est.std_error))


def cmd_verify_all(args, cfg: ExperimentConfig | None, out: Path) -> int:
    seed = _seed(args, cfg, True)
    replicates = _replicates(args, cfg)
    include = battery.CRITERIA
    if cfg is not None and cfg.has("battery", "include"):
        include = tuple(cfg.words("battery", "include"))
        unknown = [c for c in include if c not in battery.CRITERIA]
        if unknown:
            raise ConfigError(f"[battery] include: unknown criteria {unknown}")
    report = battery.run_battery(seed, replicates, include)
    write_csv(out / "verify_all.csv", ["check", "estimate", "target", "std_error", "pass"],
              ([row.name, fmt(row.estimate), fmt(row.target), fmt(row.std_error), status_text(row.status)]
               for row in report.rows))
    for name in include:
        rows = [r for r in report.rows if r.name.startswith(f"{name}: ")]
        ok = sum(r.passed for r in rows)
        print(f"{'PASS' if ok == len(rows) else 'FAIL'} {name}: {ok}/{len(rows)} checks")
    return 0 if report.passed else 1


COMMANDS = {
    "simulate": cmd_simulate,
    "densities": cmd_densities,
    "watanabe-check": cmd_watanabe,
    "girsanov-check": cmd_girsanov,
    "filter": cmd_filter,
    "verify-all": cmd_verify_all,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = load_config(args.config) if args.config else None
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args, cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CoxkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
