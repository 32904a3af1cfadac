"""Reference-probability filters for the intensity given observed arrivals.

Under the reference law the observed counting process is unit-rate Poisson
and independent of X, while X keeps its prior law. Conditional expectations
given the observation are therefore weighted prior averages with weight

    w(x) = exp(int_0^t (1 - x_s) ds) * prod_{T_k <= t} x_{T_k},

the exact Cox likelihood of the observed arrivals up to the factor e^t. The
factor cancels in every ratio and is dropped.

``grid_oracle`` computes the same posterior expectations by direct Bayes
(enumeration, quadrature, or a finite-state forward equation) and shares no
code with the Monte Carlo filters beyond the path type.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg
from scipy.special import logsumexp
from scipy.stats import poisson

from .errors import ConfigError, DegenerateEstimateError, DomainError, RefinementError
from .intensity import (
    CompoundPoissonPrior,
    DiscreteLaw,
    FixedPrior,
    IntensityPath,
    PathBatch,
    PointMass,
    PriorSpec,
    RandomLevelPrior,
    sample_paths,
)
from .simulation import PointPattern
from .streams import run_blocks


@dataclass(frozen=True)
class FilterEstimate:
    value: float
    std_error: float
    replicates: int
    effective_sample_size: float

    def __post_init__(self):
        if not self.std_error >= 0:
            raise ValueError("std_error must be nonnegative")


# ---------------------------------------------------------------------------
# functionals of the current level
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Functional:
    """f(x) together with the point where it jumps, if any (used by quadrature)."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    discontinuity: float | None = None

    def __call__(self, x):
        return self.fn(np.asarray(x, dtype=float))


def identity() -> Functional:
    return Functional("identity", lambda x: x + 0.0)


def exponential(alpha: float) -> Functional:
    return Functional(f"exponential:{alpha:g}", lambda x: np.exp(alpha * x))


def indicator(threshold: float) -> Functional:
    """1{x > threshold}."""
    return Functional(f"indicator:{threshold:g}", lambda x: (x > threshold).astype(float), float(threshold))


def parse_functional(text: str) -> Functional:
    """``identity``, ``exponential:ALPHA`` or ``indicator:THRESHOLD``."""
    head, _, arg = text.strip().partition(":")
    try:
        if head == "identity" and not arg:
            return identity()
        if head == "exponential":
            return exponential(float(arg))
        if head == "indicator":
            return indicator(float(arg))
    except ValueError:
        pass
    raise ConfigError(f"unknown functional {text!r}")


def _as_functional(f) -> Functional:
    if isinstance(f, Functional):
        return f
    if isinstance(f, str):
        return parse_functional(f)
    if callable(f):
        return Functional(getattr(f, "__name__", "f"), f)
    raise ConfigError(f"unsupported functional {f!r}")


# ---------------------------------------------------------------------------
# weighted ratio
# ---------------------------------------------------------------------------


def ratio_estimate(values, weights) -> FilterEstimate:
    """Self-normalised mean sum(w f) / sum(w) with its delta-method standard error.

    The mean is formed as f_ref + sum(w (f - f_ref)) / sum(w), with f_ref the
    value of the heaviest draw, so a constant f is returned exactly. Scaling
    all weights by a power of two leaves every output bit-identical.
    """
    f = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    if f.shape != w.shape or f.ndim != 1:
        raise DomainError("values and weights must be 1-d arrays of equal length")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise DomainError("weights must be finite and nonnegative")
    total = float(np.sum(w))
    if not total > 0:
        raise DegenerateEstimateError("all weights are zero: the prior cannot produce the observation")
    top = int(np.argmax(w))
    ref = f[top]
    dev = np.where(w > 0, f - ref, 0.0)
    value = float(ref + np.sum(w * dev) / total)
    resid = np.where(w > 0, f - value, 0.0)
    se = float(np.sqrt(np.sum((w * resid) ** 2)) / total)
    return FilterEstimate(value, se, len(w), total / float(w[top]))


def _normalised(logw: np.ndarray) -> np.ndarray:
    top = np.max(logw)
    if not np.isfinite(top):
        raise DegenerateEstimateError("all weights are zero: the prior cannot produce the observation")
    return np.exp(logw - top)


def _batch_log_likelihood(paths: PathBatch, arrivals: np.ndarray, t: float) -> np.ndarray:
    """-Lambda(t) + sum_{T_k <= t} log X_{T_k} per row, for one fixed observed pattern."""
    a = arrivals[arrivals <= t]
    out = -paths.cumulative(np.full(len(paths), t))
    if len(a):
        with np.errstate(divide="ignore"):
            out = out + np.log(paths.level_at(np.broadcast_to(a, (len(paths), len(a))))).sum(axis=1)
    return out


def _check_observation(horizon: float, observed: PointPattern, t: float) -> None:
    if not 0 <= t <= horizon:
        raise DomainError(f"t must lie in [0, {horizon}]")
    if t > observed.horizon:
        raise DomainError("t lies past the end of the observation window")


# ---------------------------------------------------------------------------
# Monte Carlo filters
# ---------------------------------------------------------------------------


def ks_filter(prior: PriorSpec, observed: PointPattern, f, t: float, replicates: int, seed: int,
              tag: int = 0) -> FilterEstimate:
    """E[f(X_t) | observed arrivals up to t] by prior draws weighted with the observed-pattern likelihood."""
    if not prior.strictly_positive():
        raise ConfigError("the filter needs a prior with strictly positive levels")
    _check_observation(prior.horizon, observed, t)
    func = _as_functional(f)
    arrivals = observed.arrivals

    def block(rng, size):
        paths = sample_paths(prior, rng, size)
        return func(paths.level_at(np.full(size, t))), _batch_log_likelihood(paths, arrivals, t)

    values, logw = run_blocks(block, replicates, seed, tag)
    return ratio_estimate(values, _normalised(logw))


def fn_intensity(prior: PriorSpec, observed: PointPattern, t: float, replicates: int, seed: int,
                 tag: int = 0) -> FilterEstimate:
    """Intensity of the observed process with respect to its own history."""
    return ks_filter(prior, observed, identity(), t, replicates, seed, tag)


def _jump_breakpoints(prior: CompoundPoissonPrior, jump_times, t: float) -> np.ndarray:
    jt = np.asarray(sorted(float(s) for s in jump_times), dtype=float)
    if len(jt) and (jt[0] <= 0 or jt[-1] >= prior.horizon):
        raise DomainError("jump times must lie in (0, horizon)")
    if np.any(np.diff(jt) <= 0):
        raise DomainError("jump times must be distinct")
    return jt[jt <= t]


def laplace_filter(prior: CompoundPoissonPrior, observed: PointPattern, jump_times, alpha: float, t: float,
                   replicates: int = 100_000, seed: int = 0, enumerate: bool | None = None,
                   tag: int = 0) -> FilterEstimate:
    """E[exp(alpha X_t) | arrivals and jump times up to t] for a compound-Poisson prior.

    Only the jump sizes are unknown. Discrete jump laws with at most six jumps
    before t are enumerated exactly (standard error 0); otherwise the jump
    sizes are drawn i.i.d. from the jump law.
    """
    if not isinstance(prior, CompoundPoissonPrior):
        raise ConfigError("laplace_filter needs a compound-Poisson prior")
    if not prior.jump_law.mgf_finite(alpha):
        raise DomainError(f"E[exp({alpha} * jump)] is infinite for this jump law")
    _check_observation(prior.horizon, observed, t)
    jt = _jump_breakpoints(prior, jump_times, t)
    m = len(jt)
    law = prior.jump_law
    atoms = law.atoms()
    if enumerate is None:
        enumerate = atoms is not None and m <= 6
    if enumerate and atoms is None:
        raise ConfigError("exact enumeration needs a discrete jump law")
    func = exponential(alpha)
    breaks = np.concatenate([[0.0], jt])

    def build(jumps: np.ndarray) -> PathBatch:
        n = len(jumps)
        levels = prior.x0 + np.concatenate([np.zeros((n, 1)), np.cumsum(jumps, axis=1)], axis=1)
        return PathBatch(np.broadcast_to(breaks, levels.shape), levels, prior.horizon)

    if enumerate:
        vals, probs = atoms
        combos = np.array(list(itertools.product(range(len(vals)), repeat=m)), dtype=int).reshape(len(vals) ** m, m)
        paths = build(vals[combos])
        logw = _batch_log_likelihood(paths, observed.arrivals, t) + np.log(probs[combos]).sum(axis=1)
        est = ratio_estimate(func(paths.level_at(np.full(len(paths), t))), _normalised(logw))
        return FilterEstimate(est.value, 0.0, len(paths), est.effective_sample_size)

    def block(rng, size):
        paths = build(law.sample(rng, (size, m)).reshape(size, m))
        return func(paths.level_at(np.full(size, t))), _batch_log_likelihood(paths, observed.arrivals, t)

    values, logw = run_blocks(block, replicates, seed, tag)
    return ratio_estimate(values, _normalised(logw))


# ---------------------------------------------------------------------------
# exact Bayes oracle
# ---------------------------------------------------------------------------


def path_log_likelihood(path: IntensityPath, observed: PointPattern, t: float) -> float:
    """log of exp(-Lambda(t)) prod_{T_k <= t} X_{T_k} for one path."""
    out = -float(path.cumulative(t))
    for a in observed.arrivals:
        if a > t:
            break
        x = float(path.level_at(a))
        if x <= 0:
            return -math.inf
        out += math.log(x)
    return out


def _posterior_mean(values, log_weights) -> float:
    lw = np.asarray(log_weights, dtype=float)
    if not np.any(np.isfinite(lw)):
        raise DegenerateEstimateError("the prior cannot produce the observation")
    post = np.exp(lw - logsumexp(lw))
    v = np.asarray(values, dtype=float)
    return float(np.sum(post[post > 0] * v[post > 0]))


def _level_posterior_discrete(law, func: Functional, n: int, t: float) -> float:
    vals, probs = law.atoms()
    with np.errstate(divide="ignore"):
        lw = np.log(probs) - vals * t + np.where(n == 0, 0.0, n * np.log(vals))
    return _posterior_mean(func(vals), lw)


def _gauss_legendre(g, a: float, b: float, nodes: int) -> float:
    x, w = np.polynomial.legendre.leggauss(nodes)
    half = 0.5 * (b - a)
    return float(half * np.sum(w * g(a + half * (x + 1.0))))


def _level_posterior_continuous(law, func: Functional, n: int, t: float, tol: float,
                                max_nodes: int = 4096) -> float:
    """Posterior mean over a continuous level law by Gauss-Legendre in the level variable.

    The integrand is prior density times likelihood x^n e^{-x t}. Unbounded
    laws are cut where the integrand has fallen below 1e-20 of its peak;
    the range is split at the functional's jump point, if any.
    """
    def log_g(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return np.log(law.pdf(x)) - x * t + (n * np.log(x) if n else 0.0)

    lo = float(law.lower_bound)
    hi = float(getattr(law, "high", 0.0)) or float(law.ppf(1.0 - 1e-15))
    probe = np.linspace(lo, hi, 2049)[1:]
    peak = float(np.max(log_g(probe)))
    if getattr(law, "high", None) is None:
        while log_g(hi) > peak - 46.0:  # e^-46 ~ 1e-20
            hi *= 2.0
        probe = np.linspace(lo, hi, 4097)[1:]
        peak = max(peak, float(np.max(log_g(probe))))

    def den(x):
        return np.exp(log_g(x) - peak)

    def num(x):
        return func(x) * den(x)

    cuts = [lo, hi]
    if func.discontinuity is not None and lo < func.discontinuity < hi:
        cuts = [lo, func.discontinuity, hi]

    def integrate(nodes):
        n_, d_ = 0.0, 0.0
        for a, b in zip(cuts[:-1], cuts[1:]):
            n_ += _gauss_legendre(num, a, b, nodes)
            d_ += _gauss_legendre(den, a, b, nodes)
        return n_ / d_

    nodes = 32
    prev = integrate(nodes)
    history = [prev]
    while nodes < max_nodes:
        nodes *= 2
        cur = integrate(nodes)
        history.append(cur)
        if abs(cur - prev) <= tol * max(1.0, abs(cur)):
            return cur
        prev = cur
    raise RefinementError(
        f"quadrature did not reach tolerance {tol} with {max_nodes} nodes",
        diagnostics={"estimates": history, "nodes": nodes, "range": (lo, hi)},
    )


def _enumerated_jumps(prior: CompoundPoissonPrior, observed: PointPattern, func: Functional, t: float,
                      jump_times) -> float:
    atoms = prior.jump_law.atoms()
    if atoms is None:
        raise ConfigError("the oracle needs a discrete or fixed jump law")
    jt = _jump_breakpoints(prior, jump_times, t)
    vals, probs = atoms
    values, logw = [], []
    for combo in itertools.product(range(len(vals)), repeat=len(jt)):
        level = prior.x0
        levels = [level]
        logp = 0.0
        for i in combo:
            level += vals[i]
            levels.append(level)
            logp += math.log(probs[i])
        path = IntensityPath(np.concatenate([[0.0], jt]), np.asarray(levels), prior.horizon)
        values.append(float(func(path.level_at(t))))
        logw.append(logp + path_log_likelihood(path, observed, t))
    return _posterior_mean(values, logw)


@dataclass
class _JumpChain:
    """Levels x0 + sum_i n_i a_i over jump-count tuples with sum n_i <= cap."""

    x0: float
    rate: float
    atoms: np.ndarray
    probs: np.ndarray
    cap: int
    states: list = field(init=False)
    levels: np.ndarray = field(init=False)
    generator: np.ndarray = field(init=False)

    def __post_init__(self):
        d = len(self.atoms)
        states = [s for s in itertools.product(range(self.cap + 1), repeat=d) if sum(s) <= self.cap]
        index = {s: i for i, s in enumerate(states)}
        q = np.zeros((len(states), len(states)))
        for i, s in enumerate(states):
            q[i, i] = -self.rate
            if sum(s) == self.cap:
                continue
            for k in range(d):
                nxt = list(s)
                nxt[k] += 1
                q[i, index[tuple(nxt)]] += self.rate * self.probs[k]
        self.states = states
        self.levels = np.array([self.x0 + float(np.dot(s, self.atoms)) for s in states])
        self.generator = q

    def posterior_mean(self, func: Functional, arrivals: np.ndarray, t: float) -> float:
        """Forward equation for the unnormalised filter, rescaled after every step."""
        drift = self.generator - np.diag(self.levels)
        pi = np.zeros(len(self.states))
        pi[0] = 1.0
        now = 0.0

        def advance(pi, dt):
            pi = pi @ linalg.expm(drift * dt) if dt > 0 else pi
            s = pi.sum()
            if not s > 0:
                raise DegenerateEstimateError("the prior cannot produce the observation")
            return pi / s

        for a in arrivals[arrivals <= t]:
            pi = advance(pi, a - now) * self.levels
            now = a
        pi = advance(pi, t - now)
        return float(np.dot(pi, func(self.levels)))


def _poisson_cap(mean: float, tail: float) -> int:
    """Smallest K with P[Poisson(mean) > K] < tail."""
    k = int(mean)
    while poisson.sf(k, mean) >= tail:
        k += 1
    return k


def _markov_oracle(prior: CompoundPoissonPrior, observed: PointPattern, func: Functional, t: float,
                   tol: float, max_rounds: int = 6) -> float:
    atoms = prior.jump_law.atoms()
    if atoms is None:
        raise ConfigError("the oracle needs a discrete or fixed jump law when jump times are unobserved")
    vals, probs = atoms
    cap = _poisson_cap(prior.jump_rate * t, 1e-10)

    def solve(k):
        chain = _JumpChain(prior.x0, prior.jump_rate, np.asarray(vals), np.asarray(probs), k)
        return chain.posterior_mean(func, observed.arrivals, t)

    results = [solve(cap)]
    for step in range(1, max_rounds + 1):
        results.append(solve(cap + 5 * step))
        if abs(results[-1] - results[-2]) <= tol * max(1.0, abs(results[-1])):
            return results[-1]
    raise RefinementError(
        f"jump-count truncation not converged to {tol} by {cap + 5 * max_rounds} jumps",
        diagnostics={"cap": cap, "estimates": results},
    )


def grid_oracle(prior: PriorSpec, observed: PointPattern, f, t: float, tol: float = 1e-9,
                jump_times=None) -> float:
    """Exact posterior mean of f(X_t) given the arrivals up to t (and jump times, if given).

    * fixed path: f(X_t);
    * random level, discrete law: two-line Bayes over the atoms;
    * random level, continuous law: Gauss-Legendre quadrature, doubling nodes until stable;
    * compound Poisson with observed jump times: enumeration of the jump sizes;
    * compound Poisson otherwise: forward equation of the jump-count chain, truncated
      where the prior Poisson tail drops below 1e-10, then extended five jumps at a
      time until two successive truncations agree to ``tol``.
    """
    func = _as_functional(f)
    _check_observation(prior.horizon, observed, t)
    if isinstance(prior, FixedPrior):
        return float(func(prior.path.level_at(t)))
    if isinstance(prior, RandomLevelPrior):
        n = observed.count(t)
        if isinstance(prior.law, (PointMass, DiscreteLaw)):
            return _level_posterior_discrete(prior.law, func, n, t)
        return _level_posterior_continuous(prior.law, func, n, t, tol)
    if isinstance(prior, CompoundPoissonPrior):
        if jump_times is not None:
            return _enumerated_jumps(prior, observed, func, t, jump_times)
        return _markov_oracle(prior, observed, func, t, tol)
    raise ConfigError(f"unsupported prior {type(prior).__name__}")
