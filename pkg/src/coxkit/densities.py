"""Conditional arrival-time densities of a Cox process given its intensity path.

For an origin time r with N_r arrivals already observed, the (n+1)-th arrival
has density

    psi(t) = X_t exp(-L) L^k / k!,   L = int_r^t X,  k = n - N_r,

on (r, inf) plus an atom at infinity

    psi_inf = exp(-L_inf) sum_{i<=k} L_inf^i / i!,

both vanishing when N_r > n. The interarrival kernel from an arrival T_n is
the case k = 0 started at r = T_n. Conventions: 0^0 = 1 and e^{-inf} inf = 0.

All products e^{-L} L^i / i! are formed in log space. Integrals over a piece
where X is constant use the closed form

    int_a^b c e^{-L} L^k / k! ds = S_k(L_a) - S_k(L_b),
    S_k(L) = e^{-L} sum_{i<=k} L^i / i!,

obtained from the integration-by-parts recurrence on the polynomial factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import ConsistencyError, DomainError
from .intensity import IntensityPath
from .simulation import PointPattern


def log_poisson_term(k: int, L):
    """log(e^{-L} L^k / k!) with 0^0 = 1 and e^{-inf} inf^k = 0."""
    L = np.asarray(L, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        body = np.where(k == 0, 0.0, k * np.log(L))
        out = -L + body - gammaln(k + 1)
    out = np.where(np.isinf(L), -np.inf, out)
    return float(out) if out.ndim == 0 else out


def log_poisson_tail(k: int, L: float) -> float:
    """log S_k(L) = log(e^{-L} sum_{i=0}^k L^i / i!)."""
    if k < 0:
        return -math.inf
    if math.isinf(L):
        return -math.inf
    if L == 0.0:
        return 0.0
    if k == 0:
        return -float(L)
    log_l = math.log(L)
    terms = [i * log_l - math.lgamma(i + 1) for i in range(k + 1)]
    top = max(terms)
    return -float(L) + top + math.log(math.fsum(math.exp(x - top) for x in terms))


def poisson_tail(k: int, L: float) -> float:
    return math.exp(log_poisson_tail(k, L))


@dataclass(frozen=True)
class DensityKernel:
    """Arrival density on ``(origin, inf)`` plus its atom at infinity.

    ``order`` is ``jump_index - observed_count``; a negative order is the
    identically-zero kernel of an arrival that already happened.
    """

    path: IntensityPath
    origin: float
    order: int
    jump_index: int | None = None
    observed_count: int | None = None

    @property
    def vanishes(self) -> bool:
        return self.order < 0

    def _elapsed(self, t):
        return self.path.integral(self.origin, t)

    def log_eval(self, t):
        t = np.asarray(t, dtype=float)
        if self.vanishes:
            out = np.full(t.shape, -np.inf)
        else:
            tt = np.maximum(t, self.origin)
            with np.errstate(divide="ignore"):
                logx = np.log(self.path.level_at(tt))
            out = logx + log_poisson_term(self.order, self._elapsed(tt))
            out = np.where(t < self.origin, -np.inf, out)
        return float(out) if np.ndim(out) == 0 else out

    def eval(self, t):
        """Density value at ``t`` (per unit time); times past the horizon use the tail extension."""
        out = np.exp(self.log_eval(t))
        return float(out) if np.ndim(out) == 0 else out

    __call__ = eval

    @property
    def tail_integral(self) -> float:
        return float(self.path.tail_integral(self.origin))

    @property
    def atom_at_infinity(self) -> float:
        if self.vanishes:
            return 0.0
        return poisson_tail(self.order, self.tail_integral)

    def survival(self, t: float) -> float:
        """P[next arrival > t], t >= origin, in closed form S_k(L(origin, t))."""
        if self.vanishes:
            return 0.0
        return poisson_tail(self.order, float(self._elapsed(max(t, self.origin))))

    def integral(self, a: float | None = None, b: float = math.inf) -> float:
        """Exact int_a^b eval(s) ds, summed piece by piece over the constant stretches of X."""
        if self.vanishes:
            return 0.0
        a = self.origin if a is None else max(float(a), self.origin)
        b = float(b)
        if b <= a:
            return 0.0
        p = self.path
        edges = np.concatenate((p.breakpoints, [p.horizon, math.inf]))
        levels = np.append(p.levels, p.last_level)
        lo = np.maximum(edges[:-1], a)
        hi = np.minimum(edges[1:], b)
        keep = (hi > lo) & (levels > 0)
        if not np.any(keep):
            return 0.0
        base = float(p.extended_cumulative(self.origin))
        l_lo = p.extended_cumulative(lo[keep]) - base
        l_hi = p.extended_cumulative(hi[keep]) - base
        total = 0.0
        for x, y in zip(l_lo, l_hi):
            total += poisson_tail(self.order, float(x)) - (0.0 if math.isinf(y) else poisson_tail(self.order, float(y)))
        return total

    def total_mass(self) -> float:
        return self.integral() + self.atom_at_infinity


def psi(path: IntensityPath, n: int, r: float, observed_count: int) -> DensityKernel:
    """Density of T_{n+1} given the path and the history up to r with N_r arrivals."""
    if not 0 <= r <= path.horizon:
        raise DomainError(f"r must lie in [0, {path.horizon}]")
    if n < 0 or observed_count < 0:
        raise DomainError("n and N_r must be nonnegative")
    return DensityKernel(path, float(r), int(n) - int(observed_count), int(n), int(observed_count))


def phi(path: IntensityPath, t_n: float) -> DensityKernel:
    """Interarrival kernel: density of the next arrival after an arrival at ``t_n``."""
    if not 0 <= t_n <= path.horizon:
        raise DomainError(f"T_n must lie in [0, {path.horizon}]")
    return DensityKernel(path, float(t_n), 0)


def chou_meyer_intensity(path: IntensityPath, pattern: PointPattern, t: float) -> float:
    """Intensity assembled from the interarrival kernels; equals X_t for a Cox process.

    Only the term with T_n <= t < T_{n+1} is active. The denominator
    1 - int_{T_n}^t phi is evaluated as the remaining mass int_t^inf phi + atom,
    which is the same number without cancellation.
    """
    if not 0 <= t <= path.horizon:
        raise DomainError(f"t must lie in [0, {path.horizon}]")
    if pattern.horizon != path.horizon:
        raise DomainError("pattern and path must share a horizon")
    n = pattern.count(t)
    kernel = phi(path, pattern.arrival(n))
    numerator = kernel.eval(t)
    denominator = kernel.integral(t) + kernel.atom_at_infinity
    if not denominator > 0:
        raise ConsistencyError(f"nonpositive compensator denominator {denominator} at t={t}")
    return numerator / denominator
