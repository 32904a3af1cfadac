"""Report rows and the small statistical toolkit shared by the Monte Carlo checks.

Monte Carlo checks pass when the estimate lies within ``SE_BAND`` standard
errors of its target. Distributional tests use significance ``ALPHA``. With
pre-registered seeds each check is deterministic; over fresh seeds a single
4-SE check fails with probability about 6e-5 and a level-0.001 test with
probability 0.001.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

SE_BAND = 4.0
ALPHA = 1e-3
MIN_EXPECTED = 25.0

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


@dataclass(frozen=True)
class CheckRow:
    name: str
    estimate: float
    target: float
    std_error: float
    status: str

    @property
    def passed(self) -> bool:
        return self.status != FAIL


@dataclass
class CheckReport:
    title: str
    rows: list[CheckRow] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def extend(self, other: CheckReport) -> None:
        self.rows.extend(other.rows)
        for k, v in other.diagnostics.items():
            self.diagnostics[f"{other.title}:{k}"] = v


def mean_and_se(x) -> tuple[float, float]:
    """Sample mean (pairwise summation) and its standard error."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    m = float(np.mean(x))
    if n < 2:
        return m, 0.0
    return m, float(np.std(x, ddof=1) / np.sqrt(n))


def band_status(estimate: float, target: float, se: float, band: float = SE_BAND) -> str:
    return PASS if abs(estimate - target) <= band * se else FAIL


def se_row(name: str, samples, target: float) -> CheckRow:
    m, se = mean_and_se(samples)
    return CheckRow(name, m, target, se, band_status(m, target, se))


def tolerance_row(name: str, estimate: float, target: float, tol: float) -> CheckRow:
    """Deterministic check: |estimate - target| <= tol (standard error reported as nan)."""
    ok = abs(estimate - target) <= tol
    return CheckRow(name, float(estimate), float(target), float("nan"), PASS if ok else FAIL)


def pvalue_row(name: str, pvalue: float, alpha: float = ALPHA) -> CheckRow:
    return CheckRow(name, float(pvalue), alpha, float("nan"), PASS if pvalue >= alpha else FAIL)


def merge_cells(expected, min_expected: float = MIN_EXPECTED) -> list[list[int]]:
    """Group adjacent cells left to right until each group expects ``min_expected`` hits.

    A short remainder joins the last complete group.
    """
    groups: list[list[int]] = []
    cur: list[int] = []
    acc = 0.0
    for i, e in enumerate(expected):
        cur.append(i)
        acc += e
        if acc >= min_expected:
            groups.append(cur)
            cur, acc = [], 0.0
    if cur:
        if groups:
            groups[-1].extend(cur)
        else:
            groups.append(cur)
    return groups


def chisquare_counts(counts, cell_probs, min_expected: float = 5.0) -> tuple[float, float, int]:
    """Pearson goodness of fit of integer counts to per-replicate cell probabilities.

    ``cell_probs`` is (R, C): row i holds replicate i's conditional probability
    of each cell (the last column an open tail). Expected hits are the column
    sums; cells are merged until each expects ``min_expected``. With
    heterogeneous rows the statistic is conservative against chi-square.
    Returns (statistic, p-value, degrees of freedom).
    """
    counts = np.asarray(counts)
    probs = np.asarray(cell_probs, dtype=float)
    ncell = probs.shape[1]
    observed = np.bincount(np.minimum(counts, ncell - 1), minlength=ncell).astype(float)
    expected = probs.sum(axis=0)
    groups = merge_cells(expected, min_expected)
    obs = np.array([observed[g].sum() for g in groups])
    exp = np.array([expected[g].sum() for g in groups])
    if len(groups) < 2:
        return 0.0, 1.0, 0
    stat = float(np.sum((obs - exp) ** 2 / exp))
    dof = len(groups) - 1
    return stat, float(stats.chi2.sf(stat, dof)), dof


def chisquare_homogeneity(a, b, min_expected: float = 5.0) -> tuple[float, float, int]:
    """Two-sample chi-square test on categorical labels (integers or tuples encoded as ints)."""
    a = np.asarray(a)
    b = np.asarray(b)
    labels = np.union1d(a, b)
    ca = np.array([(a == v).sum() for v in labels], dtype=float)
    cb = np.array([(b == v).sum() for v in labels], dtype=float)
    pooled = (ca + cb) / (len(a) + len(b))
    groups = merge_cells(pooled * min(len(a), len(b)), min_expected)
    table = np.array([[ca[g].sum() for g in groups], [cb[g].sum() for g in groups]])
    if table.shape[1] < 2:
        return 0.0, 1.0, 0
    stat, p, dof, _ = stats.chi2_contingency(table, correction=False)
    return float(stat), float(p), int(dof)


def chisquare_independence(x, y, min_expected: float = 5.0) -> tuple[float, float, int]:
    """Chi-square independence test of two integer samples, tails merged per margin."""
    x = np.asarray(x)
    y = np.asarray(y)
    n = len(x)

    def bins(v):
        top = int(v.max()) + 1
        counts = np.bincount(v, minlength=top).astype(float)
        # rows/cols need enough mass for the cross cells to be usable
        groups = merge_cells(counts, max(min_expected, np.sqrt(n) * 2))
        lab = np.empty(top, dtype=int)
        for gi, g in enumerate(groups):
            lab[g] = gi
        return lab[v], len(groups)

    bx, nx = bins(x)
    by, ny = bins(y)
    if nx < 2 or ny < 2:
        return 0.0, 1.0, 0
    table = np.zeros((nx, ny))
    np.add.at(table, (bx, by), 1.0)
    stat, p, dof, _ = stats.chi2_contingency(table, correction=False)
    return float(stat), float(p), int(dof)


def ks_exponential(samples, rate: float = 1.0) -> tuple[float, float]:
    res = stats.kstest(np.asarray(samples), stats.expon(scale=1.0 / rate).cdf)
    return float(res.statistic), float(res.pvalue)
