"""Paired significance tests and descriptive statistics for accuracy columns.

Kept free of the training stack so that the ``stats`` command starts quickly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.special

from .errors import AllZeroDifferences, DegenerateVariance, DimensionMismatch, EmptyInput


def average_ranks(values) -> np.ndarray:
    """1-based ranks with ties sharing their mean rank (scipy's "average")."""
    v = np.asarray(values, dtype=np.float64).ravel()
    order = np.argsort(v, kind="mergesort")
    sorted_v = v[order]
    # start index of each run of equal values
    starts = np.flatnonzero(np.r_[True, sorted_v[1:] != sorted_v[:-1]])
    ends = np.r_[starts[1:], v.size]
    mean_rank = (starts + ends + 1) / 2.0
    ranks = np.empty(v.size)
    ranks[order] = np.repeat(mean_rank, ends - starts)
    return ranks


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    kind: str

    __test__ = False  # not a pytest class


def student_t_sf_two_sided(t: float, df: float) -> float:
    """P(|T| >= |t|) via the regularized incomplete beta function.

    Uses I_x(df/2, 1/2) with x = df / (df + t^2).
    """
    x = df / (df + t * t)
    return float(min(1.0, max(0.0, scipy.special.betainc(0.5 * df, 0.5, x))))


def paired_t_test(a, b) -> TestResult:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionMismatch("paired samples must be 1-D and of equal length")
    n = a.size
    if n < 2:
        raise ValueError("need at least two pairs")
    d = a - b
    sd = float(np.std(d, ddof=1))
    if sd <= 1e-12 * max(1.0, float(np.max(np.abs(d)))):
        raise DegenerateVariance("differences have zero variance")
    t = float(np.mean(d) / (sd / math.sqrt(n)))
    return TestResult(t, student_t_sf_two_sided(t, n - 1), "paired-t")


def _signed_rank_counts(doubled_ranks):
    """counts[s] = number of sign patterns whose positive doubled-rank sum is s."""
    total = int(sum(doubled_ranks))
    counts = np.zeros(total + 1, dtype=object)
    counts[0] = 1
    reach = 0
    for r in doubled_ranks:
        r = int(r)
        counts[r : reach + r + 1] = counts[r : reach + r + 1] + counts[: reach + 1]
        reach += r
    return counts


def wilcoxon_signed_rank(a, b) -> TestResult:
    """Exact two-sided Wilcoxon signed-rank test.

    Zero differences are dropped and tied magnitudes get average ranks.  The
    null distribution of the positive rank sum is counted exactly over all
    2^n sign patterns (by dynamic programming on doubled ranks, which keeps
    half-integer average ranks integral).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionMismatch("paired samples must be 1-D and of equal length")
    d = a - b
    d = d[d != 0]
    if d.size == 0:
        raise AllZeroDifferences("all paired differences are zero")
    ranks = average_ranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)
    doubled = np.rint(2 * ranks).astype(np.int64)
    counts = _signed_rank_counts(doubled)
    limit = int(round(2 * w))
    tail = sum(counts[: limit + 1])
    p = min(1.0, 2.0 * float(tail) / float(2 ** d.size))
    return TestResult(w, p, "wilcoxon")


def descriptive_stats(values) -> dict:
    """Mean, population standard deviation, min and max of a score column."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise EmptyInput("no values to summarize")
    return {
        "mean": float(v.mean()),
        "std": float(v.std(ddof=0)),
        "min": float(v.min()),
        "max": float(v.max()),
    }
