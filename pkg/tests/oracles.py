"""Independent oracles the test suite checks the package against.

Everything here is deliberately written the slow, obvious way, using a
different algorithm (and where possible a different numeric stack) from the
implementation under test.
"""

from __future__ import annotations

import collections
import itertools
import math

import mpmath
import numpy as np

mpmath.mp.dps = 50  # 50 significant digits everywhere in this module


def log_add_mp(u: float, v: float) -> float:
    """log(e^u + e^v) at 50-digit precision, reduced back to float64."""
    if u == -math.inf:
        return v
    if v == -math.inf:
        return u
    return float(mpmath.log(mpmath.exp(mpmath.mpf(u)) + mpmath.exp(mpmath.mpf(v))))


def logsumexp_mp(values) -> float:
    total = mpmath.mpf(0)
    for v in values:
        if v != -math.inf:
            total += mpmath.exp(mpmath.mpf(v))
    return float(mpmath.log(total)) if total > 0 else -math.inf


def laplace_cdf_mp(x: float, scale: float) -> float:
    x = mpmath.mpf(x) / mpmath.mpf(scale)
    if x < 0:
        return float(mpmath.exp(x) / 2)
    return float(1 - mpmath.exp(-x) / 2)


def interval_image(f, lo: float, hi: float, steps: int = 2001) -> tuple[float, float]:
    """Empirical image of f over [lo, hi] on a dense grid (monotone pieces
    assumed short relative to the grid)."""
    xs = np.linspace(lo, hi, steps)
    ys = np.asarray([f(x) for x in xs], dtype=np.float64)
    return float(ys.min()), float(ys.max())


def max_column_l1(Q, alphas) -> float:
    """Largest column L1 norm of diag(1/alpha) @ Q, computed entry by entry."""
    Q = np.asarray(Q, dtype=np.float64)
    best = 0.0
    for j in range(Q.shape[1]):
        col = 0.0
        for i in range(Q.shape[0]):
            col += abs(Q[i, j]) / alphas[i]
        best = max(best, col)
    return best


def binom_sf_mp(k: int, n: int, p: float) -> float:
    """P[Bin(n, p) >= k] at high precision."""
    p = mpmath.mpf(p)
    total = mpmath.mpf(0)
    for i in range(k, n + 1):
        total += mpmath.binomial(n, i) * p**i * (1 - p) ** (n - i)
    return float(total)


def multiset_distance(rows_a, rows_b) -> int:
    ca, cb = collections.Counter(rows_a), collections.Counter(rows_b)
    return sum(abs(ca[r] - cb[r]) for r in set(ca) | set(cb))


def all_multisets(pool, max_rows: int):
    """Every multiset over `pool` with at most max_rows elements."""
    out = []
    for n in range(max_rows + 1):
        out.extend(collections.Counter(c) for c in
                   itertools.combinations_with_replacement(pool, n))
    return out


def laplace_sample_variance_target(sensitivity: float, eps: float) -> float:
    return 2.0 * (sensitivity / eps) ** 2


def anderson_darling_reference(sample, cdf) -> float:
    """Textbook A-squared, straight from the order-statistic formula."""
    y = np.sort(np.asarray(sample, dtype=np.float64))
    n = len(y)
    f = np.clip(np.asarray([cdf(v) for v in y]), 1e-300, 1 - 1e-16)
    i = np.arange(1, n + 1)
    s = np.sum((2 * i - 1) * (np.log(f) + np.log1p(-f[::-1])))
    return float(-n - s / n)
