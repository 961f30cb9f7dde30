"""Independent reference computations used as test oracles.

Nothing here imports the package's numerical code: each oracle re-derives
its answer by exhaustive enumeration, exact rational arithmetic or a
closed form.
"""

from __future__ import annotations

import math
from fractions import Fraction


def enumerate_posterior(pmf: dict, t_past, n: int = 1) -> dict:
    """Exact posterior by enumerating every support value with Fractions."""
    t_past = Fraction(t_past)
    mass = {}
    for t_total, p in pmf.items():
        t = Fraction(t_total)
        if t >= t_past and t > 0:
            mass[t_total] = Fraction(p) * (1 / t) ** n
    total = sum(mass.values())
    if total == 0:
        raise ValueError("empty posterior")
    return {k: v / total for k, v in mass.items()}


def enumerate_median(post: dict):
    acc = Fraction(0)
    for k in sorted(post):
        acc += post[k]
        if acc >= Fraction(1, 2):
            return k
    raise AssertionError("pmf does not sum to one")


def enumerate_mean(post: dict) -> Fraction:
    return sum(Fraction(k) * v for k, v in post.items())


def scan_nearest(column, lambdas, target):
    """Plain linear scan: first lambda with minimal |entry - target|."""
    best = None
    for lam, entry in zip(lambdas, column):
        if entry is None or (isinstance(entry, float) and math.isnan(entry)):
            continue
        err = abs(entry - target)
        if best is None or err < best[0]:
            best = (err, lam)
    return best


def logistic_cdf(x: float, center: float, scale: float) -> float:
    return 1.0 / (1.0 + math.exp(-(x - center) / scale))


def mixture_median_bin(components, n_bins: int = 101) -> int:
    """Bin containing the median of a symmetric-logistic mixture restricted to [0, 1]."""
    def cdf(x):
        return sum(w * logistic_cdf(x, c, s) for c, s, w in components)

    lo, hi = cdf(0.0), cdf(1.0)
    for i in range(n_bins):
        if (cdf((i + 1) / n_bins) - lo) / (hi - lo) >= 0.5:
            return i
    return n_bins - 1
