"""Empirical distribution functions, Kolmogorov-Smirnov distances, intervals."""

from dataclasses import dataclass

import numpy as np
from scipy import stats as _st


@dataclass
class ECDF:
    """Right-continuous empirical distribution function of ``values``."""

    values: np.ndarray

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float).ravel())
        if v.size == 0:
            raise ValueError("empty sample")
        self.values = v

    @property
    def n(self):
        return self.values.size

    def __call__(self, s):
        return np.searchsorted(self.values, s, side="right") / self.n

    def left(self, s):
        """Left limit ``P(X < s)``."""
        return np.searchsorted(self.values, s, side="left") / self.n

    def quantile(self, p):
        return float(np.quantile(self.values, p))


def ecdf(samples):
    return ECDF(samples)


def ks_distance(e, cdf):
    """``sup |ECDF - F|`` evaluated on both sides of every jump.

    ``cdf`` is vectorized; ties in the sample are handled by taking the
    ECDF value after and before each distinct point.
    """
    if not isinstance(e, ECDF):
        e = ECDF(e)
    pts = np.unique(e.values)
    F = np.asarray(cdf(pts), dtype=float)
    # left limits of F matter only when the reference has atoms
    F_left = np.asarray(cdf(np.nextafter(pts, -np.inf)), dtype=float)
    after = e(pts)
    before = e.left(pts)
    return float(max(np.max(np.abs(after - F)), np.max(np.abs(before - F_left))))


def ks_two_sample(a, b):
    """Two-sample KS statistic and p-value."""
    r = _st.ks_2samp(a, b)
    return float(r.statistic), float(r.pvalue)


def ks_band(n, level=0.95):
    """Asymptotic one-sample KS critical value ``c(level) / sqrt(n)``."""
    return float(_st.kstwobign.ppf(level) / np.sqrt(n))


def wilson(k, n, z=1.959963984540054):
    """Wilson score interval for ``k`` successes in ``n`` trials."""
    if n <= 0:
        raise ValueError("need at least one trial")
    p = k / n
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    # the edges are exactly 0 and 1 at the extremes; rounding would leave ~1e-18
    lo = 0.0 if k == 0 else max(0.0, mid - half)
    hi = 1.0 if k == n else min(1.0, mid + half)
    return float(p), float(lo), float(hi)


def proportion(mask):
    """Point estimate and Wilson interval of the mean of a boolean array."""
    mask = np.asarray(mask, dtype=bool)
    p, lo, hi = wilson(int(mask.sum()), mask.size)
    return dict(p=p, lo=lo, hi=hi, n=int(mask.size))
