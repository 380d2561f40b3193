"""Reference laws from random matrix theory.

Conventions follow the GUE(M) density ``exp(-Tr H^2 / 2)``: diagonal
entries are N(0, 1) and off-diagonal real and imaginary parts have
variance 1/2.  The largest eigenvalue of GUE(1) is standard normal.
"""

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, special

from .fredholm import ConvergenceError, KernelSpec, fredholm_det, gauss_legendre

AIRY_DOMAIN = 40.0


# -- Airy ---------------------------------------------------------------------------

def _airy_domain(x):
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > AIRY_DOMAIN):
        raise ValueError(f"Airy evaluation outside [-{AIRY_DOMAIN}, {AIRY_DOMAIN}]")
    return x


def airy_ai(x):
    """Ai(x) for ``|x| <= 40``."""
    return special.airy(_airy_domain(x))[0]


def airy_ai_prime(x):
    """Ai'(x) for ``|x| <= 40``."""
    return special.airy(_airy_domain(x))[1]


# -- GUE sampling ---------------------------------------------------------------------

def sample_gue(M, rng, size=None):
    """GUE(M) matrices with density proportional to ``exp(-Tr H^2 / 2)``."""
    shape = (M, M) if size is None else (size, M, M)
    G = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return 0.5 * (G + np.conj(np.swapaxes(G, -1, -2)))


def sample_gue_max(M, rng, size=None, chunk=100_000):
    """Largest eigenvalue of GUE(M) draws (dense Hermitian solve)."""
    if M < 1:
        raise ValueError("M must be at least 1")
    if size is None:
        return float(np.linalg.eigvalsh(sample_gue(M, rng))[-1])
    out = np.empty(size)
    for lo in range(0, size, chunk):
        n = min(chunk, size - lo)
        out[lo:lo + n] = np.linalg.eigvalsh(sample_gue(M, rng, n))[:, -1]
    return out


def sample_gue_max_tridiagonal(M, rng, size):
    """Largest GUE(M) eigenvalue via the Dumitriu-Edelman tridiagonal model.

    Same law as :func:`sample_gue_max`, at O(M) cost per draw.
    """
    out = np.empty(size)
    dof = 2.0 * np.arange(M - 1, 0, -1)
    for k in range(size):
        d = rng.standard_normal(M)
        e = np.sqrt(rng.chisquare(dof) / 2.0)
        out[k] = linalg.eigvalsh_tridiagonal(d, e, select="i",
                                             select_range=(M - 1, M - 1))[0]
    return out


# -- GUE(M) largest-eigenvalue law --------------------------------------------------

def hermite_functions(M, x):
    """``phi_j(x)`` for ``j < M``, orthonormal on the line.

    ``phi_j = He_j(x) exp(-x^2/4) / sqrt(j! sqrt(2 pi))``, computed by the
    three-term recurrence.
    """
    x = np.asarray(x, dtype=float)
    phi = np.empty((M,) + x.shape)
    phi[0] = np.exp(-x * x / 4.0) / (2.0 * np.pi) ** 0.25
    if M > 1:
        phi[1] = x * phi[0]
    for j in range(1, M - 1):
        phi[j + 1] = (x * phi[j] - math.sqrt(j) * phi[j - 1]) / math.sqrt(j + 1)
    return phi


def _gram_below(M, s, nodes):
    # Gram matrix of the phi_j on (-inf, s); the integrand is negligible
    # below -(2 sqrt(M) + 14)
    left = -(2.0 * math.sqrt(M) + 14.0)
    if s <= left:
        return np.zeros((M, M))
    panels = max(1, int(math.ceil((s - left) / 2.0)))
    x, w = gauss_legendre(left, s, nodes, panels)
    phi = hermite_functions(M, x)
    return (phi * w) @ phi.T


def gue_m_cdf(s, M, tol=1e-12, nodes=16):
    """P(largest eigenvalue of GUE(M) <= s) by Hermite projection.

    The eigenvalues form a determinantal process with the rank-M kernel
    ``sum_j phi_j(x) phi_j(y)``, so the gap probability on ``(s, inf)`` is
    the M x M determinant of the Gram matrix of the phi_j on ``(-inf, s)``.
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    if not np.isfinite(s):
        raise ValueError("s must be finite")
    d1 = np.linalg.det(_gram_below(M, s, nodes))
    d2 = np.linalg.det(_gram_below(M, s, 2 * nodes))
    err = abs(d2 - d1)
    if err > tol:
        raise ConvergenceError("GUE(M) quadrature", err)
    return float(min(max(d2, 0.0), 1.0))


@dataclass
class ContourQuadrature:
    """Quadrature for the GUE(M) double contour kernel.

    ``z`` runs over the circle ``|z| = eps/2`` (trapezoid, ``nz`` nodes);
    ``w`` over ``eps + i y`` with ``|y| <= height`` (trapezoid, step ``h``).
    """

    eps: float = 1.0
    nz: int = 64
    height: float = 12.0
    h: float = 0.04


def gue_kernel_contour(M, quad=None):
    """Evaluator ``(x, y) -> K_GUE(M)(x_i, y_j)`` from the double contour integral.

    ``K(s1, s2) = (2 pi i)^-2 oint dz int dw exp(w^2/2 - w s1) / exp(z^2/2 - z s2)
    (w/z)^M / (w - z)``, both contours positively oriented.
    """
    q = quad or ContourQuadrature()
    theta = 2.0 * np.pi * np.arange(q.nz) / q.nz
    z = 0.5 * q.eps * np.exp(1j * theta)
    y = np.arange(-q.height, q.height + q.h / 2, q.h)
    w = q.eps + 1j * y
    # dz = i z dtheta, dw = i dy; (2 pi i)^-2 (i)(i) = 1 / (4 pi^2)
    a = q.h / (2.0 * np.pi) * np.exp(w * w / 2.0) * w ** M
    b = z ** (1 - M) * np.exp(-z * z / 2.0) / q.nz
    C = 1.0 / (w[:, None] - z[None, :])
    CB = C * b[None, :]

    def evaluator(x, yy):
        Ew = np.exp(-np.outer(x, w)) * a[None, :]
        Ez = np.exp(np.outer(z, yy))
        return (Ew @ CB @ Ez).real

    return evaluator


def contour_tail_bound(M, s, quad):
    """Bound on the neglected part of the vertical ``w`` line."""
    L = quad.height
    return (math.exp((quad.eps ** 2 - L * L) / 2.0 - quad.eps * s) * (L + quad.eps) ** M
            * math.exp(quad.eps * abs(s) / 2.0) / (2.0 * np.pi * L))


def gue_m_cdf_contour(s, M, eps=1.0, quad=None, nodes=64, tol=1e-9):
    """P(largest eigenvalue of GUE(M) <= s) as a Fredholm determinant of the
    contour-integral kernel on ``(s, inf)``."""
    q = quad or ContourQuadrature(eps=eps)
    if q.eps != eps and quad is not None:
        eps = q.eps
    tail = contour_tail_bound(M, s, q)
    if tail > tol:
        raise ConvergenceError("contour truncation", tail)
    upper = max(s, 0.0) + 2.0 * math.sqrt(M) + 10.0
    spec = KernelSpec(gue_kernel_contour(M, q), a=s, span=upper - s, nodes=nodes,
                      panels=2, tol=tol)
    return fredholm_det(spec).value


# -- Tracy-Widom -------------------------------------------------------------------

def airy_kernel(x, y):
    """``(Ai(x)Ai'(y) - Ai'(x)Ai(y)) / (x - y)`` with its diagonal limit."""
    ax, apx = special.airy(_airy_domain(x))[:2]
    ay, apy = special.airy(_airy_domain(y))[:2]
    X = x[:, None]
    Y = y[None, :]
    num = ax[:, None] * apy[None, :] - apx[:, None] * ay[None, :]
    diff = X - Y
    same = np.abs(diff) < 1e-12
    K = np.where(same, 0.0, num / np.where(same, 1.0, diff))
    diag = apx[:, None] ** 2 - X * ax[:, None] ** 2
    return np.where(same, diag, K)


def tracy_widom_spec(s, beta, nodes=64):
    """KernelSpec whose determinant is F_beta(s).

    beta=2: Airy kernel on ``(s, inf)``; beta=1: ``Ai(x + y + s)`` on
    ``(0, inf)``.  Both half-lines are truncated where Ai has decayed below
    1e-20 and mapped affinely to Gauss-Legendre nodes.
    """
    if beta == 2:
        # Ai(x) < 1e-20 beyond x = 16
        upper = max(s + 4.0, 16.0)
        return KernelSpec(airy_kernel, a=s, span=upper - s, nodes=nodes, panels=1)
    if beta == 1:
        # entries outside the box have x + y + s > span + s >= 16
        span = max(16.0 - s, 4.0)

        def ev(x, y):
            return airy_ai(x[:, None] + y[None, :] + s)

        return KernelSpec(ev, a=0.0, span=span, nodes=nodes, panels=1)
    raise ValueError("beta must be 1 or 2")


def tracy_widom_cdf(s, beta, nodes=64, tol=1e-9, with_error=False):
    """Tracy-Widom GOE (beta=1) or GUE (beta=2) distribution function."""
    if not np.isfinite(s):
        raise ValueError("s must be finite")
    if s > 30.0:
        # 1 - F is below 1e-40 here
        return (1.0, 0.0) if with_error else 1.0
    spec = tracy_widom_spec(float(s), beta, nodes)
    spec.tol = tol
    res = fredholm_det(spec)
    val = float(min(max(res.value, 0.0), 1.0))
    return (val, res.error) if with_error else val


def quantile(cdf, p, lo=-10.0, hi=6.0):
    """Inverse of a continuous CDF by bisection-free root finding."""
    from scipy.optimize import brentq
    return brentq(lambda s: cdf(s) - p, lo, hi, xtol=1e-12)


# -- tables ----------------------------------------------------------------------------

@dataclass
class SpectralCDF:
    """A tabulated distribution function with its provenance."""

    method: str
    s: np.ndarray
    F: np.ndarray
    params: dict = field(default_factory=dict)
    errors: np.ndarray = None

    def is_monotone(self):
        return bool(np.all(np.diff(self.F) >= 0))

    def in_unit_interval(self):
        return bool(np.all((self.F >= 0) & (self.F <= 1)))

    def to_csv(self, path):
        errs = self.errors if self.errors is not None else np.full(len(self.s), np.nan)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "F", "method", "params", "error_estimate"])
            p = json.dumps(self.params, sort_keys=True)
            for si, fi, ei in zip(self.s, self.F, errs):
                w.writerow([repr(float(si)), repr(float(fi)), self.method, p, repr(float(ei))])


def tabulate(method, grid, **params):
    """Evaluate one of the reference laws on ``grid``."""
    grid = np.asarray(grid, dtype=float)
    errs = np.zeros(len(grid))
    if method == "hermite_projection":
        F = np.array([gue_m_cdf(s, params["M"]) for s in grid])
    elif method == "contour_fredholm":
        F = np.array([gue_m_cdf_contour(s, params["M"], params.get("eps", 1.0))
                      for s in grid])
    elif method == "airy_fredholm":
        pairs = [tracy_widom_cdf(s, params["beta"], with_error=True) for s in grid]
        F = np.array([p[0] for p in pairs])
        errs = np.array([p[1] for p in pairs])
    else:
        raise ValueError(f"unknown method {method!r}")
    return SpectralCDF(method, grid, F, dict(params), errs)
