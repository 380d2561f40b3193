"""Finite-time TASEP correlation kernels and their large-time limits.

System B (``x_n(0) = -n`` for ``n >= -M+1``, the first ``M`` particles of
rate ``alpha``) is a step-type TASEP with generic rates, so

    P(x_n(t) >= xi) = det(1 - K)_{l2({x < xi})}

with the double contour kernel

    K(x, y) = (2 pi i)^-2 oint_w oint_z  e^{t/w} w^x (1-w)^n (1/w - alpha)^M
              / (e^{t/z} z^{y+1} (1-z)^n (1/z - alpha)^M (w - z)),

``z`` encircling 1 and 1/alpha (not 0) and ``w`` encircling 0 and the
``z`` contour.  The ``w = z`` pole contributes nothing because the ``z``
contour does not enclose 0.
"""

import math
from dataclasses import dataclass

import numpy as np

from .fredholm import ConvergenceError, DetResult, KernelSpec, fredholm_det
from .rmt import ContourQuadrature, gue_kernel_contour


class ContourError(ValueError):
    """Contour parameters violate the minimum separation from a pole."""


def _circle(center, radius, nodes, cluster=1.0, phase=0.0):
    """Trapezoid nodes on a circle and the weights of ``(2 pi i)^-1 dz``.

    ``cluster < 1`` concentrates nodes near angle ``phase`` through the
    periodic map ``theta = 2 arctan(cluster tan(phi / 2))``.
    """
    phi = 2.0 * np.pi * (np.arange(nodes) + 0.5) / nodes - np.pi
    theta = 2.0 * np.arctan(cluster * np.tan(phi / 2.0))
    dtheta = cluster * (1.0 + np.tan(phi / 2.0) ** 2) / (1.0 + (cluster * np.tan(phi / 2.0)) ** 2)
    e = np.exp(1j * (theta + phase))
    z = center + radius * e
    # dz / (2 pi i) = r e^{i theta} dtheta / (2 pi); dphi = 2 pi / nodes
    wts = radius * e * dtheta / nodes
    return z, wts


@dataclass
class FiniteTimeContours:
    """Contours for the system-B kernel.

    ``z``: circles of radius ``r_one`` about 1 and ``r_alpha`` about 1/alpha;
    ``w``: circle of radius ``R_w`` about 0.  ``min_sep`` is the smallest
    allowed distance between a contour and a singularity it must avoid.
    """

    r_one: float = 0.4
    r_alpha: float = 0.4
    R_w: float = None
    nodes: int = 128
    min_sep: float = 0.05

    def placed(self, alpha, M):
        a = 1.0 / alpha
        if M > 0 and alpha >= 1.0:
            raise ContourError("alpha must be below 1 so the poles 1 and 1/alpha separate")
        r1, ra = self.r_one, self.r_alpha
        if 1.0 - r1 < self.min_sep:
            raise ContourError("z contour around 1 too close to 0")
        if M > 0 and a - 1.0 - r1 - ra < self.min_sep:
            raise ContourError("z contours around 1 and 1/alpha too close")
        zmax = max(1.0 + r1, a + ra if M > 0 else 0.0)
        R = self.R_w if self.R_w is not None else 2.0 * zmax + 1.0
        if R - zmax < self.min_sep:
            raise ContourError("w contour too close to the z contour")
        return r1, ra, R


def default_contours(alpha, M, nodes=128):
    """Radii keeping the two z circles apart for any alpha in (0, 1)."""
    gap = 1.0 / alpha - 1.0 if M > 0 else 2.0
    r = min(0.4, gap / 3.0)
    return FiniteTimeContours(r_one=r, r_alpha=r, nodes=nodes)


def _finite_time_factors(n, t, alpha, M, contours):
    r1, ra, R = contours.placed(alpha, M)
    N = contours.nodes
    w, ww = _circle(0.0, R, N)
    z1, wz1 = _circle(1.0, r1, N)
    if M > 0:
        za, wza = _circle(1.0 / alpha, ra, N)
        z = np.concatenate([z1, za])
        wz = np.concatenate([wz1, wza])
    else:
        z, wz = z1, wz1
    logFw = t / w + n * np.log(1.0 - w) + M * np.log(1.0 / w - alpha)
    logGz = t / z + n * np.log(1.0 - z) + M * np.log(1.0 / z - alpha)
    return w, ww, logFw, z, wz, logGz


def finite_time_kernel(x, y, n, t, alpha, M, contours=None):
    """System-B kernel ``K(x_i, y_j)`` for integer arrays ``x`` and ``y``.

    Scalars give a scalar.  Values are complex; the imaginary part is
    quadrature noise.
    """
    if n < 1 or t <= 0 or M < 0 or not 0.0 < alpha <= 1.0:
        raise ValueError("need n >= 1, t > 0, M >= 0, alpha in (0, 1]")
    scalar = np.ndim(x) == 0 and np.ndim(y) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    if np.any(xs != np.round(xs)) or np.any(ys != np.round(ys)):
        raise ValueError("lattice kernel needs integer arguments")
    c = contours or default_contours(alpha, M)
    w, ww, logFw, z, wz, logGz = _finite_time_factors(n, t, alpha, M, c)
    A = np.exp(np.outer(xs, np.log(w)) + logFw[None, :]) * ww[None, :]
    B = np.exp(-np.outer(np.log(z), ys + 1.0) - logGz[:, None]) * wz[:, None]
    C = 1.0 / (w[:, None] - z[None, :])
    K = A @ (C @ B)
    return K[0, 0] if scalar else K


def finite_time_spec(xi, n, t, alpha, M, span=None, contours=None, tol=1e-8):
    """Lattice KernelSpec on ``{xi-1, xi-2, ...}`` for system B."""
    c = contours or default_contours(alpha, M)
    # rows below -(n + M) only feed the tail; start wide enough to cover the
    # occupied region of the tracked particle
    if span is None:
        span = max(16, int(xi + n + M + 8 + 2 * t))

    def ev(x, y):
        return finite_time_kernel(x, y, n, t, alpha, M, c)

    return KernelSpec(ev, a=float(xi), span=span, lattice=True, tol=tol,
                      params=dict(n=n, t=t, alpha=alpha, M=M))


def finite_time_cdf(xi, n, t, alpha, M, contours=None, tol=1e-8):
    """``P(x_n(t) >= xi)`` for system B, with a section-doubling error."""
    spec = finite_time_spec(xi, n, t, alpha, M, contours=contours, tol=tol)
    return fredholm_det(spec)


# -- large-time scaling ----------------------------------------------------------------

def f0(w, alpha):
    """Leading exponent: ``1/w + (alpha - 1/2) ln w + (1 - alpha)/2 ln(1 - w)``."""
    w = np.asarray(w, dtype=complex)
    return 1.0 / w + (alpha - 0.5) * np.log(w) + 0.5 * (1.0 - alpha) * np.log(1.0 - w)


def f0_prime(w, alpha):
    return -1.0 / w ** 2 + (alpha - 0.5) / w - 0.5 * (1.0 - alpha) / (1.0 - w)


def f1(w, s, alpha, eta, sigma):
    """Subleading exponent: ``-(2 eta + s sigma) ln w + eta ln(1 - w)``."""
    w = np.asarray(w, dtype=complex)
    return -(2.0 * eta + s * sigma) * np.log(w) + eta * np.log(1.0 - w)


@dataclass
class CriticalPoints:
    points: tuple
    re_f0: tuple
    residuals: tuple

    @property
    def ordered(self):
        # Re f0(1/alpha) < Re f0(2)
        return self.re_f0[1] < self.re_f0[0]


def f0_f1_critical_points(alpha, tol=1e-10):
    """Critical points of ``f0``: the roots 2 and 1/alpha of
    ``alpha w^2 - (2 alpha + 1) w + 2``, with the real-part ordering check."""
    if not 0.0 < alpha < 0.5:
        raise ValueError("alpha must lie in (0, 1/2)")
    if 0.5 - alpha < 1e-6:
        raise ValueError("critical points merge as alpha -> 1/2")
    roots = np.sort(np.roots([alpha, -(2.0 * alpha + 1.0), 2.0]).real)
    res = tuple(float(abs(f0_prime(r, alpha))) for r in roots)
    if max(res) > tol:
        raise ConvergenceError("critical point residual", max(res))
    re = tuple(float(f0(r, alpha).real) for r in roots)
    cp = CriticalPoints(tuple(float(r) for r in roots), re, res)
    if not cp.ordered:
        raise ValueError("critical values out of order")
    return cp


@dataclass
class RescaledContours:
    """Contours for the large-time kernel, in units of the scaling window.

    ``w``: circle ``|w| = a + eps d`` with ``a = 1/alpha`` and
    ``d = a / (sigma sqrt t)``, nodes clustered near the real axis; ``z``:
    circle of radius ``eps d / 2`` about ``a`` plus a circle of radius
    ``r_one`` about 1 passing near the other critical point 2.
    """

    eps: float = 1.0
    nw: int = 384
    nz: int = 64
    n_one: int = 256
    r_one: float = 0.95
    window: float = 6.0


def _rescaled_factors(t, alpha, eta, M, n, q):
    a = 1.0 / alpha
    sigma = math.sqrt(alpha * (1 - 2 * alpha) / (2 * (1 - alpha)))
    d = a / (sigma * math.sqrt(t))
    cl = min(1.0, q.window * d / a)
    w, ww = _circle(0.0, a + q.eps * d, q.nw, cluster=cl)
    za, wza = _circle(a, 0.5 * q.eps * d, q.nz)
    cl1 = min(1.0, q.window / math.sqrt(t))
    z1, wz1 = _circle(1.0, q.r_one, q.n_one, cluster=cl1)
    z = np.concatenate([za, z1])
    wz = np.concatenate([wza, wz1])
    # subtract the value at w = a so the exponents stay O(1) near the window
    ref = t / a + n * np.log(complex(1.0 - a))
    Lw = t / w + n * np.log(1.0 - w) + M * np.log(1.0 / w - alpha) - ref
    Lz = t / z + n * np.log(1.0 - z) + M * np.log(1.0 / z - alpha) - ref
    return a, sigma, w, ww, Lw, z, wz, Lz


def rescaled_kernel(t, alpha, eta, M, s1, s2, quad=None):
    """Conjugated, rescaled system-B kernel on lattice points near ``x(s)``.

    Returns ``(K, s1_eff, s2_eff)``: ``K[i, j]`` is
    ``sigma sqrt(t) K(x_i, y_j) a^{y_j - x_i}`` at the integer points
    ``x_i = round(x(s1_i))``, ``y_j = round(x(s2_j))``, and ``s_eff`` are the
    scaling variables of those integer points.  ``a^{y - x}`` is the
    conjugation ``exp(sqrt t (f1(a, s2) - f1(a, s1)))`` written in lattice
    units.
    """
    q = quad or RescaledContours()
    sigma = math.sqrt(alpha * (1 - 2 * alpha) / (2 * (1 - alpha)))
    n = int(math.floor((1 - alpha) * t / 2 + eta * math.sqrt(t)))
    # effective eta of the integer label, used consistently in x(s) and xi_c
    eta_e = (n - (1 - alpha) * t / 2) / math.sqrt(t)
    center = (alpha - 0.5) * t - 2 * eta_e * math.sqrt(t)
    scale = sigma * math.sqrt(t)
    xs = np.round(center - np.asarray(s1, float) * scale)
    ys = np.round(center - np.asarray(s2, float) * scale)
    a, sigma, w, ww, Lw, z, wz, Lz = _rescaled_factors(t, alpha, eta_e, M, n, q)
    lw = np.log(w) - math.log(a)
    lz = np.log(z) - math.log(a)
    A = np.exp(np.outer(xs, lw) + Lw[None, :]) * ww[None, :]
    B = np.exp(-np.outer(lz, ys) - np.log(z)[:, None] - Lz[:, None]) * wz[:, None]
    C = 1.0 / (w[:, None] - z[None, :])
    K = scale * (A @ (C @ B))
    return K, (center - xs) / scale, (center - ys) / scale, eta_e


def rescaled_kernel_gap(t, alpha, eta, M, grid, quad=None, with_details=False):
    """``sup |K_resc - K_GUE(M)(s1 + xi_c, s2 + xi_c)|`` over ``grid x grid``.

    The lattice points nearest to ``x(s)`` are used and the limit kernel is
    evaluated at their exact scaling coordinates.
    """
    if not 0.0 < alpha < 0.5:
        raise ValueError("alpha must lie in (0, 1/2)")
    grid = np.asarray(grid, dtype=float)
    K, se1, se2, eta_e = rescaled_kernel(t, alpha, eta, M, grid, grid, quad)
    xi_c = eta_e * math.sqrt(2 * (1 - 2 * alpha) / (alpha * (1 - alpha)))
    G = gue_kernel_contour(M, ContourQuadrature())(se1 + xi_c, se2 + xi_c)
    gap = float(np.max(np.abs(K.real - G)))
    if with_details:
        return gap, dict(imag=float(np.max(np.abs(K.imag))), eta_eff=eta_e, xi_c=xi_c,
                         K=K, target=G, s1=se1, s2=se2)
    return gap


