"""Direct determinant for the shock system with one slow particle.

``P(x_n(t) >= x) = det(1 - chi K chi - chi f (x) g chi)`` on the sites below
``x``, with ``(f (x) g)(u, v) = f(u) g(v)``.  The representation counts the
slow particle as the first one, so its index is ``N = n + 1``.  Every entry
is a residue sum; the coefficient families obey first-order recurrences:

    c_a    = [w^a] e^{tw} (w-1)^{N-1}
    D(k)_a = [v^a] e^{-tau v} (1+v)^k

    f(u)    = c_{u+N-1}                      (zero for u <= -N)
    K2(u,v) = (-1)^u e^{-t} D(v+2N-2; 2t)_{u+2N-2}
    K1(u,v) = -e^{-t} sum_j c_{m-1-j} (D(k-j-1; t)_{N-2} + (-1)^j D(k; t)_{N+j-1}),
              m = u + N > 0,  k = v + N - 1
    g(v)    = (-1)^{N-1} alpha^p e^{-t alpha} (1-alpha)^{-(N-1)}  (+ a pole at 0
              when p = v + N - 1 < 0)

``K = K1 + K2`` has no non-zero rows at or below ``-2N+1``, so the finite
section over ``[-2N+2, x)`` is exact.  The probability is assembled as

    det(1 - K) (1 - <g, f> - <g, (1 - K)^-1 K f>)

with a dense solve.  In double precision the last term is the difference of
numbers many orders of magnitude larger than itself; the ``mp`` backend
evaluates the same finite expressions with enough digits to resolve it.
"""

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np


class ConditioningError(RuntimeError):
    """The resolvent term cannot be resolved at the working precision."""

    def __init__(self, cond, bound):
        super().__init__(f"resolvent term unresolved: condition {cond:.3e}, "
                         f"error bound {bound:.3e}")
        self.cond = cond
        self.bound = bound


class _Float:
    name = "double"
    eps = np.finfo(float).eps

    def num(self, v):
        return float(v)

    def exp(self, v):
        return math.exp(v)


class _MP:
    name = "mp"

    def __init__(self, dps):
        self.dps = dps
        self.eps = mpmath.mpf(10) ** (-dps)

    def num(self, v):
        return mpmath.mpf(v)

    def exp(self, v):
        return mpmath.exp(v)


def _c_coeffs(ctx, N, t, amax):
    h = [ctx.num(0)] * (amax + 1)
    if amax < 0:
        return h
    h[0] = ctx.num((-1) ** (N - 1))
    prev = ctx.num(0)
    for a in range(amax):
        nxt = ((a - (N - 1) + t) * h[a] - t * prev) / (a + 1)
        prev = h[a]
        h[a + 1] = nxt
    return h


def _d_coeffs(ctx, k, tau, amax):
    h = [ctx.num(0)] * (amax + 1)
    if amax < 0:
        return h
    h[0] = ctx.num(1)
    prev = ctx.num(0)
    for a in range(amax):
        nxt = ((k - tau - a) * h[a] - tau * prev) / (a + 1)
        prev = h[a]
        h[a + 1] = nxt
    return h


@dataclass
class ShockKernelParts:
    """``K``, ``f`` and ``g`` on the exact finite section ``sites`` below ``x``.

    ``f`` vanishes below ``-N+1``, so ``<g chi_x, f>`` has no tail
    (``tail = 0``).
    """

    x: int
    n: int
    t: float
    alpha: float
    sites: np.ndarray
    K: list
    f: list
    g: list
    backend: str
    dps: int = None
    tail: float = 0.0


def default_dps(n, t):
    """Digits needed to resolve the resolvent term: ``g`` grows like
    ``t^N / N!`` on the far left of the section."""
    N = n + 1
    mag = N * math.log10(max(t, math.e)) - math.lgamma(N + 1) / math.log(10)
    return int(30 + max(0, math.ceil(mag)) + math.ceil(math.log10(t + 1.0)) * 4)


def shock_direct_parts(x, n, t, alpha, backend="mp", dps=None):
    """Kernel pieces for ``P(x_n(t) >= x)``; ``backend`` is ``"double"`` or ``"mp"``."""
    if not 0.0 < alpha < 0.5:
        raise ValueError("alpha must lie in (0, 1/2)")
    if n < 1 or t <= 0:
        raise ValueError("need n >= 1 and t > 0")
    N = n + 1
    x = int(x)
    if backend == "double":
        ctx = _Float()
    elif backend == "mp":
        dps = dps or default_dps(n, t)
        ctx = _MP(dps)
    else:
        raise ValueError("backend must be 'double' or 'mp'")
    with mpmath.workdps(dps or 15):
        T = ctx.num(t)
        al = ctx.num(alpha)
        lo = -2 * N + 2
        sites = np.arange(lo, x) if x > lo else np.arange(0)
        L = len(sites)
        zero = ctx.num(0)
        et = ctx.exp(-T)

        c = _c_coeffs(ctx, N, T, max(x + N - 1, 0))
        f = [c[u + N - 1] if u + N > 0 else zero for u in sites]

        # g: closed-form pole at u = alpha plus the pole at 0 for p < 0
        pmin = lo + N - 1
        base = ctx.exp(-T * al) * (1 - al) ** (-(N - 1)) * (-1) ** (N - 1)
        kmax = max(-pmin - 1, 0)
        e = _d_coeffs(ctx, -(N - 1), -T, kmax)
        s0 = [(-1) ** a * e[a] * (-1) ** (N - 1) for a in range(kmax + 1)]
        geo = [-(al ** (-i - 1)) - (1 - al) ** (-i - 1) for i in range(kmax + 1)]
        S = [sum((s0[i] * geo[a - i] for i in range(a + 1)), zero) for a in range(kmax + 1)]
        g = []
        for v in sites:
            p = int(v) + N - 1
            val = base * al ** p
            if p < 0:
                val += S[-p - 1]
            g.append(val)

        cache = {}

        def D(k, tau_key, a):
            if a < 0:
                return zero
            key = (k, tau_key)
            arr = cache.get(key)
            if arr is None or len(arr) <= a:
                tau = T if tau_key == 1 else 2 * T
                arr = _d_coeffs(ctx, k, tau, max(a, 4 * N + L))
                cache[key] = arr
            return arr[a]

        K = [[zero] * L for _ in range(L)]
        for i, u in enumerate(sites):
            u = int(u)
            m = u + N
            q = u + 2 * N - 1
            sgn = (-1) ** (u % 2)
            for j, v in enumerate(sites):
                v = int(v)
                val = zero
                if q > 0:
                    val += sgn * et * D(v + 2 * N - 2, 2, q - 1)
                if m > 0:
                    k = v + N - 1
                    acc = zero
                    for jj in range(m):
                        acc += c[m - 1 - jj] * (D(k - jj - 1, 1, N - 2)
                                                + (-1) ** jj * D(k, 1, N + jj - 1))
                    val -= et * acc
                K[i][j] = val
    return ShockKernelParts(x, n, t, alpha, sites, K, f, g, ctx.name, dps)


@dataclass
class ShockDirectResult:
    """The three factors, their product and conditioning data."""

    x: int
    n: int
    t: float
    alpha: float
    backend: str
    dps: int
    det_K: float
    scalar: float
    resolvent: float
    probability: float
    cond: float
    amplification: float
    error: float
    params: dict = field(default_factory=dict)


def _assemble(parts):
    """Return (det, scalar, resolvent, cond, sum |g_i h_i|) at the parts' precision."""
    L = len(parts.sites)
    if L == 0:
        return 1.0, 0.0, 0.0, 1.0, 0.0
    if parts.backend == "double":
        K = np.array(parts.K, dtype=float)
        f = np.array(parts.f, dtype=float)
        g = np.array(parts.g, dtype=float)
        A = np.eye(L) - K
        det = float(np.linalg.det(A))
        h = np.linalg.solve(A, K @ f)
        cond = float(np.linalg.cond(A, 1))
        return det, float(g @ f), float(g @ h), cond, float(np.sum(np.abs(g * h)))
    with mpmath.workdps(parts.dps):
        K = mpmath.matrix(parts.K)
        A = mpmath.eye(L) - K
        Ainv = mpmath.inverse(A)
        det = mpmath.det(A)
        fv = mpmath.matrix(parts.f)
        h = Ainv * (K * fv)
        sc = mpmath.fsum(gi * fi for gi, fi in zip(parts.g, parts.f))
        res = mpmath.fsum(parts.g[i] * h[i] for i in range(L))
        cond = mpmath.norm(A, 1) * mpmath.norm(Ainv, 1)
        amp = mpmath.fsum(abs(parts.g[i] * h[i]) for i in range(L))
        return det, sc, res, cond, amp


def shock_direct_cdf(x, n, t, alpha, backend="mp", dps=None, tol=1e-6, check=True):
    """``P(x_n(t) >= x)`` in the shock system with ``M = 1`` by the direct
    rank-one-perturbed determinant.

    ``backend="mp"`` evaluates twice (``dps`` and ``dps + 20`` digits) and
    reports the difference as the error.  ``backend="double"`` reports the
    first-order rounding bound ``eps * cond * sum |g_i h_i|``; with
    ``check`` it raises :class:`ConditioningError` when that bound exceeds
    ``tol``, which happens already at moderate ``t``.
    """
    parts = shock_direct_parts(x, n, t, alpha, backend, dps)
    det, sc, res, cond, amp = _assemble(parts)
    prob = det * (1 - sc - res)
    if backend == "mp":
        hi = shock_direct_parts(x, n, t, alpha, "mp", parts.dps + 20)
        d2, s2, r2, _, _ = _assemble(hi)
        with mpmath.workdps(parts.dps + 20):
            err = float(abs(d2 * (1 - s2 - r2) - prob))
        det, sc, res, prob, cond, amp = (float(v) for v in (det, sc, res, prob, cond, amp))
    else:
        err = float(np.finfo(float).eps * cond * max(amp, 1.0))
    out = ShockDirectResult(int(x), n, t, alpha, backend, parts.dps, det, sc, res, prob,
                            cond, amp / max(abs(res), 1e-300), err)
    if check and err > tol:
        raise ConditioningError(cond, err)
    return out


def scalar_term(x, n, t, alpha, dps=None):
    """``<g chi_x, f>`` alone; cheap because ``f`` vanishes below ``-N+1``."""
    N = n + 1
    dps = dps or default_dps(n, t)
    ctx = _MP(dps)
    with mpmath.workdps(dps):
        T = ctx.num(t)
        al = ctx.num(alpha)
        c = _c_coeffs(ctx, N, T, max(x + N - 1, 0))
        base = mpmath.exp(-T * al) * (1 - al) ** (-(N - 1)) * (-1) ** (N - 1)
        # on the support of f, p = u + N - 1 >= 0 so g is the closed form
        return float(mpmath.fsum(base * al ** (u + N - 1) * c[u + N - 1]
                                 for u in range(-N + 1, x)))
