"""Counter-based random streams keyed by ``(seed, label, event index)``.

Every random number used by the particle engine is a pure function of its
coordinates, computed with the Philox4x64-10 block cipher.  No generator
state is shared between labels, so streams can be materialized lazily, in
any order, and identically across runs and threads.
"""

import numpy as np
from llvmlite import ir
from numba import njit, types
from numba.extending import intrinsic

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_S11 = np.uint64(11)

# Second key word; distinguishes engine clocks from any other Philox use.
CLOCK_TAG = np.uint64(0x7A5E9C10C4B1D2E3)

_INV53 = 1.0 / 9007199254740992.0


@intrinsic
def _mulhilo(typingctx, a, b):
    """Full 64x64 -> 128 bit product as ``(hi, lo)``; one native multiply."""
    sig = types.UniTuple(types.uint64, 2)(types.uint64, types.uint64)

    def codegen(context, builder, signature, args):
        i128 = ir.IntType(128)
        prod = builder.mul(builder.zext(args[0], i128), builder.zext(args[1], i128))
        hi = builder.trunc(builder.lshr(prod, ir.Constant(i128, 64)), ir.IntType(64))
        lo = builder.trunc(prod, ir.IntType(64))
        return context.make_tuple(builder, signature.return_type, [hi, lo])

    return sig, codegen


@njit(cache=True)
def philox4x64(c0, c1, c2, c3, k0, k1):
    """Philox4x64 with 10 rounds; returns the four output words."""
    for r in range(10):
        if r > 0:
            k0 = k0 + _W0
            k1 = k1 + _W1
        hi0, lo0 = _mulhilo(_M0, c0)
        hi1, lo1 = _mulhilo(_M1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


@njit(inline="always", cache=True)
def _to_unit(word):
    # 53 high bits -> [0, 1)
    return np.float64(word >> _S11) * _INV53


@njit(inline="always", cache=True)
def clock_block(seed, label, block):
    """Interarrivals and marks of events ``2*block`` and ``2*block + 1``."""
    r0, r1, r2, r3 = philox4x64(np.uint64(block), np.uint64(np.int64(label)),
                                np.uint64(0), np.uint64(0), np.uint64(seed), CLOCK_TAG)
    # 1 - U lies in (0, 1], so the log is finite
    return (-np.log(1.0 - _to_unit(r0)), _to_unit(r1),
            -np.log(1.0 - _to_unit(r2)), _to_unit(r3))


@njit(cache=True)
def clock_draw(seed, label, index):
    """Interarrival time and thinning mark of event ``index`` of ``label``.

    Two events share one Philox block; the interarrival is Exp(1) and the
    mark is uniform on [0, 1).
    """
    g0, m0, g1, m1 = clock_block(seed, label, index >> 1)
    if index & 1:
        return g1, m1
    return g0, m0


@njit(cache=True)
def _stream(seed, label, horizon):
    cap = int(horizon + 10.0 * np.sqrt(horizon + 1.0) + 16.0)
    times = np.empty(cap, np.float64)
    marks = np.empty(cap, np.float64)
    t = 0.0
    k = 0
    while True:
        gap, mark = clock_draw(seed, label, k)
        t += gap
        if t > horizon:
            break
        if k == cap:
            cap *= 2
            nt = np.empty(cap, np.float64)
            nm = np.empty(cap, np.float64)
            nt[:k] = times[:k]
            nm[:k] = marks[:k]
            times, marks = nt, nm
        times[k] = t
        marks[k] = mark
        k += 1
    return times[:k].copy(), marks[:k].copy()


def stream(seed, label, horizon):
    """All events of ``label`` in ``[0, horizon]`` as ``(times, marks)``."""
    return _stream(np.uint64(seed & 0xFFFFFFFFFFFFFFFF), int(label), float(horizon))


_TRIAL_TAG = np.uint64(0x5EED5EED5EED5EED)


@njit(cache=True)
def trial_seed_raw(seed, trial):
    r = philox4x64(trial, np.uint64(0), np.uint64(0), np.uint64(0), seed, _TRIAL_TAG)
    return r[0]


def trial_seed(seed, trial):
    """Seed of trial ``trial`` derived from an experiment seed.

    Uses a separate Philox key so trial seeds never collide with clock words.
    """
    return int(trial_seed_raw(np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(trial)))
