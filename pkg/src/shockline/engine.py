"""Event-driven TASEP under the graphical construction.

Each label carries a unit-rate Poisson clock with uniform marks (see
:mod:`shockline.rng`).  At an event of label ``l`` with mark ``u`` the
particle ``l`` of every coupled system attempts a right jump iff
``u < rate``; the attempt succeeds iff the site ahead is empty.  Running
several systems on one :class:`ClockField` realizes the basic coupling.

Labels follow the right-to-left convention: ``x[k+1] < x[k]``.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .rng import clock_block, stream, trial_seed, trial_seed_raw

JUMP = 0
SUPPRESSED = 1

LOG_NONE = 0
LOG_SUPPRESSIONS = 1
LOG_ALL = 2


class EngineError(RuntimeError):
    """Raised when a run violates an engine invariant."""


def light_cone_pad(horizon):
    """Number of labels ahead of a tracked particle that can influence it."""
    t = float(horizon)
    return int(math.ceil(t + 6.0 * math.sqrt(t * math.log(t + math.e)) + 10.0))


@njit(cache=True)
def _sift_down(heap, key, pos):
    n = heap.shape[0]
    item = heap[pos]
    k = key[item]
    while True:
        child = 2 * pos + 1
        if child >= n:
            break
        right = child + 1
        if right < n and key[heap[right]] < key[heap[child]]:
            child = right
        if key[heap[child]] < k:
            heap[pos] = heap[child]
            pos = child
        else:
            break
    heap[pos] = item


@njit(cache=True)
def _init_clock(seed, label_lo, n_labels):
    nidx = np.zeros(n_labels, np.int64)
    ntime = np.empty(n_labels, np.float64)
    nmark = np.empty(n_labels, np.float64)
    # second half of the current Philox block, used by odd event indices
    spare = np.empty((n_labels, 2), np.float64)
    for i in range(n_labels):
        g0, m0, g1, m1 = clock_block(seed, label_lo + i, 0)
        ntime[i] = g0
        nmark[i] = m0
        spare[i, 0] = g1
        spare[i, 1] = m1
    heap = np.arange(n_labels)
    for p in range(n_labels // 2 - 1, -1, -1):
        _sift_down(heap, ntime, p)
    return nidx, ntime, nmark, spare, heap


@njit(cache=True)
def _advance_kernel(seed, label_lo, nidx, ntime, nmark, spare, heap, pos, rate, lo, hi,
                    mode, t_end, log_sys, log_time, log_label, log_pos, log_kind,
                    n_log, debug):
    """Process clock events up to ``t_end``.

    Returns ``(n_log, status)``: status 0 done, 1 log buffer full (call
    again after flushing), 2 exclusion violated.
    """
    nsys = pos.shape[0]
    cap = log_time.shape[0]
    while True:
        i = heap[0]
        tau = ntime[i]
        if tau > t_end:
            return n_log, 0
        if n_log + nsys > cap:
            return n_log, 1
        u = nmark[i]
        for s in range(nsys):
            if i < lo[s] or i > hi[s] or u >= rate[s, i]:
                continue
            target = pos[s, i] + 1
            if i > lo[s] and pos[s, i - 1] == target:
                if mode[s] >= 1:
                    log_sys[n_log] = s
                    log_time[n_log] = tau
                    log_label[n_log] = label_lo + i
                    log_pos[n_log] = target - 1
                    log_kind[n_log] = 1
                    n_log += 1
            else:
                pos[s, i] = target
                if mode[s] == 2:
                    log_sys[n_log] = s
                    log_time[n_log] = tau
                    log_label[n_log] = label_lo + i
                    log_pos[n_log] = target
                    log_kind[n_log] = 0
                    n_log += 1
                if debug and i > lo[s] and pos[s, i] >= pos[s, i - 1]:
                    return n_log, 2
        k = nidx[i] + 1
        nidx[i] = k
        if k & 1:
            ntime[i] = tau + spare[i, 0]
            nmark[i] = spare[i, 1]
        else:
            g0, m0, g1, m1 = clock_block(seed, label_lo + i, k >> 1)
            ntime[i] = tau + g0
            nmark[i] = m0
            spare[i, 0] = g1
            spare[i, 1] = m1
        _sift_down(heap, ntime, 0)


@dataclass
class ClockField:
    """Per-label Poisson event streams with thinning marks.

    The field is consumed lazily: a cursor holds the pending event of
    every label in a binary heap, so memory scales with the number of
    labels rather than with the horizon.  Access within a run is
    exclusive.
    """

    seed: int
    label_lo: int
    label_hi: int
    horizon: float
    time: float = 0.0

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("clock horizon must be positive")
        if self.label_hi < self.label_lo:
            raise ValueError("empty label universe")
        self.seed = int(self.seed) & 0xFFFFFFFFFFFFFFFF
        self._useed = np.uint64(self.seed)
        n = self.label_hi - self.label_lo + 1
        self._nidx, self._ntime, self._nmark, self._spare, self._heap = _init_clock(
            self._useed, self.label_lo, n)

    @property
    def n_labels(self):
        return self.label_hi - self.label_lo + 1

    def stream(self, label):
        """Event times and marks of ``label`` on ``[0, horizon]``."""
        if not self.label_lo <= label <= self.label_hi:
            raise KeyError(f"label {label} outside clock universe")
        return stream(self.seed, label, self.horizon)


@dataclass
class SystemState:
    """Positions and rates of one TASEP system on a contiguous label range.

    ``positions[i]`` is the site of label ``label_lo + i``.
    """

    kind: str
    label_lo: int
    positions: np.ndarray
    rates: np.ndarray
    time: float = 0.0
    log_mode: int = LOG_SUPPRESSIONS
    # event log columns; suppressed events keep the blocked position
    log_time: np.ndarray = field(default_factory=lambda: np.empty(0))
    log_label: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    log_pos: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    log_kind: np.ndarray = field(default_factory=lambda: np.empty(0, np.int8))
    initial_positions: np.ndarray = None
    start_time: float = 0.0

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=np.int64)
        self.rates = np.ascontiguousarray(self.rates, dtype=np.float64)
        if self.positions.shape != self.rates.shape:
            raise ValueError("positions and rates must align")
        if self.initial_positions is None:
            self.initial_positions = self.positions.copy()
        self.start_time = self.time
        self._log_chunks = []

    @property
    def label_hi(self):
        return self.label_lo + len(self.positions) - 1

    @property
    def labels(self):
        return np.arange(self.label_lo, self.label_hi + 1)

    def __contains__(self, label):
        return self.label_lo <= label <= self.label_hi

    def x(self, label):
        """Current position of ``label``."""
        if label not in self:
            raise KeyError(f"label {label} not present")
        return int(self.positions[label - self.label_lo])

    def as_dict(self):
        return {int(l): int(p) for l, p in zip(self.labels, self.positions)}

    def rate_dict(self):
        return {int(l): float(r) for l, r in zip(self.labels, self.rates)}

    def _append_log(self, t, lab, pos, kind):
        self._log_chunks.append((t, lab, pos, kind))

    def _flush_log(self):
        if not self._log_chunks:
            return
        parts = [(self.log_time, self.log_label, self.log_pos, self.log_kind)]
        parts += self._log_chunks
        self.log_time = np.concatenate([p[0] for p in parts])
        self.log_label = np.concatenate([p[1] for p in parts])
        self.log_pos = np.concatenate([p[2] for p in parts])
        self.log_kind = np.concatenate([p[3] for p in parts])
        self._log_chunks = []

    @property
    def suppression_log(self):
        """``(times, labels)`` of every blocked jump attempt, in log order
        (time order for :func:`advance_coupled`, label-major after :func:`sweep`)."""
        self._flush_log()
        sel = self.log_kind == SUPPRESSED
        return self.log_time[sel], self.log_label[sel]

    def suppression_positions(self):
        self._flush_log()
        return self.log_pos[self.log_kind == SUPPRESSED]

    def events(self):
        """Full event log ``(time, label, position, kind)`` as arrays."""
        self._flush_log()
        return self.log_time, self.log_label, self.log_pos, self.log_kind

    def copy(self):
        self._flush_log()
        new = SystemState(self.kind, self.label_lo, self.positions.copy(),
                          self.rates.copy(), self.time, self.log_mode,
                          self.log_time.copy(), self.log_label.copy(),
                          self.log_pos.copy(), self.log_kind.copy(),
                          self.initial_positions.copy())
        new.start_time = self.start_time
        return new


def make_initial(kind, tracked_label, horizon, M=1, alpha=1.0,
                 log_mode=LOG_SUPPRESSIONS):
    """Build the initial configuration ``kind`` truncated at ``tracked_label``.

    Kinds: ``shock`` (normal particles at -2n, n >= 1, and M slow particles
    of rate ``alpha`` densely packed at 0, -1, ...), ``half_flat_A``
    (x_n = -2n, n >= 1), ``slow_step_B`` (x_n = -n, n >= -M+1, slow labels
    n <= 0), ``step`` (x_n = -n+1, n >= 1) and ``flat`` (x_n = -2n on Z,
    truncated ahead of the tracked particle by :func:`light_cone_pad`).

    Labels larger than ``tracked_label`` never influence it and are not
    instantiated.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    N = int(tracked_label)
    if kind in ("shock", "slow_step_B"):
        if M < 0:
            raise ValueError("M must be non-negative")
        if not 0.0 < alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        lo = -M + 1
    elif kind in ("half_flat_A", "step"):
        lo = 1
    elif kind == "flat":
        lo = N - light_cone_pad(horizon)
    else:
        raise ValueError(f"unknown initial condition {kind!r}")
    if N < lo:
        raise ValueError(f"tracked label {N} outside instantiated range [{lo}, ...)")

    labels = np.arange(lo, N + 1)
    rates = np.ones(len(labels))
    if kind == "shock":
        pos = np.where(labels >= 1, -2 * labels, -labels)
        rates[labels <= 0] = alpha
    elif kind == "slow_step_B":
        pos = -labels
        rates[labels <= 0] = alpha
    elif kind == "half_flat_A" or kind == "flat":
        pos = -2 * labels
    else:
        pos = -labels + 1
    return SystemState(kind, lo, pos, rates, 0.0, log_mode)


def clock_for(systems, seed, horizon):
    """A clock field whose label universe covers ``systems``."""
    lo = min(s.label_lo for s in systems)
    hi = max(s.label_hi for s in systems)
    return ClockField(seed, lo, hi, horizon)


def advance_coupled(clock, systems, t_end, debug=False):
    """Advance ``systems`` to ``t_end`` on the shared clock field."""
    if t_end > clock.horizon:
        raise ValueError(f"t_end={t_end} beyond clock horizon {clock.horizon}")
    if t_end < clock.time:
        raise ValueError("cannot advance backwards in time")
    for s in systems:
        if s.label_lo < clock.label_lo or s.label_hi > clock.label_hi:
            raise ValueError(f"system {s.kind!r} labels outside clock universe")
        if s.time != clock.time:
            raise ValueError("systems must share the clock's current time")
    nsys = len(systems)
    L = clock.n_labels
    pos = np.zeros((nsys, L), np.int64)
    rate = np.zeros((nsys, L))
    lo = np.empty(nsys, np.int64)
    hi = np.empty(nsys, np.int64)
    mode = np.empty(nsys, np.int64)
    for k, s in enumerate(systems):
        a = s.label_lo - clock.label_lo
        b = a + len(s.positions)
        pos[k, a:b] = s.positions
        rate[k, a:b] = s.rates
        lo[k], hi[k], mode[k] = a, b - 1, s.log_mode

    logging = bool(mode.max(initial=0) > 0) if nsys else False
    dt = max(t_end - clock.time, 0.0)
    cap = int(L * dt * 1.1 + 64 * nsys) if logging else nsys
    cap = min(max(cap, nsys), 1 << 24)
    buf = (np.empty(cap, np.int64), np.empty(cap), np.empty(cap, np.int64),
           np.empty(cap, np.int64), np.empty(cap, np.int8))
    while True:
        n_log, status = _advance_kernel(
            clock._useed, clock.label_lo, clock._nidx, clock._ntime, clock._nmark,
            clock._spare, clock._heap, pos, rate, lo, hi, mode, float(t_end), *buf, 0, debug)
        if n_log:
            sys_col = buf[0][:n_log]
            for k, s in enumerate(systems):
                if mode[k] == LOG_NONE:
                    continue
                sel = sys_col == k
                s._append_log(buf[1][:n_log][sel].copy(), buf[2][:n_log][sel].copy(),
                              buf[3][:n_log][sel].copy(), buf[4][:n_log][sel].copy())
        if status == 0:
            break
        if status == 2:
            raise EngineError("exclusion violated")
    clock.time = float(t_end)
    for k, s in enumerate(systems):
        s.positions[:] = pos[k, lo[k]:hi[k] + 1]
        s.time = float(t_end)
    return systems


def run(kind, tracked_label, t, seed, M=1, alpha=1.0, log_mode=LOG_SUPPRESSIONS):
    """Build one system and advance it to ``t`` with the time-ordered kernel."""
    s = make_initial(kind, tracked_label, t, M=M, alpha=alpha, log_mode=log_mode)
    clock = ClockField(seed, s.label_lo, s.label_hi, t)
    advance_coupled(clock, [s], t)
    return s


# -- coupled shock / A / B triple ------------------------------------------------

@dataclass
class ShockTriple:
    """Shock system with its two reference systems on one clock field."""

    shock: SystemState
    A: SystemState
    B: SystemState
    clock: ClockField

    @property
    def systems(self):
        return [self.shock, self.A, self.B]

    def advance(self, t_end):
        advance_coupled(self.clock, self.systems, t_end)
        return self


def coupled_triple(M, alpha, n_max, horizon, seed, log_mode=LOG_SUPPRESSIONS,
                   independent=False):
    """Shock, half-flat A and slow-step B systems sharing one clock field.

    ``independent=True`` gives each system its own clock instead; it breaks
    the coupling and exists only as a negative control.
    """
    shock = make_initial("shock", n_max, horizon, M=M, alpha=alpha, log_mode=log_mode)
    A = make_initial("half_flat_A", n_max, horizon, log_mode=log_mode)
    B = make_initial("slow_step_B", n_max, horizon, M=M, alpha=alpha, log_mode=log_mode)
    clock = clock_for([shock, A, B], seed, horizon)
    triple = ShockTriple(shock, A, B, clock)
    if independent:
        triple = _IndependentTriple(shock, A, B, clock)
        triple.clocks = [clock_for([s], seed + 7919 * (k + 1), horizon)
                         for k, s in enumerate(triple.systems)]
    return triple


class _IndependentTriple(ShockTriple):
    def advance(self, t_end):
        for clock, s in zip(self.clocks, self.systems):
            advance_coupled(clock, [s], t_end)
        return self


def min_identity_check(triple, labels):
    """Whether ``x_n = min(x_n^A, x_n^B)`` holds for each label in ``labels``."""
    out = {}
    for n in labels:
        if n < 1:
            raise ValueError("the identity is stated for labels n >= 1")
        out[n] = triple.shock.x(n) == min(triple.A.x(n), triple.B.x(n))
    return out


# -- label-sequential sweep ---------------------------------------------------------
#
# In TASEP particle n reacts only to particle n-1, so a fixed-horizon run can
# process labels in increasing order: each label's clock events are replayed
# against the jump times of its predecessor.  The result is identical, event
# for event, to the time-ordered run of advance_coupled.

@njit(cache=True, nogil=True, inline="always")
def _scan_quiet(ev_t, ev_m, ne, t0, r, x, xp, has_pred, prev_j, npred, cur_j,
                checkpoints, snap_col):
    # one label of one system without logging; returns (final x, jump count)
    C = checkpoints.shape[0]
    pp = 0
    cp = 0
    nj = 0
    for e in range(ne):
        tau = ev_t[e]
        if tau <= t0:
            continue
        while cp < C and checkpoints[cp] < tau:
            snap_col[cp] = x
            cp += 1
        if ev_m[e] >= r:
            continue
        if has_pred:
            while pp < npred and prev_j[pp] < tau:
                xp += 1
                pp += 1
            if xp == x + 1:
                continue
        x += 1
        cur_j[nj] = tau
        nj += 1
    while cp < C:
        snap_col[cp] = x
        cp += 1
    return x, nj


@njit(cache=True, nogil=True)
def _scan_logged(ev_t, ev_m, ne, t0, r, x, xp, has_pred, prev_j, npred, cur_j,
                 checkpoints, snap_col, mode, s, label, nl, lg_s, lg_t, lg_l, lg_p, lg_k):
    # as _scan_quiet, also logging suppressions (mode >= 1) and jumps (mode 2)
    C = checkpoints.shape[0]
    pp = 0
    cp = 0
    nj = 0
    for e in range(ne):
        tau = ev_t[e]
        if tau <= t0:
            continue
        while cp < C and checkpoints[cp] < tau:
            snap_col[cp] = x
            cp += 1
        if ev_m[e] >= r:
            continue
        blocked = False
        if has_pred:
            while pp < npred and prev_j[pp] < tau:
                xp += 1
                pp += 1
            blocked = xp == x + 1
        if blocked or mode == 2:
            if nl == lg_s.shape[0]:
                cap = 2 * nl
                lg_s = _grow_i(lg_s, cap)
                lg_t = _grow_f(lg_t, cap)
                lg_l = _grow_i(lg_l, cap)
                lg_p = _grow_i(lg_p, cap)
                lg_k = _grow_i(lg_k, cap)
            lg_s[nl] = s
            lg_t[nl] = tau
            lg_l[nl] = label
            # jumps record the arrival site
            lg_p[nl] = x if blocked else x + 1
            lg_k[nl] = 1 if blocked else 0
            nl += 1
        if blocked:
            continue
        x += 1
        cur_j[nj] = tau
        nj += 1
    while cp < C:
        snap_col[cp] = x
        cp += 1
    return x, nj, nl, lg_s, lg_t, lg_l, lg_p, lg_k


@njit(cache=True, nogil=True)
def _sweep_kernel(seed, label_lo, n_labels, sys_lo, sys_hi, start, x0, rate, anchor,
                  checkpoints, log_mask, horizon):
    nsys = sys_lo.shape[0]
    C = checkpoints.shape[0]
    snap = np.zeros((nsys, C, n_labels), np.int64)
    final = np.zeros((nsys, n_labels), np.int64)
    start_pos = x0.copy()
    cap = int(horizon + 20.0 * np.sqrt(horizon + 1.0) + 64.0)
    ev_t = np.empty(cap)
    ev_m = np.empty(cap)
    prev_j = np.empty((nsys, cap))
    cur_j = np.empty((nsys, cap))
    prev_n = np.zeros(nsys, np.int64)
    cur_n = np.zeros(nsys, np.int64)
    lcap = 1024
    lg_s = np.empty(lcap, np.int64)
    lg_t = np.empty(lcap)
    lg_l = np.empty(lcap, np.int64)
    lg_p = np.empty(lcap, np.int64)
    lg_k = np.empty(lcap, np.int64)
    nl = 0
    for i in range(n_labels):
        label = label_lo + i
        # materialize this label's events on [0, horizon]
        ne = 0
        tau = 0.0
        k = 0
        while True:
            g0, m0, g1, m1 = clock_block(seed, label, k)
            k += 1
            tau += g0
            if tau > horizon:
                break
            if ne == cap:
                return snap, final, start_pos, lg_s[:nl], lg_t[:nl], lg_l[:nl], lg_p[:nl], lg_k[:nl], -1
            ev_t[ne] = tau
            ev_m[ne] = m0
            ne += 1
            tau += g1
            if tau > horizon:
                break
            if ne == cap:
                return snap, final, start_pos, lg_s[:nl], lg_t[:nl], lg_l[:nl], lg_p[:nl], lg_k[:nl], -1
            ev_t[ne] = tau
            ev_m[ne] = m1
            ne += 1
        for s in range(nsys):
            if i < sys_lo[s] or i > sys_hi[s]:
                continue
            a = anchor[s]
            if a >= 0:
                # densely packed behind the source's particle sys_lo[s] at start[s]
                if i == sys_lo[s]:
                    src = start_pos[a, i]
                    for e in range(cur_n[a]):
                        if cur_j[a, e] <= start[s]:
                            src += 1
                    for j in range(sys_lo[s], sys_hi[s] + 1):
                        start_pos[s, j] = src - (j - sys_lo[s])
            x = start_pos[s, i]
            r = rate[s, i]
            t0 = start[s]
            has_pred = i > sys_lo[s]
            xp = start_pos[s, i - 1] if has_pred else 0
            if log_mask[s] == 0:
                x, nj = _scan_quiet(ev_t, ev_m, ne, t0, r, x, xp, has_pred,
                                    prev_j[s], prev_n[s], cur_j[s], checkpoints,
                                    snap[s, :, i])
                final[s, i] = x
                cur_n[s] = nj
                continue
            x, nj, nl, lg_s, lg_t, lg_l, lg_p, lg_k = _scan_logged(
                ev_t, ev_m, ne, t0, r, x, xp, has_pred, prev_j[s], prev_n[s], cur_j[s],
                checkpoints, snap[s, :, i], log_mask[s], s, label,
                nl, lg_s, lg_t, lg_l, lg_p, lg_k)
            final[s, i] = x
            cur_n[s] = nj
        for s in range(nsys):
            for e in range(cur_n[s]):
                prev_j[s, e] = cur_j[s, e]
            prev_n[s] = cur_n[s]
    return snap, final, start_pos, lg_s[:nl], lg_t[:nl], lg_l[:nl], lg_p[:nl], lg_k[:nl], 0


@njit(cache=True)
def _grow_i(a, n):
    b = np.empty(n, np.int64)
    b[:a.shape[0]] = a
    return b


@njit(cache=True)
def _grow_f(a, n):
    b = np.empty(n)
    b[:a.shape[0]] = a
    return b


def sweep(systems, seed, horizon, checkpoints=(), anchors=None):
    """Run ``systems`` on one clock field from their start times to ``horizon``.

    Fixed-horizon counterpart of :func:`advance_coupled`: same clock field,
    same trajectories, but labels are processed one at a time, which is much
    faster for Monte Carlo.  ``anchors`` maps a system index to the index of
    an earlier system; the anchored system starts at its own ``time``
    densely packed behind the source's particle ``label_lo`` (its given
    positions are ignored).

    Systems are updated in place (positions, time, suppression log in
    label-major order).  Returns the snapshots at ``checkpoints`` as an
    array ``[system, checkpoint, label - lo]`` over the union label range;
    entries before a system's start hold its start positions.
    """
    anchors = anchors or {}
    checkpoints = np.asarray(checkpoints, dtype=float)
    if np.any(np.diff(checkpoints) < 0):
        raise ValueError("checkpoints must be sorted")
    if checkpoints.size and checkpoints[-1] > horizon:
        raise ValueError("checkpoint beyond horizon")
    lo_u = min(s.label_lo for s in systems)
    hi_u = max(s.label_hi for s in systems)
    L = hi_u - lo_u + 1
    nsys = len(systems)
    x0 = np.zeros((nsys, L), np.int64)
    rate = np.zeros((nsys, L))
    slo = np.empty(nsys, np.int64)
    shi = np.empty(nsys, np.int64)
    start = np.empty(nsys)
    anchor = np.full(nsys, -1, np.int64)
    mask = np.zeros(nsys, np.int64)
    for k, s in enumerate(systems):
        a = s.label_lo - lo_u
        b = a + len(s.positions)
        x0[k, a:b] = s.positions
        rate[k, a:b] = s.rates
        slo[k], shi[k], start[k] = a, b - 1, s.time
        mask[k] = s.log_mode
        if s.time > horizon:
            raise ValueError("system starts after the horizon")
    for k, src in anchors.items():
        if not 0 <= src < k:
            raise ValueError("anchor source must be an earlier system")
        if not (systems[src].label_lo <= systems[k].label_lo <= systems[src].label_hi):
            raise ValueError("anchor label missing from source system")
        if systems[k].time < systems[src].time:
            raise ValueError("anchored system starts before its source")
        anchor[k] = src
    uhorizon = float(horizon)
    snap, final, start_pos, lg_s, lg_t, lg_l, lg_p, lg_k, status = _sweep_kernel(
        np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF), lo_u, L, slo, shi, start, x0, rate,
        anchor, checkpoints, mask, uhorizon)
    if status != 0:
        raise EngineError("event buffer overflow")
    for k, s in enumerate(systems):
        s.positions[:] = final[k, slo[k]:shi[k] + 1]
        if k in anchors:
            s.initial_positions = start_pos[k, slo[k]:shi[k] + 1].copy()
        s.time = uhorizon
        if mask[k]:
            sel = lg_s == k
            s._append_log(lg_t[sel], lg_l[sel], lg_p[sel], lg_k[sel].astype(np.int8))
    return snap


def sweep_run(kind, tracked_label, t, seed, M=1, alpha=1.0, checkpoints=(),
              log_mode=LOG_NONE):
    """Build one system and sweep it to ``t``; returns ``(system, snapshots)``."""
    s = make_initial(kind, tracked_label, t, M=M, alpha=alpha, log_mode=log_mode)
    snap = sweep([s], seed, t, checkpoints)
    return s, snap[0]


@njit(cache=True, nogil=True)
def _batch(seed, trial0, trials, label_lo, n_labels, sys_lo, sys_hi, start, x0, rate,
           anchor, checkpoints, cols, horizon):
    nsys = sys_lo.shape[0]
    C = checkpoints.shape[0]
    out = np.empty((trials, nsys, C + 2, cols.shape[0]), np.int64)
    mask = np.zeros(nsys, np.int64)
    for k in range(trials):
        ts = np.uint64(trial_seed_raw(seed, np.uint64(trial0 + k)))
        snap, final, sp, a, b, c, d, e, status = _sweep_kernel(
            ts, label_lo, n_labels, sys_lo, sys_hi, start, x0, rate, anchor,
            checkpoints, mask, horizon)
        if status != 0:
            return out, k
        for s in range(nsys):
            for j in range(cols.shape[0]):
                col = cols[j]
                for c2 in range(C):
                    out[k, s, c2, j] = snap[s, c2, col]
                out[k, s, C, j] = final[s, col]
                out[k, s, C + 1, j] = sp[s, col]
    return out, -1


@dataclass
class BatchResult:
    """Positions from many independent trials.

    ``snapshots[trial, system, checkpoint, j]``, ``final[trial, system, j]`` and
    ``start[trial, system, j]`` refer to label ``labels[j]``.
    """

    labels: np.ndarray
    checkpoints: np.ndarray
    snapshots: np.ndarray
    final: np.ndarray
    start: np.ndarray
    seeds: np.ndarray


def sweep_batch(systems, seed, trials, horizon, labels, checkpoints=(), anchors=None,
                trial0=0):
    """Monte Carlo over ``trials`` independent clock fields.

    Trial ``k`` uses the clock field with seed ``trial_seed(seed, trial0 + k)``,
    so a batch equals the concatenation of single :func:`sweep` calls and can
    be split into chunks freely.  ``systems`` are templates and are not
    modified.
    """
    checkpoints = np.asarray(checkpoints, dtype=float)
    anchors = anchors or {}
    lo_u = min(s.label_lo for s in systems)
    hi_u = max(s.label_hi for s in systems)
    L = hi_u - lo_u + 1
    nsys = len(systems)
    x0 = np.zeros((nsys, L), np.int64)
    rate = np.zeros((nsys, L))
    slo = np.empty(nsys, np.int64)
    shi = np.empty(nsys, np.int64)
    start = np.empty(nsys)
    anchor = np.full(nsys, -1, np.int64)
    for k, s in enumerate(systems):
        a = s.label_lo - lo_u
        b = a + len(s.positions)
        x0[k, a:b] = s.positions
        rate[k, a:b] = s.rates
        slo[k], shi[k], start[k] = a, b - 1, s.time
    for k, src in anchors.items():
        anchor[k] = src
    labels = np.asarray(labels, dtype=np.int64)
    if np.any(labels < lo_u) or np.any(labels > hi_u):
        raise ValueError("requested label not instantiated")
    if checkpoints.size and (np.any(np.diff(checkpoints) < 0) or checkpoints[-1] > horizon):
        raise ValueError("checkpoints must be sorted and within the horizon")
    out, bad = _batch(np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF), int(trial0), int(trials),
                      lo_u, L, slo, shi, start, x0, rate, anchor, checkpoints,
                      labels - lo_u, float(horizon))
    if bad >= 0:
        raise EngineError(f"event buffer overflow in trial {trial0 + bad}")
    C = checkpoints.size
    seeds = np.array([trial_seed(seed, trial0 + k) for k in range(trials)], dtype=np.uint64)
    return BatchResult(labels, checkpoints, out[:, :, :C, :], out[:, :, C, :],
                       out[:, :, C + 1, :], seeds)


# -- diagnostic paths --------------------------------------------------------------

@dataclass
class StepPath:
    """Piecewise-constant label-valued path.

    ``times`` are the jump times in increasing order and ``values[k]`` is
    the value on the k-th interval; ``len(values) == len(times) + 1``.
    Forward paths are right-continuous (the new value holds at a jump
    time); backward paths take the lower value at the jump time itself.
    """

    times: np.ndarray
    values: np.ndarray
    right_continuous: bool = True
    chain_positions: np.ndarray = None

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        side = "right" if self.right_continuous else "left"
        return self.values[np.searchsorted(self.times, s, side=side)]

    @property
    def n_jumps(self):
        return len(self.times)


@njit(cache=True)
def _is_label_major(times, labels):
    for i in range(1, labels.shape[0]):
        if labels[i] < labels[i - 1]:
            return False
        if labels[i] == labels[i - 1] and times[i] < times[i - 1]:
            return False
    return True


def _label_major(system):
    times, labels = system.suppression_log
    pos = system.suppression_positions()
    # the sweep already writes its log label-major; skip the sort then
    if _is_label_major(times, labels):
        order = slice(None)
    else:
        order = np.lexsort((times, labels))
    labels = labels[order]
    lo = system.label_lo
    n = len(system.positions)
    offsets = np.searchsorted(labels, np.arange(lo, lo + n + 1))
    return times[order], pos[order], offsets


def influence_path(shock):
    """Left-most label affected by the slow particles, as a forward path.

    ``I`` starts at 0 and moves to ``m+1`` when a jump of particle ``m+1``
    is blocked by particle ``m`` while ``I = m``.
    """
    if shock.log_mode == LOG_NONE:
        raise ValueError("influence path needs the suppression log")
    times, _, offsets = _label_major(shock)
    jt, jv = _influence(times, offsets, shock.label_lo)
    return StepPath(jt, np.concatenate([[0], jv]).astype(np.int64), right_continuous=True)


@njit(cache=True)
def _influence(times, offsets, lo):
    n_lab = offsets.shape[0] - 1
    jt = np.empty(n_lab)
    jv = np.empty(n_lab, np.int64)
    k = 0
    last = 0.0
    m = 1
    while m - lo < n_lab and m - lo >= 0:
        a = offsets[m - lo]
        b = offsets[m - lo + 1]
        j = a + np.searchsorted(times[a:b], last, side="right")
        if j >= b:
            break
        last = times[j]
        jt[k] = last
        jv[k] = m
        k += 1
        m += 1
    return jt[:k].copy(), jv[:k].copy()


def backward_index_path(system, N, t=None):
    """Backward index process ``N(s)`` on ``[start, t]`` with ``N(t) = N``.

    Scanning backward in time, a suppressed jump of particle ``n`` at time
    ``s`` while the current value is ``n`` sets the value to ``n - 1`` at
    ``s`` and before.
    """
    if N not in system:
        raise KeyError(f"label {N} not present")
    if system.log_mode == LOG_NONE:
        raise ValueError("backward index path needs the suppression log")
    t = system.time if t is None else t
    times, pos, offsets = _label_major(system)
    jt, jv, jp = _backward(times, pos, offsets, system.label_lo, N, float(t))
    path = StepPath(jt[::-1].copy(), np.concatenate([jv[::-1], [N]]).astype(np.int64),
                    right_continuous=False)
    # position of the new tracked particle at each jump time
    path.chain_positions = jp[::-1] + 1
    return path


@njit(cache=True)
def _backward(times, pos, offsets, lo, N, t):
    n_lab = offsets.shape[0] - 1
    jt = np.empty(n_lab)
    jv = np.empty(n_lab, np.int64)
    jp = np.empty(n_lab, np.int64)
    k = 0
    bound = t
    cur = N
    inclusive = True
    while cur - lo > 0:
        a = offsets[cur - lo]
        b = offsets[cur - lo + 1]
        if inclusive:
            side_idx = np.searchsorted(times[a:b], bound, side="right")
        else:
            side_idx = np.searchsorted(times[a:b], bound, side="left")
        if side_idx == 0:
            break
        j = a + side_idx - 1
        bound = times[j]
        inclusive = False
        cur -= 1
        jt[k] = bound
        jv[k] = cur
        jp[k] = pos[j]
        k += 1
    return jt[:k].copy(), jv[:k].copy(), jp[:k].copy()


@dataclass
class AuxiliaryResult:
    holds: bool
    N_u: int
    x_N_t: int
    x_aux_N_t: int
    x_Nu_u: int
    increment: int


def auxiliary_identity_check(kind, seed, N, u, t, M=1, alpha=1.0):
    """Re-run ``kind`` and verify ``x_N(t) = x_{N(u)}(u) + [x~_N(t) - x~_{N(u)}(u)]``.

    The auxiliary system starts at time ``u`` densely packed behind
    ``x_{N(u)}(u)`` and is driven by the same clock field.  Returns an
    :class:`AuxiliaryResult` whose ``increment`` is ``x~_N(t) - x~_{N(u)}(u)``.
    """
    if not 0 <= u <= t:
        raise ValueError("need 0 <= u <= t")
    first, _ = sweep_run(kind, N, t, seed, M=M, alpha=alpha, log_mode=LOG_SUPPRESSIONS)
    N_u = int(backward_index_path(first, N, t)(u))

    orig = make_initial(kind, N, t, M=M, alpha=alpha, log_mode=LOG_NONE)
    aux = SystemState("auxiliary", N_u, np.zeros(N - N_u + 1, np.int64),
                      orig.rates[N_u - orig.label_lo:].copy(), u, LOG_NONE)
    snap = sweep([orig, aux], seed, t, checkpoints=[u], anchors={1: 0})
    x_Nu_u = int(snap[0, 0, N_u - orig.label_lo])
    x_N_t = orig.x(N)
    x_aux = aux.x(N)
    inc = x_aux - x_Nu_u
    return AuxiliaryResult(x_N_t == x_aux == x_Nu_u + inc, N_u, x_N_t, x_aux,
                           x_Nu_u, inc)


def write_trajectory_csv(system, path):
    """Export the event log as CSV ``time,label,position,event_kind``."""
    times, labels, pos, kinds = system.events()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "label", "position", "event_kind"])
        for t, l, p, k in zip(times, labels, pos, kinds):
            w.writerow([repr(float(t)), int(l), int(p),
                        "jump" if k == JUMP else "suppressed"])


def read_trajectory_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    times = np.array([float(r["time"]) for r in rows])
    labels = np.array([int(r["label"]) for r in rows], dtype=np.int64)
    pos = np.array([int(r["position"]) for r in rows], dtype=np.int64)
    kinds = np.array([JUMP if r["event_kind"] == "jump" else SUPPRESSED
                      for r in rows], dtype=np.int8)
    return times, labels, pos, kinds


def replay(system, times):
    """Positions of ``system`` at each of ``times`` from its full event log."""
    if system.log_mode != LOG_ALL:
        raise ValueError("replay needs the full event log")
    ev_t, ev_l, _, ev_k = system.events()
    # sweep logs are label-major; replay needs time order
    order = np.argsort(ev_t, kind="stable")
    ev_t, ev_l, ev_k = ev_t[order], ev_l[order], ev_k[order]
    times = np.asarray(times, dtype=float)
    return _replay(system.initial_positions, system.label_lo, ev_t, ev_l, ev_k, times)


@njit(cache=True)
def _replay(pos0, lo, ev_t, ev_l, ev_k, times):
    out = np.empty((times.shape[0], pos0.shape[0]), np.int64)
    pos = pos0.copy()
    e = 0
    for q in range(times.shape[0]):
        while e < ev_t.shape[0] and ev_t[e] <= times[q]:
            if ev_k[e] == 0:
                pos[ev_l[e] - lo] += 1
            e += 1
        out[q] = pos
    return out


def influence_dichotomy_violations(triple):
    """Count event times where the influence dichotomy fails.

    Needs the three systems run with :data:`LOG_ALL`.  After every event
    the affected label ``n`` must satisfy ``x_n = x_n^A`` if ``I < n`` and
    ``x_n = x_n^B`` otherwise.
    """
    logs = []
    for k, s in enumerate(triple.systems):
        if s.log_mode != LOG_ALL:
            raise ValueError("dichotomy check needs full event logs")
        t, l, _, kind = s.events()
        logs.append((t, l, kind, np.full(len(t), k)))
    t = np.concatenate([g[0] for g in logs])
    l = np.concatenate([g[1] for g in logs])
    kind = np.concatenate([g[2] for g in logs])
    sysid = np.concatenate([g[3] for g in logs])
    order = np.lexsort((sysid, t))
    return _dichotomy(triple.shock.initial_positions, triple.A.initial_positions,
                      triple.B.initial_positions, triple.shock.label_lo,
                      triple.A.label_lo, triple.B.label_lo,
                      t[order], l[order], kind[order], sysid[order])


@njit(cache=True)
def _dichotomy(p0, pa0, pb0, lo0, loa, lob, t, l, kind, sysid):
    x = p0.copy()
    xa = pa0.copy()
    xb = pb0.copy()
    I = 0
    bad = 0
    e = 0
    n_ev = t.shape[0]
    while e < n_ev:
        # apply every system's entry for this clock event, then check
        tau = t[e]
        lab = l[e]
        while e < n_ev and t[e] == tau:
            if sysid[e] == 0:
                if kind[e] == 0:
                    x[l[e] - lo0] += 1
                elif l[e] == I + 1:
                    I += 1
            elif sysid[e] == 1:
                if kind[e] == 0:
                    xa[l[e] - loa] += 1
            else:
                if kind[e] == 0:
                    xb[l[e] - lob] += 1
            e += 1
        if lab >= 1:
            xn = x[lab - lo0]
            if I < lab:
                if xn != xa[lab - loa]:
                    bad += 1
            elif xn != xb[lab - lob]:
                bad += 1
    return bad


# -- scaling ---------------------------------------------------------------------

@dataclass(frozen=True)
class ShockScaling:
    """Shock constants and the diffusive scaling around the shock."""

    alpha: float
    M: int
    eta: float
    t: float

    @property
    def sigma(self):
        a = self.alpha
        return math.sqrt(a * (1 - 2 * a) / (2 * (1 - a)))

    @property
    def xi_c(self):
        a = self.alpha
        return self.eta * math.sqrt(2 * (1 - 2 * a) / (a * (1 - a)))

    @property
    def shock_speed(self):
        return self.alpha - 0.5

    @property
    def n_of_t(self):
        return int(math.floor((1 - self.alpha) * self.t / 2 + self.eta * math.sqrt(self.t)))

    def x_of_xi(self, xi):
        rt = math.sqrt(self.t)
        return (self.alpha - 0.5) * self.t - 2 * self.eta * rt - self.sigma * xi * rt

    def xi_hat(self, x):
        """Rescaled position; the inverse of :meth:`x_of_xi`."""
        rt = math.sqrt(self.t)
        center = (self.alpha - 0.5) * self.t - 2 * self.eta * rt
        return -(np.asarray(x, dtype=float) - center) / (self.sigma * rt)


def shock_constants(alpha, M, eta, t):
    if not 0 < alpha < 0.5:
        raise ValueError("shock regime requires alpha in (0, 1/2)")
    if M < 1:
        raise ValueError("M must be at least 1")
    if t <= 0:
        raise ValueError("t must be positive")
    return ShockScaling(float(alpha), int(M), float(eta), float(t))
