"""Monte Carlo and reference-computation experiments with pass/fail verdicts.

Each ``run_*`` takes an :class:`ExperimentConfig` and returns an
:class:`ExperimentReport`.  Thresholds come from the packaged expectations
file; probability estimates carry Wilson intervals and single-threshold
verdicts compare the interval edge, not the point estimate.
"""

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from importlib import resources

import numpy as np
from scipy import stats as _st

from . import engine as E
from . import kernels, rmt, shock_direct
from .config import ConfigError
from .report import ExperimentReport
from .rng import trial_seed
from .stats import ECDF, ks_distance, ks_band, ks_two_sample, proportion, wilson


def load_expectations():
    with resources.files("shockline").joinpath("data/expectations.json").open() as fh:
        return json.load(fh)


# -- batching ------------------------------------------------------------------------

def iter_batches(systems, seed, trials, horizon, labels, checkpoints=(), anchors=None,
                 threads=1, chunk=500):
    """Yield ``(trial0, BatchResult)`` chunks in trial order.

    Chunks are cut at fixed trial indices and results are consumed in index
    order, so statistics do not depend on ``threads``.
    """
    starts = list(range(0, trials, chunk))

    def job(k0):
        return E.sweep_batch(systems, seed, min(chunk, trials - k0), horizon, labels,
                             checkpoints, anchors, trial0=k0)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            # map keeps submission order
            for k0, res in zip(starts, ex.map(job, starts)):
                yield k0, res
    else:
        for k0 in starts:
            yield k0, job(k0)


def final_positions(systems, seed, trials, horizon, labels, threads=1, **kw):
    """``final[trial, system, label]`` over all trials."""
    parts = [r.final for _, r in iter_batches(systems, seed, trials, horizon, labels,
                                              threads=threads, **kw)]
    return np.concatenate(parts, axis=0)


def _ecdf_series(sample, label):
    e = ECDF(sample)
    u = np.unique(e.values)
    return dict(label=label, x=u.tolist(), y=e(u).tolist(), kind="step")


def _non_increasing(values, slack=0.0):
    v = np.asarray(values, dtype=float)
    return bool(np.all(np.diff(v) <= slack))


def _row(prefix, prop):
    return {f"{prefix}": prop["p"], f"{prefix}_lo": prop["lo"], f"{prefix}_hi": prop["hi"]}


def _finish(report, t0):
    report.runtime = time.time() - t0
    return report


# -- min identity --------------------------------------------------------------------

MIN_IDENTITY = dict(alphas=[0.2, 0.4], Ms=[1, 3], t=[200.0], trials=10_000, max_label=50,
                    checkpoint_step=20.0, canary_trials=200)


def run_min_identity(cfg):
    """Pathwise ``x_n = min(x^A_n, x^B_n)`` over trials, labels and checkpoints."""
    cfg = cfg.with_defaults(MIN_IDENTITY)
    t = float(cfg["t"][0])
    if t < 0 or cfg["checkpoint_step"] <= 0:
        raise ConfigError("need t >= 0 and a positive checkpoint step")
    t0 = time.time()
    rep = ExperimentReport("min-identity", cfg.as_dict())
    labels = np.arange(1, cfg["max_label"] + 1)
    cps = np.arange(0.0, t + 1e-9, cfg["checkpoint_step"])
    rows = []
    total = 0
    for alpha in cfg["alphas"]:
        for M in cfg["Ms"]:
            if not 0 < alpha <= 1 or M < 1:
                raise ConfigError("need alpha in (0, 1] and M >= 1")
            systems = [E.make_initial(k, labels[-1], max(t, 1e-9), M=M, alpha=alpha,
                                      log_mode=E.LOG_NONE)
                       for k in ("shock", "half_flat_A", "slow_step_B")]
            viol = dom_a = dom_b = 0
            for _, r in iter_batches(systems, cfg.seed, cfg["trials"], max(t, 1e-9), labels,
                                     cps, threads=cfg.threads):
                x, xa, xb = (r.snapshots[:, k] for k in range(3))
                viol += int(np.sum(x != np.minimum(xa, xb)))
                dom_a += int(np.sum(x > xa))
                dom_b += int(np.sum(x > xb))
            checks = cfg["trials"] * len(labels) * len(cps)
            total += viol
            rows.append(dict(alpha=alpha, M=M, trials=cfg["trials"], checks=checks,
                             violations=viol, above_A=dom_a, above_B=dom_b))
    rep.add_table("min_identity", rows)
    rep.check("zero_violations", total == 0)

    # negative control: independent clocks for the three systems
    alpha, M = cfg["alphas"][0], cfg["Ms"][-1]
    ct = cfg["canary_trials"]
    finals = []
    for k, kind in enumerate(("shock", "half_flat_A", "slow_step_B")):
        s = E.make_initial(kind, labels[-1], max(t, 1e-9), M=M, alpha=alpha,
                           log_mode=E.LOG_NONE)
        finals.append(final_positions([s], cfg.seed + 1 + k, ct, max(t, 1e-9), labels)[:, 0])
    canary = int(np.sum(finals[0] != np.minimum(finals[1], finals[2])))
    rep.stats.update(total_violations=total, canary_violations=canary, canary_trials=ct,
                     checkpoints=cps.tolist())
    if t > 0:
        rep.check("canary_detects", canary > 0)
    return _finish(rep, t0)


# -- shock law -----------------------------------------------------------------------

SHOCK_LAW = dict(alpha=0.25, M=1, eta=0.0, t=[125.0, 250.0, 500.0], trials=5000, delta=0.2,
                 deltas=[0.1, 0.2, 0.4])


def _limit_cdf(M, xi_c):
    """Limit law of the rescaled shock particle: 0 below 0, ``F(s + xi_c)`` above."""
    def F(s):
        return 0.0 if s < 0 else rmt.gue_m_cdf(s + xi_c, M)
    return F


def _shock_stats(xh, M, xi_c, delta):
    atom = proportion(np.abs(xh) < delta)
    left = proportion(xh < -delta)
    Fd = rmt.gue_m_cdf(delta + xi_c, M)
    beyond = xh[xh > delta]
    ks = float("nan")
    if beyond.size:
        def G(v):
            return (np.array([rmt.gue_m_cdf(s + xi_c, M) for s in np.atleast_1d(v)]) - Fd) / (1 - Fd)
        ks = ks_distance(beyond, G)
    return atom, left, ks, beyond.size


def run_shock_law(cfg):
    """Atom, conditional law beyond the atom and vanishing left mass."""
    cfg = cfg.with_defaults(SHOCK_LAW)
    exp = load_expectations()["shock_law"]
    alpha, M, eta = cfg["alpha"], cfg["M"], cfg["eta"]
    if not 0 < alpha < 0.5:
        raise ConfigError("shock regime requires alpha in (0, 1/2)")
    if M < 1:
        raise ConfigError("M must be at least 1")
    delta = cfg["delta"]
    t_grid = sorted(cfg["t"])
    t0 = time.time()
    rep = ExperimentReport("shock-law", cfg.as_dict())
    sc_ref = E.shock_constants(alpha, M, eta, t_grid[-1])
    xi_c = sc_ref.xi_c
    target = rmt.gue_m_cdf(xi_c, M)
    target_contour = rmt.gue_m_cdf_contour(xi_c, M)
    n_cond = cfg["trials"] * (1 - rmt.gue_m_cdf(delta + xi_c, M))
    if ks_band(max(n_cond, 1)) > exp["ks_max"]:
        raise ConfigError(f"{cfg['trials']} trials leave about {n_cond:.0f} samples beyond "
                          f"delta; the 95% KS band exceeds {exp['ks_max']}")
    rows, sweep_rows = [], []
    last = None
    for t in t_grid:
        sc = E.shock_constants(alpha, M, eta, t)
        n = sc.n_of_t
        systems = [E.make_initial(k, n, t, M=M, alpha=alpha, log_mode=E.LOG_NONE)
                   for k in ("shock", "half_flat_A", "slow_step_B")]
        fin = final_positions(systems, cfg.seed, cfg["trials"], t, [n], threads=cfg.threads)
        x, xa, xb = fin[:, 0, 0], fin[:, 1, 0], fin[:, 2, 0]
        xh = sc.xi_hat(x)
        atom, left, ks, nb = _shock_stats(xh, M, xi_c, delta)
        decomp = proportion(x == xa)
        rows.append(dict(t=t, n=n, trials=cfg["trials"], **_row("atom", atom),
                         **_row("left", left), ks_beyond=ks, n_beyond=nb,
                         **_row("decomposition_atom", decomp),
                         min_violations=int(np.sum(x != np.minimum(xa, xb))),
                         mean_xi_hat=float(xh.mean()), target=target))
        for d in cfg["deltas"]:
            a, l, k, _ = _shock_stats(xh, M, xi_c, d)
            sweep_rows.append(dict(t=t, delta=d, atom=a["p"], atom_lo=a["lo"], atom_hi=a["hi"],
                                   left=l["p"], ks_beyond=k))
        last = (t, xh)
    rep.add_table("shock_law", rows)
    rep.add_table("delta_sweep", sweep_rows)
    fin_row = rows[-1]
    tol = exp["atom_tol"]
    rep.stats.update(target=target, target_contour=target_contour, xi_c=xi_c,
                     sigma=sc_ref.sigma, atom=fin_row["atom"], left=fin_row["left"],
                     ks_beyond=fin_row["ks_beyond"],
                     decomposition_atom=fin_row["decomposition_atom"],
                     smearing_width_xi=t_grid[-1] ** (-1 / 6) / sc_ref.sigma)
    rep.check("reference_methods_agree", abs(target - target_contour) <= 1e-6)
    rep.check("atom", target - tol <= fin_row["atom_lo"] and fin_row["atom_hi"] <= target + tol)
    rep.check("ks_beyond", fin_row["ks_beyond"] <= exp["ks_max"])
    rep.check("left_mass", fin_row["left_hi"] <= exp["left_max"])
    rep.check("left_mass_decreasing", _non_increasing([r["left"] for r in rows]))
    rep.check("min_identity", all(r["min_violations"] == 0 for r in rows))
    t, xh = last
    grid = np.linspace(min(-1.0, xh.min()), xh.max(), 200)
    F = _limit_cdf(M, xi_c)
    rep.plots["shock_ecdf"] = dict(
        title=f"rescaled shock particle, t={t:g}", xlabel="xi", ylabel="CDF",
        series=[_ecdf_series(xh, "simulation"),
                dict(label="limit law", x=grid.tolist(), y=[F(s) for s in grid])])
    rep.notes.append("atom is P(|xi_hat| < delta); the decomposition estimator P(x = x^A) "
                     "is reported alongside")
    return _finish(rep, t0)


# -- slow decorrelation --------------------------------------------------------------

SLOW_DECORRELATION = dict(alpha=0.25, nu=0.8, eps=0.5, t=[200.0, 800.0, 3200.0], trials=2000,
                          nu_compare=[0.5, 0.99], compare_t=200.0, compare_trials=2000)


def _decorrelation_sample(alpha, nu, t, seed, trials, threads):
    n = int(math.floor((1 - alpha) * t / 2))
    k = int(math.floor(t ** nu / 4))
    m = n - k
    u = t - t ** nu
    if k < 1 or m < 1 or u <= 0:
        raise ConfigError(f"t={t:g} too small for nu={nu}: need t^nu/4 >= 1 and t^nu < t")
    A = E.make_initial("half_flat_A", n, t, log_mode=E.LOG_NONE)
    # repacked system: particles m..n densely behind x_m(t - t^nu)
    R = E.SystemState("repack", m, np.zeros(k + 1, np.int64), np.ones(k + 1), u, E.LOG_NONE)
    parts = [r for _, r in iter_batches([A, R], seed, trials, t, [m, n], [u], {1: 0},
                                        threads=threads)]
    x_n = np.concatenate([r.final[:, 0, 1] for r in parts])
    x_m_u = np.concatenate([r.snapshots[:, 0, 0, 0] for r in parts])
    xr_n = np.concatenate([r.final[:, 1, 1] for r in parts])
    c = (alpha - 0.5) * t
    X = -(x_n - c) / t ** (1 / 3)
    Xt = -(x_m_u - c) / t ** (1 / 3)
    inc = xr_n - x_m_u
    X_step = inc / (-(t ** (nu / 3)))
    return dict(n=n, m=m, k=k, u=u, x_n=x_n, x_repack=xr_n, X=X, Xt=Xt, inc=inc,
                X_step=X_step)


def run_slow_decorrelation(cfg):
    """``P(|X~ - X| >= eps)`` along a t grid and the repacking sandwich."""
    cfg = cfg.with_defaults(SLOW_DECORRELATION)
    exp = load_expectations()["slow_decorrelation"]
    alpha, nu, eps = cfg["alpha"], cfg["nu"], cfg["eps"]
    if not 0 < nu < 1:
        raise ConfigError("nu must lie in (0, 1)")
    if eps <= 0:
        raise ConfigError("eps must be positive")
    if not 0 < alpha < 0.5:
        raise ConfigError("alpha must lie in (0, 1/2)")
    t_grid = sorted(cfg["t"])
    if len(t_grid) < 2:
        raise ConfigError("grid too coarse: need at least two times")
    t0 = time.time()
    rep = ExperimentReport("slow-decorrelation", cfg.as_dict())
    rows = []
    for t in t_grid:
        d = _decorrelation_sample(alpha, nu, t, cfg.seed, cfg["trials"], cfg.threads)
        far = proportion(np.abs(d["Xt"] - d["X"]) >= eps)
        viol = int(np.sum(d["x_n"] > d["x_repack"]))
        shift = t ** ((nu - 1) / 3) * d["X_step"]
        displayed = proportion(d["X"] <= d["Xt"] + shift)
        # the repacked increment should be a step-IC particle at time t^nu
        st = E.make_initial("step", d["k"] + 1, t ** nu, log_mode=E.LOG_NONE)
        ref = final_positions([st], cfg.seed + 1, cfg["trials"], t ** nu, [d["k"] + 1])[:, 0, 0]
        ks, pval = ks_two_sample(d["inc"], ref)
        rows.append(dict(t=t, n=d["n"], m=d["m"], u=d["u"], trials=cfg["trials"],
                         **_row("p_far", far), sandwich_violations=viol,
                         displayed_rescaled_holds=displayed["p"],
                         mean_abs_diff=float(np.mean(np.abs(d["Xt"] - d["X"]))),
                         increment_ks=ks, increment_pvalue=pval))
    rep.add_table("slow_decorrelation", rows)
    cmp_rows = []
    for v in cfg["nu_compare"]:
        d = _decorrelation_sample(alpha, v, cfg["compare_t"], cfg.seed, cfg["compare_trials"],
                                  cfg.threads)
        far = proportion(np.abs(d["Xt"] - d["X"]) >= eps)
        cmp_rows.append(dict(nu=v, t=cfg["compare_t"], **_row("p_far", far)))
    rep.add_table("nu_compare", cmp_rows)
    p = [r["p_far"] for r in rows]
    rep.stats.update(p_far=p, final_hi=rows[-1]["p_far_hi"],
                     sandwich_violations=sum(r["sandwich_violations"] for r in rows))
    rep.check("non_increasing", _non_increasing(p))
    rep.check("final_bound", rows[-1]["p_far_hi"] <= exp["final_max"])
    rep.check("sandwich", rep.stats["sandwich_violations"] == 0)
    if len(cmp_rows) >= 2:
        lo_nu = min(cmp_rows, key=lambda r: r["nu"])
        hi_nu = max(cmp_rows, key=lambda r: r["nu"])
        rep.check("nu_ordering", hi_nu["p_far"] > lo_nu["p_far"])
    rep.plots["p_far"] = dict(title=f"P(|X~ - X| >= {eps}), nu={nu}", xlabel="t",
                              ylabel="probability",
                              series=[dict(label="estimate", x=t_grid, y=p, kind="points"),
                                      dict(label="Wilson upper", x=t_grid,
                                           y=[r["p_far_hi"] for r in rows])])
    rep.notes.append("the position inequality x_n(t) <= x_m(t - t^nu) + increment is checked; "
                     "in the rescaled variables it reads X >= X~ + shift, and the fraction of "
                     "trials satisfying the reversed display is reported")
    return _finish(rep, t0)


# -- localization --------------------------------------------------------------------

LOCALIZATION = dict(nu=1.25, eps=0.15, t=[500.0, 1000.0, 2000.0], trials=200, tau_points=64)


def _localization_trial(N, t, seed, cps, nu):
    s = E.make_initial("half_flat_A", N, t, log_mode=E.LOG_SUPPRESSIONS)
    snap = E.sweep([s], seed, t, cps)[0]
    path = E.backward_index_path(s, N, t)
    lo = s.label_lo
    Ng = path(cps)
    xg = snap[np.arange(len(cps)), Ng - lo]
    # at each jump time both the new (lower) and old label are observed
    tj = path.times
    Nl = path.values[:-1]
    Nu = path.values[1:]
    xl = path.chain_positions
    times = np.concatenate([cps, tj, tj])
    labels = np.concatenate([Ng, Nl, Nu])
    pos = np.concatenate([xg, xl, xl - 1])
    return times, labels, pos, int(path(t)), path


def run_localization(cfg):
    """Backward index path and the positions along it stay near the characteristic."""
    cfg = cfg.with_defaults(LOCALIZATION)
    exp = load_expectations()["localization"]
    nu, eps = cfg["nu"], cfg["eps"]
    if nu <= 1:
        raise ConfigError("nu must exceed 1")
    if not 0 < eps < 1 / 3:
        raise ConfigError("eps must lie in (0, 1/3)")
    t_grid = sorted(cfg["t"])
    for t in t_grid:
        if t ** (2 / 3 + eps) >= 0.5 * t:
            raise ConfigError(f"t={t:g}: band t^(2/3+eps) = {t ** (2 / 3 + eps):.0f} is not "
                              f"below t/2; increase t or decrease eps")
    t0 = time.time()
    rep = ExperimentReport("localization", cfg.as_dict())
    rows = []
    example_paths = []
    for t in t_grid:
        N = int(round(nu * t))
        b = t ** (2 / 3 + eps)
        cps = np.linspace(0.0, t, cfg["tau_points"])
        esc_n = np.zeros(cfg["trials"], bool)
        esc_fixed = np.zeros(cfg["trials"], bool)
        esc_label = np.zeros(cfg["trials"], bool)
        endpoint = np.zeros(cfg["trials"], bool)
        maxdev = np.zeros(cfg["trials"])
        for k in range(cfg["trials"]):
            times, labels, pos, end, path = _localization_trial(
                N, t, trial_seed(cfg.seed, k), cps, nu)
            center_n = (nu - (1 - times / t) / 4) * t
            dev = np.abs(labels - center_n)
            esc_n[k] = np.any(dev > b)
            maxdev[k] = dev.max() / t ** (2 / 3)
            esc_fixed[k] = np.any(np.abs(pos - (-2 * nu + 0.5) * t) >= 3 * b)
            esc_label[k] = np.any(np.abs(pos - (-2 * labels + times / 2)) >= 3 * b)
            endpoint[k] = end == N
            if t == t_grid[-1] and k < 5:
                ts = np.concatenate([cps, path.times])
                order = np.argsort(ts, kind="stable")
                ts = ts[order]
                example_paths.append(dict(
                    label=f"trial {k}", x=(ts / t).tolist(),
                    y=((path(ts) - (nu - (1 - ts / t) / 4) * t) / b).tolist(), kind="step"))
        pn, pf, pl = proportion(esc_n), proportion(esc_fixed), proportion(esc_label)
        rows.append(dict(t=t, N=N, band=b, trials=cfg["trials"], **_row("escape_N", pn),
                         **_row("escape_pos_fixed", pf), **_row("escape_pos_label", pl),
                         mean_max_dev=float(maxdev.mean()), endpoint_ok=int(endpoint.all())))
    rep.add_table("localization", rows)

    fits = {}
    for key in ("escape_N", "escape_pos_fixed", "escape_pos_label"):
        ts = np.array([r["t"] for r in rows])
        ps = np.array([r[key] for r in rows])
        ok = ps > 0
        if ok.sum() >= 2:
            slope, icpt = np.polyfit(ts[ok] ** (2 * eps), np.log(ps[ok]), 1)
            fits[key] = dict(C=float(math.exp(icpt)), c=float(-slope))
        else:
            fits[key] = dict(C=float("nan"), c=float("nan"))
    rep.stats.update(fits=fits, final=rows[-1])
    last = rows[-1]
    rep.check("endpoint", all(r["endpoint_ok"] for r in rows))
    rep.check("escape_N", last["escape_N_hi"] <= exp["escape_max"])
    rep.check("escape_position", last["escape_pos_fixed_hi"] <= exp["escape_max"])
    rep.check("escape_N_decreasing", _non_increasing([r["escape_N"] for r in rows]))
    rep.check("escape_position_decreasing",
              _non_increasing([r["escape_pos_fixed"] for r in rows]))
    rep.plots["backward_paths"] = dict(
        title=f"backward index path, t={t_grid[-1]:g}", xlabel="tau",
        ylabel="(N(tau t) - center) / band", series=example_paths, hlines=[-1.0, 1.0])
    rep.notes.append("escape means leaving the band for some tau on the grid or at a jump "
                     "time of the path")
    rep.notes.append("the characteristic center of the positions, -2 N + tau t / 2 with "
                     "N = (nu - (1 - tau)/4) t, equals (-2 nu + 1/2) t for every tau; the "
                     "realized-label center -2 N(tau t) + tau t / 2 is reported as well")
    return _finish(rep, t0)


# -- tails ---------------------------------------------------------------------------

TAILS = dict(t=[500.0], trials=10_000, nus=[0.25, 0.5], s_max=4.0, grid_points=16)


def _tail_fit(s, p, k, n, power):
    """Least-squares ``log p = a - c s^power`` and the smallest envelope ``C e^{-c s^power}``.

    The envelope is fitted on grid points with at least 10 tail samples and
    then checked against the lower Wilson edge at every grid point.
    """
    keep = k >= 10
    out = dict(points=int(keep.sum()), insufficient=int((~keep).sum()))
    if keep.sum() < 3:
        out.update(a=float("nan"), c=float("nan"), r2=float("nan"), dominated=0)
        return out
    g = s[keep] ** power
    y = np.log(p[keep])
    c_neg, a = np.polyfit(g, y, 1)
    res = y - (a + c_neg * g)
    r2 = 1 - np.sum(res ** 2) / np.sum((y - y.mean()) ** 2)
    C = math.exp(a + res.max())
    lo = np.array([wilson(int(kk), int(n))[1] for kk in k])
    dom = bool(np.all(lo <= C * np.exp(c_neg * s ** power) + 1e-12))
    out.update(a=float(a), c=float(-c_neg), r2=float(r2), C=C, dominated=int(dom))
    return out


def run_tail_checks(cfg):
    """Tails of step and flat particles and the coupling bounds for half-flat data."""
    cfg = cfg.with_defaults(TAILS)
    exp = load_expectations()["tails"]
    t = float(cfg["t"][0])
    trials = cfg["trials"]
    if t <= 0:
        raise ConfigError("t must be positive")
    t0 = time.time()
    rep = ExperimentReport("tails", cfg.as_dict())
    scale = t ** (1 / 3)
    n4 = int(round(t / 4))

    def sample(kind, label, seed_off):
        s = E.make_initial(kind, label, t, log_mode=E.LOG_NONE)
        return final_positions([s], cfg.seed + seed_off, trials, t, [label],
                               threads=cfg.threads)[:, 0, 0].astype(float)

    step = sample("step", n4, 0)
    flat = sample("flat", n4, 1)
    s = np.linspace(cfg["s_max"] / cfg["grid_points"], cfg["s_max"], cfg["grid_points"])
    S_step, S_flat = step / scale, flat / scale
    tails = {
        "step_right": (s, S_step[:, None] >= s[None, :], 1.5),
        "step_left": (s, S_step[:, None] <= -s[None, :], 1.0),
        "flat_left": (s, S_flat[:, None] <= -s[None, :], 1.0),
    }
    rows, fits = [], {}
    series = []
    for name, (grid, mask, power) in tails.items():
        k = mask.sum(axis=0)
        p = k / trials
        fits[name] = _tail_fit(grid, p, k, trials, power)
        for si, ki in zip(grid, k):
            rows.append(dict(tail=name, s=float(si), count=int(ki), p=float(ki / trials)))
        nz = k > 0
        series.append(dict(label=name, x=grid[nz].tolist(), y=p[nz].tolist(), kind="points"))
    rep.add_table("tails", rows)
    rep.add_table("tail_fits", [dict(tail=k, **v) for k, v in fits.items()])

    # coupling bounds for the half-flat particle nu t
    sg = np.linspace(-cfg["s_max"], cfg["s_max"], 2 * cfg["grid_points"] + 1)
    crow = []
    bad = 0
    for j, nu in enumerate(cfg["nus"]):
        lab = int(round(nu * t))
        xa = sample("half_flat_A", lab, 2 + j)
        c = -2 * lab + t / 2
        for sv in sg:
            lhs = proportion(xa <= c - sv * scale)
            rhs = proportion(flat <= -sv * scale)
            v1 = lhs["lo"] > rhs["hi"]
            row = dict(nu=nu, s=float(sv), left=lhs["p"], flat_left=rhs["p"], left_violation=v1)
            v2 = False
            if nu >= 0.25:
                lhs2 = proportion(xa >= c - sv * scale)
                rhs2 = proportion(step >= -sv * scale)
                v2 = lhs2["lo"] > rhs2["hi"]
                row.update(right=lhs2["p"], step_right=rhs2["p"], right_violation=v2)
            bad += int(v1) + int(v2)
            crow.append(row)
    rep.add_table("coupling_bounds", crow)
    rep.stats.update(fits=fits, coupling_violations=bad,
                     step_mean=float(S_step.mean()), flat_mean=float(S_flat.mean()))
    rep.check("step_right_r2", fits["step_right"]["r2"] >= exp["r2_min"])
    for name, f in fits.items():
        rep.check(f"{name}_dominated", f["dominated"] == 1 and f["c"] > 0)
    rep.check("coupling_bounds", bad == 0)
    rep.plots["tails"] = dict(title=f"tail probabilities, t={t:g}", xlabel="s",
                              ylabel="probability", logy=True, series=series)
    if any(f["insufficient"] for f in fits.values()):
        rep.notes.append("grid points with fewer than 10 tail samples were left out of the fits")
    return _finish(rep, t0)


# -- system A limit ------------------------------------------------------------------

SYSTEM_A = dict(alpha=0.25, eta=0.0, t=[2000.0], trials=2000, delta=0.3)


def run_system_A_limit(cfg):
    """Half-flat particle on the t^(1/3) scale against F_GOE(2 s)."""
    cfg = cfg.with_defaults(SYSTEM_A)
    exp = load_expectations()["system_a_limit"]
    alpha, eta = cfg["alpha"], cfg["eta"]
    if not 0 < alpha < 0.5:
        raise ConfigError("alpha must lie in (0, 1/2)")
    t = float(cfg["t"][-1])
    t0 = time.time()
    rep = ExperimentReport("system-a-limit", cfg.as_dict())
    n = int(math.floor((1 - alpha) * t / 2 + eta * math.sqrt(t)))
    A = E.make_initial("half_flat_A", n, t, log_mode=E.LOG_NONE)
    x = final_positions([A], cfg.seed, cfg["trials"], t, [n], threads=cfg.threads)[:, 0, 0]
    shifted = x - (alpha - 0.5) * t + 2 * eta * math.sqrt(t)
    s = -shifted / t ** (1 / 3)
    Y = -shifted / math.sqrt(t)

    def F1(a):
        # below -8 the GOE law is under 1e-9; above 8 it is 1 to double precision
        return 0.0 if a < -8 else 1.0 if a > 8 else rmt.tracy_widom_cdf(a, 1)

    def G(v):
        return np.array([F1(2 * a) for a in np.atleast_1d(v)])

    ks = ks_distance(s, G)
    collapse = proportion(Y > cfg["delta"])
    med_ref = rmt.quantile(F1, 0.5, lo=-6.0, hi=4.0) / 2
    med = float(np.median(s))

    grid = np.linspace(-5, 3, 33)
    vals, errs = [], []
    for v in grid:
        F, err = rmt.tracy_widom_cdf(v, 1, with_error=True)
        vals.append(F)
        errs.append(err)
    rep.add_table("goe_check", [dict(s=float(v), F=f, node_doubling=e)
                                for v, f, e in zip(grid, vals, errs)])
    rep.stats.update(ks=ks, n=n, median=med, median_reference=med_ref,
                     collapse=collapse, max_node_doubling=float(max(errs)),
                     ks_band_95=ks_band(cfg["trials"]))
    rep.check("ks", ks <= exp["ks_max"])
    rep.check("collapse", collapse["hi"] <= exp["collapse_max"])
    rep.check("median_sign", np.sign(med) == np.sign(med_ref))
    rep.check("goe_monotone", bool(np.all(np.diff(vals) >= 0)))
    rep.check("goe_stable", max(errs) <= 1e-6)
    u = np.linspace(s.min(), s.max(), 120)
    rep.plots["system_a_ecdf"] = dict(title=f"half-flat particle, t={t:g}", xlabel="s",
                                      ylabel="CDF",
                                      series=[_ecdf_series(s, "simulation"),
                                              dict(label="F_GOE(2s)", x=u.tolist(),
                                                   y=G(u).tolist())])
    return _finish(rep, t0)


# -- GUE(M) reference ----------------------------------------------------------------

GUE_CDF = dict(Ms=[1, 2, 3, 5], s_min=-4.0, s_max=4.0, grid_points=33, samples=100_000)


def run_gue_cdf(cfg):
    """Hermite projection vs contour Fredholm determinant vs sampled matrices."""
    cfg = cfg.with_defaults(GUE_CDF)
    exp = load_expectations()["gue_cdf"]
    t0 = time.time()
    rep = ExperimentReport("gue-cdf", cfg.as_dict())
    grid = np.linspace(cfg["s_min"], cfg["s_max"], cfg["grid_points"])
    rows, ks_rows, series = [], [], []
    worst = 0.0
    for M in cfg["Ms"]:
        if M < 1:
            raise ConfigError("M must be at least 1")
        for s in grid:
            h = rmt.gue_m_cdf(s, M)
            c = rmt.gue_m_cdf_contour(s, M)
            worst = max(worst, abs(h - c))
            rows.append(dict(M=M, s=float(s), hermite=h, contour=c, gap=abs(h - c)))
        gen = np.random.Generator(np.random.Philox(np.random.SeedSequence([cfg.seed, M])))
        dense = rmt.sample_gue_max(M, gen, cfg["samples"])
        tri = rmt.sample_gue_max_tridiagonal(M, gen, cfg["samples"])
        # dense reference table, linear interpolation error ~1e-6
        fine = np.arange(min(dense.min(), tri.min()) - 0.01,
                         max(dense.max(), tri.max()) + 0.02, 0.005)
        Ff = np.array([rmt.gue_m_cdf(v, M) for v in fine])

        def F(v, fine=fine, Ff=Ff):
            return np.interp(v, fine, Ff)

        k1, k2 = ks_distance(dense, F), ks_distance(tri, F)
        ks_rows.append(dict(M=M, samples=cfg["samples"], ks_dense=k1, ks_tridiagonal=k2,
                            ks_band_95=ks_band(cfg["samples"])))
        series.append(dict(label=f"M={M}", x=grid.tolist(),
                           y=[r["hermite"] for r in rows if r["M"] == M]))
    rep.add_table("gue_cross", rows)
    rep.add_table("gue_ks", ks_rows)
    phi = max(abs(rmt.gue_m_cdf(s, 1) - _st.norm.cdf(s)) for s in grid) if 1 in cfg["Ms"] else 0
    rep.stats.update(max_gap=worst, max_ks=max(r["ks_dense"] for r in ks_rows),
                     M1_vs_normal=float(phi))
    rep.check("cross_methods", worst <= exp["cross_tol"])
    rep.check("monte_carlo", all(r["ks_dense"] <= exp["ks_max"] for r in ks_rows))
    rep.plots["gue_cdf"] = dict(title="GUE(M) largest eigenvalue", xlabel="s", ylabel="CDF",
                                series=series)
    return _finish(rep, t0)


# -- finite-time and rescaled kernels ------------------------------------------------

KERNEL_LIMIT = dict(ft_n=5, ft_t=10.0, ft_alpha=0.3, ft_Ms=[0, 1, 2], ft_trials=100_000,
                    alpha=0.25, eta=0.0, M=1, t=[400.0, 1600.0, 6400.0], gap_points=9)


def _pick_xis(n, t, alpha, M, count=4):
    """The ``count`` integer thresholds whose probability is farthest from 0 and 1."""
    cand = []
    for xi in range(-n - M - 2, int(t) + 2):
        F = kernels.finite_time_cdf(xi, n, t, alpha, M).value
        cand.append((xi, F))
        if F < 1e-4:
            break
    best = sorted(cand, key=lambda c: -min(c[1], 1 - c[1]))[:count]
    return sorted(best)


def run_kernel_limit(cfg):
    """Finite-time determinant against simulation and the rescaled kernel limit."""
    cfg = cfg.with_defaults(KERNEL_LIMIT)
    exp = load_expectations()["kernel_limit"]
    t0 = time.time()
    rep = ExperimentReport("kernel-limit", cfg.as_dict())
    n, tf, al = cfg["ft_n"], cfg["ft_t"], cfg["ft_alpha"]
    trials = cfg["ft_trials"]
    rows = []
    for M in cfg["ft_Ms"]:
        B = E.make_initial("slow_step_B", n, tf, M=M, alpha=al, log_mode=E.LOG_NONE)
        x = final_positions([B], cfg.seed + M, trials, tf, [n], threads=cfg.threads)[:, 0, 0]
        for xi, F in _pick_xis(n, tf, al, M):
            det = kernels.finite_time_cdf(xi, n, tf, al, M)
            p = float(np.mean(x >= xi))
            se = math.sqrt(F * (1 - F) / trials)
            rows.append(dict(M=M, xi=xi, determinant=det.value, det_error=det.error,
                             monte_carlo=p, se=se, z=(p - det.value) / se,
                             ok=abs(p - det.value) <= exp["mc_se"] * se))
    rep.add_table("finite_time", rows)
    rep.check("finite_time_vs_mc", all(r["ok"] for r in rows))

    grid = np.linspace(-2, 2, cfg["gap_points"])
    gaps = []
    for t in sorted(cfg["t"]):
        g, det = kernels.rescaled_kernel_gap(t, cfg["alpha"], cfg["eta"], cfg["M"], grid,
                                             with_details=True)
        gaps.append(dict(t=t, gap=g, imag=det["imag"], eta_eff=det["eta_eff"]))
    rep.add_table("rescaled_gap", gaps)
    gv = [r["gap"] for r in gaps]
    rep.stats.update(gaps=gv, max_z=float(max(abs(r["z"]) for r in rows)))
    rep.check("gap_decreasing", bool(np.all(np.diff(gv) < 0)))
    rep.check("gap_final", gv[-1] <= exp["final_gap_max"])
    rep.plots["rescaled_gap"] = dict(title="sup gap to the limit kernel", xlabel="t",
                                     ylabel="gap", logy=True,
                                     series=[dict(x=[r["t"] for r in gaps], y=gv,
                                                  kind="points", label="sup gap")])
    return _finish(rep, t0)


# -- direct shock determinant --------------------------------------------------------

DIRECT_CDF = dict(n=30, t=[100.0], alpha=0.25, xs=[-19, -15, -11, -7], trials=100_000,
                  cond_t=[25.0, 50.0, 100.0, 200.0])


def run_direct_cdf(cfg):
    """Direct one-slow-particle determinant against simulation, plus conditioning."""
    cfg = cfg.with_defaults(DIRECT_CDF)
    exp = load_expectations()["direct_cdf"]
    n, t, al = cfg["n"], float(cfg["t"][0]), cfg["alpha"]
    if not 0 < al < 0.5:
        raise ConfigError("alpha must lie in (0, 1/2)")
    t0 = time.time()
    rep = ExperimentReport("direct-cdf", cfg.as_dict())
    S = E.make_initial("shock", n, t, M=1, alpha=al, log_mode=E.LOG_NONE)
    x = final_positions([S], cfg.seed, cfg["trials"], t, [n], threads=cfg.threads)[:, 0, 0]
    rows = []
    for xv in cfg["xs"]:
        r = shock_direct.shock_direct_cdf(xv, n, t, al)
        p = float(np.mean(x >= xv))
        se = math.sqrt(r.probability * (1 - r.probability) / cfg["trials"])
        rows.append(dict(x=xv, direct=r.probability, direct_error=r.error, monte_carlo=p,
                         se=se, z=(p - r.probability) / se,
                         ok=abs(p - r.probability) <= exp["mc_se"] * se,
                         cond=r.cond, dps=r.dps))
    rep.add_table("direct_vs_mc", rows)
    rep.check("direct_vs_mc", all(r["ok"] for r in rows))

    crow = []
    for tc in sorted(cfg["cond_t"]):
        sc = E.shock_constants(al, 1, 0.0, tc)
        nc = sc.n_of_t
        xc = int(round(sc.x_of_xi(1.0)))
        r = shock_direct.shock_direct_cdf(xc, nc, tc, al)
        d = shock_direct.shock_direct_cdf(xc, nc, tc, al, backend="double", check=False)
        crow.append(dict(t=tc, n=nc, x=xc, sites=2 * nc + xc, probability=r.probability,
                         cond=r.cond, amplification=r.amplification, dps=r.dps,
                         mp_error=r.error, double_value=d.probability,
                         double_error_bound=d.error))
    rep.add_table("conditioning", crow)
    conds = [r["cond"] for r in crow]
    rep.stats.update(conds=conds, max_z=float(max(abs(r["z"]) for r in rows)))
    rep.check("cond_grows", bool(np.all(np.diff(conds) > 0)))
    rep.plots["conditioning"] = dict(
        title="resolvent conditioning of the direct determinant", xlabel="t",
        ylabel="1-norm condition number", logy=True,
        series=[dict(x=[r["t"] for r in crow], y=conds, kind="points", label="cond"),
                dict(x=[r["t"] for r in crow], y=[r["double_error_bound"] for r in crow],
                     kind="points", label="double error bound")])
    return _finish(rep, t0)


RUNNERS = {
    "shock-law": run_shock_law,
    "min-identity": run_min_identity,
    "slow-decorrelation": run_slow_decorrelation,
    "localization": run_localization,
    "tails": run_tail_checks,
    "system-a-limit": run_system_A_limit,
    "gue-cdf": run_gue_cdf,
    "kernel-limit": run_kernel_limit,
    "direct-cdf": run_direct_cdf,
}


def run(cfg):
    return RUNNERS[cfg.experiment](cfg)
