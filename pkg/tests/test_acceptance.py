"""Full-size acceptance runs, one PASS/FAIL line per criterion.

These use the configs shipped in ``configs/`` and take the better part of an
hour on one core.  Run directly with ``python tests/test_acceptance.py`` or
through pytest.
"""

import sys
from pathlib import Path

import pytest

from shockline.config import load_config
from shockline.experiments import run

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
_cache = {}


def report(name):
    if name not in _cache:
        _cache[name] = run(load_config(CONFIGS / f"{name}.conf"))
    return _cache[name]


def _fmt(v):
    return f"{v:.4g}" if isinstance(v, float) else str(v)


def _verdict(num, title, checks, budget, runtime, details):
    ok = all(checks.values()) and runtime <= budget
    failed = [k for k, v in checks.items() if not v]
    if runtime > budget:
        failed.append(f"runtime {runtime:.0f}s > {budget}s")
    info = ", ".join(f"{k}={_fmt(v)}" for k, v in details.items())
    line = f"{'PASS' if ok else 'FAIL'} criterion {num}: {title} [{info}; {runtime:.0f}s]"
    if failed:
        line += " failed: " + ", ".join(failed)
    return ok, line


def criterion_1():
    r = report("min-identity")
    return _verdict(1, "min identity", {"zero_violations": r.verdicts["zero_violations"]},
                    120, r.runtime, dict(violations=r.stats["total_violations"],
                                         canary=r.stats["canary_violations"]))


def criterion_2():
    r = report("shock-law")
    keys = ("atom", "ks_beyond", "left_mass", "left_mass_decreasing")
    s = r.stats
    return _verdict(2, "shock law M=1", {k: r.verdicts[k] for k in keys}, 600, r.runtime,
                    dict(atom=s["atom"], target=s["target"], ks=s["ks_beyond"],
                         left=s["left"]))


def criterion_3():
    checks, details, rt = {}, {}, 0.0
    for name in ("shock-law-M2", "shock-law-M2-eta"):
        r = report(name)
        eta = r.config["eta"]
        checks[f"atom eta={eta}"] = r.verdicts["atom"]
        checks[f"references eta={eta}"] = r.verdicts["reference_methods_agree"]
        details[f"atom{eta}"] = r.stats["atom"]
        details[f"target{eta}"] = r.stats["target"]
        rt += r.runtime
    return _verdict(3, "shock law M=2", checks, 900, rt, details)


def criterion_4():
    r = report("gue-cdf")
    return _verdict(4, "GUE(M) cross-validation", dict(r.verdicts), 120, r.runtime,
                    dict(max_gap=r.stats["max_gap"], max_ks=r.stats["max_ks"]))


def criterion_5():
    r = report("kernel-limit")
    rows = r.tables["finite_time"]
    per_M = {M: sum(1 for x in rows if x["M"] == M) for M in (0, 1, 2)}
    checks = {"finite_time_vs_mc": r.verdicts["finite_time_vs_mc"],
              "four_thresholds_each": all(v == 4 for v in per_M.values())}
    return _verdict(5, "finite-time kernel vs simulation", checks, 300, r.runtime,
                    dict(max_z=r.stats["max_z"]))


def criterion_6():
    r = report("kernel-limit")
    checks = {k: r.verdicts[k] for k in ("gap_decreasing", "gap_final")}
    return _verdict(6, "rescaled kernel convergence", checks, 180, r.runtime,
                    dict(gaps=[round(g, 5) for g in r.stats["gaps"]]))


def criterion_7():
    r = report("slow-decorrelation")
    # the experiment's own regression bound on the final value is not part of this
    keys = ("non_increasing", "sandwich")
    return _verdict(7, "slow decorrelation", {k: r.verdicts[k] for k in keys}, 600, r.runtime,
                    dict(p_far=[round(p, 4) for p in r.stats["p_far"]],
                         sandwich_violations=r.stats["sandwich_violations"],
                         final_bound=r.verdicts["final_bound"]))


def criterion_8():
    r = report("localization")
    keys = ("escape_N", "escape_position", "escape_N_decreasing",
            "escape_position_decreasing")
    f = r.stats["final"]
    return _verdict(8, "localization", {k: r.verdicts[k] for k in keys}, 300, r.runtime,
                    dict(escape_N=f["escape_N"], escape_pos=f["escape_pos_fixed"]))


def criterion_9():
    r = report("system-a-limit")
    keys = ("ks", "goe_monotone", "goe_stable")
    return _verdict(9, "system A GOE limit", {k: r.verdicts[k] for k in keys}, 600,
                    r.runtime, dict(ks=r.stats["ks"],
                                    node_doubling=r.stats["max_node_doubling"]))


def criterion_10():
    r = report("direct-cdf")
    return _verdict(10, "direct shock determinant", dict(r.verdicts), 600, r.runtime,
                    dict(max_z=r.stats["max_z"],
                         cond=[f"{c:.2g}" for c in r.stats["conds"]]))


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10]


@pytest.mark.slow
@pytest.mark.parametrize("crit", CRITERIA, ids=[f"criterion_{k}" for k in range(1, 11)])
def test_criterion(crit, capsys):
    ok, line = crit()
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [c() for c in CRITERIA]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
