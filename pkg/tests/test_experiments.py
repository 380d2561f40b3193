import json

import numpy as np
import pytest

from shockline.cli import main
from shockline.config import ConfigError, make_config
from shockline.experiments import run
from shockline.report import emit_report


def _small_min_identity(**kw):
    return make_config("min-identity", 5, trials=120, max_label=20, t=[30.0],
                       checkpoint_step=10.0, canary_trials=40, **kw)


def test_min_identity_small():
    rep = run(_small_min_identity())
    assert rep.verdicts == {"zero_violations": True, "canary_detects": True}
    assert rep.stats["canary_violations"] > 0


def test_min_identity_at_time_zero():
    rep = run(make_config("min-identity", 5, trials=20, max_label=10, t=[0.0],
                          checkpoint_step=1.0, canary_trials=5))
    assert rep.stats["total_violations"] == 0


def test_reports_are_reproducible(tmp_path):
    a = run(_small_min_identity())
    b = run(_small_min_identity(threads=3))
    pa = emit_report(a, tmp_path / "a")
    pb = emit_report(b, tmp_path / "b")
    for name in pa["tables"]:
        with open(pa["tables"][name], "rb") as fa, open(pb["tables"][name], "rb") as fb:
            assert fa.read() == fb.read()


def test_shock_law_threads_do_not_change_statistics():
    kw = dict(trials=1000, t=[40.0, 80.0], deltas=[0.2])
    a = run(make_config("shock-law", 9, **kw))
    b = run(make_config("shock-law", 9, threads=2, **kw))
    assert a.tables == b.tables


def test_shock_law_rejects_too_few_trials():
    with pytest.raises(ConfigError):
        run(make_config("shock-law", 1, trials=50, t=[40.0, 80.0]))


def test_shock_law_alpha_range():
    with pytest.raises(ConfigError):
        run(make_config("shock-law", 1, alpha=0.5))


def test_localization_refuses_macroscopic_band():
    with pytest.raises(ConfigError):
        run(make_config("localization", 1, t=[50.0, 100.0], eps=0.3, trials=2))


def test_localization_parameter_ranges():
    with pytest.raises(ConfigError):
        run(make_config("localization", 1, nu=0.9))
    with pytest.raises(ConfigError):
        run(make_config("localization", 1, eps=0.4))


def test_localization_small():
    rep = run(make_config("localization", 2, t=[500.0, 1000.0], trials=4, tau_points=16))
    assert rep.verdicts["endpoint"]
    row = rep.tables["localization"][-1]
    assert row["band"] == pytest.approx(1000 ** (2 / 3 + 0.15))


def test_slow_decorrelation_sandwich_small():
    rep = run(make_config("slow-decorrelation", 3, t=[200.0, 400.0], trials=60,
                          nu_compare=[0.5, 0.99], compare_trials=60))
    assert rep.verdicts["sandwich"]
    with pytest.raises(ConfigError):
        run(make_config("slow-decorrelation", 3, t=[200.0]))
    with pytest.raises(ConfigError):
        run(make_config("slow-decorrelation", 3, nu=1.2))


def test_direct_cdf_small():
    rep = run(make_config("direct-cdf", 4, n=6, t=[10.0], xs=[-10, -7], trials=4000,
                          cond_t=[10.0, 20.0]))
    assert rep.verdicts["direct_vs_mc"] and rep.verdicts["cond_grows"]


def test_cli_round_trip(tmp_path):
    conf = tmp_path / "g.conf"
    conf.write_text("experiment = gue-cdf\nseed = 1\nMs = 1\ngrid_points = 5\n"
                    "samples = 40000\n")
    code = main(["gue-cdf", "--config", str(conf), "--out", str(tmp_path / "o")])
    assert code == 0
    doc = json.loads((tmp_path / "o" / "report.json").read_text())
    assert doc["verdict"] and doc["config"]["seed"] == 1


def test_cli_failing_verdict_sets_exit_code(tmp_path):
    conf = tmp_path / "g.conf"
    # far too few samples for the 0.01 KS bound
    conf.write_text("experiment = gue-cdf\nseed = 1\nMs = 1\ngrid_points = 3\nsamples = 200\n")
    assert main(["gue-cdf", "--config", str(conf), "--out", str(tmp_path / "o")]) == 1


def test_cli_config_errors(tmp_path):
    conf = tmp_path / "g.conf"
    conf.write_text("experiment = gue-cdf\n")
    assert main(["gue-cdf", "--config", str(conf)]) == 2
    conf.write_text("experiment = tails\nseed = 1\n")
    assert main(["gue-cdf", "--config", str(conf)]) == 2


def test_tail_fit_accepts_faster_decay_and_flags_flat_tails():
    from shockline.experiments import _tail_fit
    s = np.linspace(0.25, 3.0, 12)
    n = 100_000
    k = np.round(n * np.exp(-s ** 3)).astype(int)
    fit = _tail_fit(s, k / n, k, n, 1.5)
    assert fit["dominated"] == 1 and fit["c"] > 0
    k = np.round(n / 10 * (1 + s / 10)).astype(int)
    assert not _tail_fit(s, k / n, k, n, 1.5)["c"] > 0
