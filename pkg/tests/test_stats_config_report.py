import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from shockline.config import ConfigError, make_config, parse_config
from shockline.report import ExperimentReport, emit_report, read_table, write_table
from shockline.stats import ECDF, ecdf, ks_band, ks_distance, proportion, wilson


def test_ks_of_point_mass_is_zero():
    assert ks_distance(ecdf([0.0]), lambda x: (np.asarray(x) >= 0).astype(float)) == 0.0


def test_ks_uniform_within_band():
    u = np.random.default_rng(1).random(10_000)
    assert ks_distance(u, lambda x: np.clip(x, 0, 1)) <= 0.025
    assert ks_band(10_000) == pytest.approx(1.358 / 100, abs=1e-4)


def test_empty_sample_rejected():
    with pytest.raises(ValueError):
        ECDF([])


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50))
def test_ecdf_is_a_distribution_function(xs):
    e = ecdf(xs)
    assert e(-np.inf) == 0 and e(np.inf) == 1
    grid = np.sort(np.array(xs + [min(xs) - 1, max(xs) + 1]))
    v = e(grid)
    assert np.all(np.diff(v) >= 0)
    # right-continuous: value at a sample point includes it
    assert e(max(xs)) == 1.0
    assert e.left(min(xs)) == 0.0


def test_wilson_interval():
    p, lo, hi = wilson(0, 200)
    assert p == 0 and lo == 0 and 0.01 < hi < 0.03
    p, lo, hi = wilson(50, 100)
    assert lo < 0.5 < hi
    assert proportion(np.array([True, False, False, True]))["p"] == 0.5


def test_config_parsing():
    cfg = parse_config("""
    # comment
    experiment = shock-law
    seed = 12   # trailing comment
    t = 125, 250
    M = 2
    """)
    assert cfg.experiment == "shock-law" and cfg.seed == 12
    assert cfg["t"] == [125.0, 250.0] and cfg["M"] == 2


@pytest.mark.parametrize("text", [
    "experiment = shock-law",                       # no seed
    "seed = 3",                                     # no experiment
    "experiment = nope\nseed = 1",
    "experiment = tails\nseed = 1\nfoo = 2",
    "experiment = tails\nseed = 1\nseed = 2",
    "experiment = tails\nseed = x",
    "experiment = tails\nseed = 1\nthreads = 0",
    "experiment tails",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_overrides_win():
    cfg = parse_config("experiment = tails\nseed = 1\ntrials = 10", dict(trials=99, seed=None))
    assert cfg["trials"] == 99 and cfg.seed == 1


def test_table_round_trip(tmp_path):
    rows = [dict(a=1, b=0.1 + 0.2, c="x"), dict(a=-3, b=1e-300, c="y", d=2.5)]
    p = tmp_path / "t.csv"
    write_table(rows, p)
    assert read_table(p) == rows


def test_emit_report(tmp_path):
    rep = ExperimentReport("tails", {"seed": 1})
    rep.add_table("tab", [dict(s=0.5, p=np.float64(1 / 3), ok=np.bool_(True))])
    rep.plots["fig"] = dict(title="x", series=[dict(label="a", x=[0, 1], y=[0, 1])])
    rep.check("fine", True)
    rep.stats["nan"] = float("nan")
    paths = emit_report(rep, tmp_path)
    assert read_table(paths["tables"]["tab"]) == rep.tables["tab"]
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["verdict"] is True and doc["stats"]["nan"] is None
    first = (tmp_path / "fig.svg").read_bytes()
    emit_report(rep, tmp_path)
    assert (tmp_path / "fig.svg").read_bytes() == first


def test_failed_check_fails_report():
    rep = ExperimentReport("x", {})
    assert not rep.verdict
    rep.check("a", True)
    rep.check("b", False)
    assert not rep.verdict


def test_make_config_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        make_config("tails", 1, bogus=3)
