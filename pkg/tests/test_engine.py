import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shockline import engine as E


def test_shock_initial_condition():
    s = E.make_initial("shock", 3, 10.0, M=2, alpha=0.3)
    assert s.as_dict() == {-1: 1, 0: 0, 1: -2, 2: -4, 3: -6}
    assert s.rate_dict() == {-1: 0.3, 0: 0.3, 1: 1.0, 2: 1.0, 3: 1.0}


def test_step_and_other_initial_conditions():
    assert E.make_initial("step", 3, 5.0).as_dict() == {1: 0, 2: -1, 3: -2}
    assert E.make_initial("half_flat_A", 2, 5.0).as_dict() == {1: -2, 2: -4}
    B = E.make_initial("slow_step_B", 2, 5.0, M=2, alpha=0.5)
    assert B.as_dict() == {-1: 1, 0: 0, 1: -1, 2: -2}
    assert B.rate_dict()[0] == 0.5 and B.rate_dict()[1] == 1.0


def test_flat_instantiates_light_cone():
    s = E.make_initial("flat", 100, 50.0)
    assert s.label_lo == 100 - E.light_cone_pad(50.0)
    assert s.x(100) == -200


def test_flat_pad_is_sufficient():
    # doubling the pad must not change the tracked trajectory
    t, N = 50.0, 100
    pad = E.light_cone_pad(t)
    for seed in range(5):
        s1 = E.make_initial("flat", N, t, log_mode=E.LOG_NONE)
        lo = N - 2 * pad
        labels = np.arange(lo, N + 1)
        s2 = E.SystemState("flat", lo, -2 * labels, np.ones(len(labels)), 0.0, E.LOG_NONE)
        E.sweep([s1, s2], seed, t)
        assert s1.x(N) == s2.x(N)


@pytest.mark.parametrize("kw", [dict(kind="step", tracked_label=0, horizon=1.0),
                                dict(kind="step", tracked_label=3, horizon=0.0),
                                dict(kind="shock", tracked_label=-5, horizon=1.0, M=2),
                                dict(kind="shock", tracked_label=3, horizon=1.0, alpha=1.5),
                                dict(kind="bogus", tracked_label=3, horizon=1.0)])
def test_make_initial_errors(kw):
    with pytest.raises(ValueError):
        E.make_initial(**kw)


def test_sweep_equals_time_ordered_run():
    for seed in range(4):
        a = E.make_initial("shock", 20, 15.0, M=2, alpha=0.3, log_mode=E.LOG_ALL)
        b = a.copy()
        clock = E.clock_for([a], seed, 15.0)
        E.advance_coupled(clock, [a], 15.0)
        E.sweep([b], seed, 15.0)
        assert np.array_equal(a.positions, b.positions)
        ea = sorted(zip(*[x.tolist() for x in a.events()]))
        eb = sorted(zip(*[x.tolist() for x in b.events()]))
        assert ea == eb


def test_advance_in_steps_equals_single_advance():
    a = E.make_initial("step", 15, 12.0)
    b = a.copy()
    ca, cb = E.clock_for([a], 3, 12.0), E.clock_for([b], 3, 12.0)
    for t in (2.0, 5.5, 12.0):
        E.advance_coupled(ca, [a], t)
    E.advance_coupled(cb, [b], 12.0)
    assert np.array_equal(a.positions, b.positions)


def test_advance_errors():
    a = E.make_initial("step", 5, 10.0)
    clock = E.clock_for([a], 1, 10.0)
    with pytest.raises(ValueError):
        E.advance_coupled(clock, [a], 11.0)
    E.advance_coupled(clock, [a], 5.0)
    with pytest.raises(ValueError):
        E.advance_coupled(clock, [a], 4.0)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**63), kind=st.sampled_from(["shock", "step", "half_flat_A"]))
def test_exclusion_and_monotone_paths(seed, kind):
    s = E.make_initial(kind, 12, 8.0, M=2, alpha=0.4, log_mode=E.LOG_ALL)
    E.sweep([s], seed, 8.0)
    snaps = E.replay(s, np.linspace(0, 8.0, 33))
    assert np.all(np.diff(snaps, axis=1) < 0)    # strict ordering by label
    assert np.all(np.diff(snaps, axis=0) >= 0)   # no particle moves left
    assert np.array_equal(snaps[-1], s.positions)


def test_min_identity_and_canary():
    ok = []
    for seed in range(10):
        tr = E.coupled_triple(2, 0.3, 30, 40.0, seed).advance(40.0)
        ok += list(E.min_identity_check(tr, range(1, 31)).values())
    assert all(ok)
    bad = []
    for seed in range(10):
        tr = E.coupled_triple(2, 0.3, 30, 40.0, seed, independent=True).advance(40.0)
        bad += list(E.min_identity_check(tr, range(1, 31)).values())
    assert not all(bad)


def test_influence_path_and_dichotomy():
    for seed in range(5):
        tr = E.coupled_triple(1, 0.25, 40, 30.0, seed, log_mode=E.LOG_ALL).advance(30.0)
        I = E.influence_path(tr.shock)
        assert I.values[0] == 0
        assert np.all(np.diff(I.values) == 1)
        assert np.all(np.diff(I.times) > 0)
        assert E.influence_dichotomy_violations(tr) == 0


def test_backward_index_path():
    s, _ = E.sweep_run("half_flat_A", 60, 40.0, 9, log_mode=E.LOG_SUPPRESSIONS)
    p = E.backward_index_path(s, 60, 40.0)
    assert p(40.0) == 60
    assert np.all(np.diff(p.values) == 1)
    assert np.all(p(np.linspace(0, 40, 50))[:-1] <= p(np.linspace(0, 40, 50))[1:])
    with pytest.raises(KeyError):
        E.backward_index_path(s, 61)


def test_auxiliary_identity():
    for seed in range(5):
        r = E.auxiliary_identity_check("half_flat_A", seed, 50, 15.0, 30.0)
        assert r.holds


def test_trajectory_csv_round_trip(tmp_path):
    s = E.make_initial("step", 6, 5.0, log_mode=E.LOG_ALL)
    E.sweep([s], 4, 5.0)
    path = tmp_path / "traj.csv"
    E.write_trajectory_csv(s, path)
    back = E.read_trajectory_csv(path)
    for a, b in zip(s.events(), back):
        assert np.array_equal(a, b)


def test_sweep_batch_matches_single_runs():
    tmpl = E.make_initial("shock", 15, 10.0, M=1, alpha=0.25, log_mode=E.LOG_NONE)
    r = E.sweep_batch([tmpl], 77, 6, 10.0, labels=[5, 15], checkpoints=[5.0])
    r2 = E.sweep_batch([tmpl], 77, 3, 10.0, labels=[5, 15], checkpoints=[5.0], trial0=3)
    assert np.array_equal(r.final[3:], r2.final)
    from shockline.rng import trial_seed
    for k in range(6):
        s = tmpl.copy()
        snap = E.sweep([s], trial_seed(77, k), 10.0, [5.0])
        assert s.x(5) == r.final[k, 0, 0] and s.x(15) == r.final[k, 0, 1]
        assert snap[0, 0, 15 - s.label_lo] == r.snapshots[k, 0, 0, 1]
    assert np.array_equal(tmpl.positions, tmpl.initial_positions)


def test_shock_scaling():
    sc = E.shock_constants(0.25, 1, 0.5, 400.0)
    assert math.isclose(sc.sigma, math.sqrt(0.25 * 0.5 / 1.5))
    assert math.isclose(sc.xi_c, 0.5 * math.sqrt(2 * 0.5 / (0.25 * 0.75)))
    assert sc.shock_speed == -0.25
    assert sc.n_of_t == math.floor(0.375 * 400 + 0.5 * 20)
    assert math.isclose(sc.xi_hat(sc.x_of_xi(1.3)), 1.3)
    with pytest.raises(ValueError):
        E.shock_constants(0.5, 1, 0.0, 10.0)
    with pytest.raises(ValueError):
        E.shock_constants(0.25, 0, 0.0, 10.0)
