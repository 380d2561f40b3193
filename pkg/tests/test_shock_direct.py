import math

import numpy as np
import pytest

from shockline import engine as E
from shockline.shock_direct import (ConditioningError, default_dps, scalar_term,
                                    shock_direct_cdf, shock_direct_parts)


def test_matches_simulation_small():
    n, t, a = 4, 6.0, 0.25
    S = E.make_initial("shock", n, t, M=1, alpha=a, log_mode=E.LOG_NONE)
    x = E.sweep_batch([S], 21, 40_000, t, [n]).final[:, 0, 0]
    for xv in (-8, -6, -4, -2):
        r = shock_direct_cdf(xv, n, t, a)
        se = math.sqrt(max(r.probability * (1 - r.probability), 1e-6) / x.size)
        assert abs(np.mean(x >= xv) - r.probability) <= 4 * se


def test_probability_decreasing_in_x():
    p = [shock_direct_cdf(x, 6, 8.0, 0.3).probability for x in range(-14, 0, 2)]
    assert np.all(np.diff(p) <= 1e-12)
    assert 0 <= min(p) and max(p) <= 1


def test_section_below_tracked_start_is_empty():
    # x_n(t) >= -2n - 2 always holds
    r = shock_direct_cdf(-2 * 5 - 2, 5, 3.0, 0.25)
    assert r.probability == pytest.approx(1.0, abs=1e-20)


def test_precision_is_stable():
    r1 = shock_direct_cdf(-11, 30, 100.0, 0.25)
    assert r1.error < 1e-12
    assert default_dps(30, 100.0) >= 60


def test_double_precision_degrades():
    with pytest.raises(ConditioningError):
        shock_direct_cdf(-11, 30, 100.0, 0.25, backend="double")
    small = shock_direct_cdf(-4, 3, 2.0, 0.25, backend="double")
    ref = shock_direct_cdf(-4, 3, 2.0, 0.25)
    assert small.probability == pytest.approx(ref.probability, abs=1e-9)


def test_scalar_term_matches_parts():
    parts = shock_direct_parts(-5, 5, 6.0, 0.3, backend="mp")
    import mpmath
    with mpmath.workdps(parts.dps):
        sc = float(mpmath.fsum(g * f for g, f in zip(parts.g, parts.f)))
    assert scalar_term(-5, 5, 6.0, 0.3) == pytest.approx(sc, rel=1e-12)


def test_bad_arguments():
    with pytest.raises(ValueError):
        shock_direct_cdf(0, 3, 1.0, 0.6)
    with pytest.raises(ValueError):
        shock_direct_parts(0, 3, 1.0, 0.3, backend="quad")
