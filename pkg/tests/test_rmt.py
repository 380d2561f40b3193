import numpy as np
import pytest
from scipy import stats

from shockline import rmt
from shockline.fredholm import gauss_legendre
from shockline.stats import ks_distance


def test_airy_values():
    assert rmt.airy_ai(0.0) == pytest.approx(0.355028053887817, abs=1e-15)
    assert rmt.airy_ai_prime(0.0) == pytest.approx(-0.258819403792807, abs=1e-15)
    with pytest.raises(ValueError):
        rmt.airy_ai(50.0)


def test_gue1_is_standard_normal():
    for s in np.linspace(-4, 4, 17):
        assert rmt.gue_m_cdf(s, 1) == pytest.approx(stats.norm.cdf(s), abs=1e-12)


@pytest.mark.parametrize("M", [1, 2, 3, 5])
def test_hermite_and_contour_agree(M):
    for s in (-3.0, -1.0, 0.0, 1.5, 3.0):
        assert abs(rmt.gue_m_cdf(s, M) - rmt.gue_m_cdf_contour(s, M)) <= 1e-6


def test_gue_cdf_monotone_in_s_and_M():
    grid = np.linspace(-4, 5, 40)
    F2 = np.array([rmt.gue_m_cdf(s, 2) for s in grid])
    F3 = np.array([rmt.gue_m_cdf(s, 3) for s in grid])
    assert np.all(np.diff(F2) >= 0)
    # more eigenvalues push the maximum up
    assert np.all(F3 <= F2 + 1e-14)


def test_samplers_match_reference():
    gen = np.random.default_rng(0)
    dense = rmt.sample_gue_max(3, gen, 20_000)
    tri = rmt.sample_gue_max_tridiagonal(3, gen, 20_000)
    F = np.vectorize(lambda s: rmt.gue_m_cdf(s, 3))
    assert ks_distance(dense, F) < 0.015
    assert ks_distance(tri, F) < 0.015


def test_tracy_widom_moments():
    # published means and variances of the GOE and GUE laws
    x, w = gauss_legendre(-8, 10, 90)
    for beta, mean, var in ((1, -1.2065335745820, 1.607781034581),
                            (2, -1.7710868074116, 0.8131947928329)):
        F = np.array([rmt.tracy_widom_cdf(s, beta) for s in x])
        m = 10 - np.sum(w * F)
        v = 100 - np.sum(w * 2 * x * F) - m * m
        assert m == pytest.approx(mean, abs=1e-5)
        assert v == pytest.approx(var, abs=1e-5)


def test_tracy_widom_node_doubling():
    F, err = rmt.tracy_widom_cdf(-2.0, 1, with_error=True)
    assert err <= 1e-6
    assert rmt.tracy_widom_cdf(-2.0, 2) == pytest.approx(0.413224142505, abs=1e-9)


def test_spectral_table(tmp_path):
    tab = rmt.tabulate("hermite_projection", np.linspace(-2, 2, 9), M=2)
    assert tab.is_monotone() and tab.in_unit_interval()
    path = tmp_path / "t.csv"
    tab.to_csv(path)
    head = path.read_text().splitlines()[0]
    assert head == "s,F,method,params,error_estimate"
