import math

import numpy as np
import pytest
from scipy import stats

from shockline import engine as E
from shockline import kernels
from shockline.fredholm import ConvergenceError, KernelSpec, det_once, fredholm_det, with_kappa


def test_rank_one_continuous():
    spec = KernelSpec(lambda x, y: 0.7 * np.exp(-x[:, None] - y[None, :]), a=0.0, span=40.0,
                      nodes=48, panels=4)
    assert fredholm_det(spec).value == pytest.approx(1 - 0.35, abs=1e-12)


def test_rank_one_lattice():
    r = 0.5
    spec = KernelSpec(lambda x, y: r ** np.abs(x)[:, None] * r ** np.abs(y)[None, :], a=0.0,
                      span=80, lattice=True)
    assert fredholm_det(spec).value == pytest.approx(1 - r * r / (1 - r * r), abs=1e-14)


def test_conjugation_leaves_determinant_unchanged():
    spec = KernelSpec(lambda x, y: np.exp(-(x[:, None] ** 2 + y[None, :] ** 2)) * 0.4,
                      a=-1.0, span=6.0, nodes=40)
    d0 = fredholm_det(spec).value
    d1 = fredholm_det(with_kappa(spec, lambda x: 0.3 * x)).value
    assert d0 == pytest.approx(d1, abs=1e-13)


def test_unconverged_determinant_raises():
    spec = KernelSpec(lambda x, y: 0.9 ** np.abs(x)[:, None] * 0.9 ** np.abs(y)[None, :],
                      a=0.0, span=5, lattice=True, tol=1e-12)
    with pytest.raises(ConvergenceError):
        fredholm_det(spec)
    assert np.isfinite(det_once(spec))


@pytest.mark.parametrize("t", [0.5, 3.0])
def test_finite_time_single_particle_is_poisson(t):
    # with no slow particles, particle 1 starts at -1 and moves freely
    for xi in (-1, 0, 1, 3):
        F = kernels.finite_time_cdf(xi, 1, t, 0.3, 0).value
        assert F == pytest.approx(stats.poisson.sf(xi, t), abs=1e-10)


def test_finite_time_matches_simulation_small():
    n, t, a, M = 3, 4.0, 0.3, 1
    B = E.make_initial("slow_step_B", n, t, M=M, alpha=a, log_mode=E.LOG_NONE)
    x = E.sweep_batch([B], 8, 20_000, t, [n]).final[:, 0, 0]
    for xi in (-2, -1, 0):
        F = kernels.finite_time_cdf(xi, n, t, a, M).value
        se = math.sqrt(F * (1 - F) / x.size)
        assert abs(np.mean(x >= xi) - F) <= 4 * se


def test_critical_points():
    cp = kernels.f0_f1_critical_points(0.25)
    assert np.max(np.abs(cp.residuals)) < 1e-8
    with pytest.raises(ValueError):
        kernels.f0_f1_critical_points(0.6)


def test_rescaled_gap_shrinks():
    grid = np.linspace(-2, 2, 5)
    g1 = kernels.rescaled_kernel_gap(400.0, 0.25, 0.0, 1, grid)
    g2 = kernels.rescaled_kernel_gap(1600.0, 0.25, 0.0, 1, grid)
    assert g2 < g1
