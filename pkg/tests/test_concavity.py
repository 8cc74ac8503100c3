from __future__ import annotations

import numpy as np
import pytest

from hflopt.accuracy import progress
from hflopt.concavity import concavity_check, determinant_factor, fd_hessian, hessian

GRID = np.linspace(0.1, 100.0, 50)


@pytest.mark.parametrize("zeta, gamma", [(1, 1), (1, 10), (10, 1), (7, 3), (10, 10)])
def test_report_clean(zeta, gamma):
    rep = concavity_check(zeta, gamma, GRID, GRID, fd_stride=10)
    assert rep.ok
    assert rep.f_aa_max < 0
    assert rep.points == 2500 and rep.fd_points == 25


def test_fd_matches_analytic_at_a_point():
    a, b, zeta, gamma = 3.7, 12.0, 2.0, 5.0
    analytic = hessian(a, b, zeta, gamma)
    for x, y in zip(fd_hessian(a, b, zeta, gamma), analytic):
        assert x == pytest.approx(float(y), rel=1e-8)


def test_hessian_against_float_differences_of_progress():
    # independent check in plain float64 with a coarse step
    a, b, zeta, gamma, h = 2.0, 4.0, 3.0, 2.0, 1e-4

    def f(x, y):
        return float(progress(x, y, zeta, gamma))

    f_aa = (f(a + h, b) - 2 * f(a, b) + f(a - h, b)) / h**2
    f_bb = (f(a, b + h) - 2 * f(a, b) + f(a, b - h)) / h**2
    f_ab = (f(a + h, b + h) - f(a + h, b - h) - f(a - h, b + h) + f(a - h, b - h)) / (4 * h * h)
    got = hessian(a, b, zeta, gamma)
    assert got[0] == pytest.approx(f_aa, rel=1e-5)
    assert got[1] == pytest.approx(f_bb, rel=1e-5)
    assert got[2] == pytest.approx(f_ab, rel=1e-5)


def test_determinant_outside_region_can_be_negative():
    # near the origin kt(2-t) < 1-t and the determinant is not sign-definite
    a, b = np.meshgrid(np.linspace(0.01, 0.5, 20), np.linspace(0.01, 0.5, 20))
    f_aa, f_bb, f_ab = hessian(a, b, 1.0, 1.0)
    det = f_aa * f_bb - f_ab**2
    outside = determinant_factor(a, b, 1.0, 1.0) < 0
    assert outside.any() and (det[outside] < 0).any()


def test_rejects_nonpositive_grid():
    with pytest.raises(ValueError):
        concavity_check(1, 1, np.array([0.0, 1.0]), GRID)
