import numpy as np
from numpy.testing import assert_allclose

from wildeuler.domain import unit_square
from wildeuler.testfuncs import (
    bump_scalar,
    scalar_battery,
    spacetime_battery,
    vector_battery,
)


def _fd_grad(fn, X, Y, h=1e-6):
    return ((fn(X + h, Y) - fn(X - h, Y)) / (2 * h),
            (fn(X, Y + h) - fn(X, Y - h)) / (2 * h))


def _grids():
    pts = np.linspace(0.05, 0.95, 23)
    return np.meshgrid(pts, pts, indexing="ij")


def test_scalar_gradients_match_finite_differences():
    X, Y = _grids()
    for phi in scalar_battery(unit_square()):
        gx, gy = phi.grad(X, Y)
        fx, fy = _fd_grad(phi.value, X, Y)
        assert_allclose(gx, fx, atol=5e-6, err_msg=phi.name)
        assert_allclose(gy, fy, atol=5e-6, err_msg=phi.name)


def test_vector_jacobians_match_finite_differences():
    X, Y = _grids()
    h = 1e-6
    for phi in vector_battery(unit_square()) + vector_battery(unit_square("wall")):
        (d1p1, d2p1), (d1p2, d2p2) = phi.jacobian(X, Y)
        p1p, p2p = phi.value(X + h, Y)
        p1m, p2m = phi.value(X - h, Y)
        assert_allclose(d1p1, (p1p - p1m) / (2 * h), atol=2e-5, err_msg=phi.name)
        assert_allclose(d1p2, (p2p - p2m) / (2 * h), atol=2e-5, err_msg=phi.name)
        p1p, p2p = phi.value(X, Y + h)
        p1m, p2m = phi.value(X, Y - h)
        assert_allclose(d2p1, (p1p - p1m) / (2 * h), atol=2e-5, err_msg=phi.name)
        assert_allclose(d2p2, (p2p - p2m) / (2 * h), atol=2e-5, err_msg=phi.name)


def test_bump_support_and_positivity():
    phi = bump_scalar((0.5, 0.5), 0.2)
    X, Y = _grids()
    vals = phi.value(X, Y)
    assert np.all(vals >= 0.0)
    outside = (X - 0.5) ** 2 + (Y - 0.5) ** 2 >= 0.04
    assert np.all(vals[outside] == 0.0)


def test_wall_battery_normal_trace():
    X = np.array([[0.0, 1.0], [0.0, 1.0]])
    Y = np.array([[0.3, 0.7], [0.3, 0.7]])
    for phi in vector_battery(unit_square("wall")):
        if not phi.zero_normal_trace:
            continue
        p1, _ = phi.value(X, Y)
        assert_allclose(p1, 0.0, atol=1e-14, err_msg=phi.name)  # x-walls
        _, p2 = phi.value(Y, X)
        assert_allclose(p2, 0.0, atol=1e-14, err_msg=phi.name)  # y-walls


def test_entropy_battery_has_nonnegative_members():
    batt = scalar_battery(unit_square())
    assert sum(1 for phi in batt if phi.nonnegative) >= 4


def test_time_profiles_compact_and_consistent():
    batt = spacetime_battery(unit_square(), horizon=2.0)
    assert len(batt) >= 6
    t = np.linspace(0, 2.0, 101)
    h = 1e-6
    for st_fn in batt:
        prof = st_fn.time
        assert prof.value(2.0) == 0.0
        assert prof.vanishes_after <= 2.0 + 1e-12
        fd = (prof.value(t + h) - prof.value(t - h)) / (2 * h)
        assert_allclose(prof.derivative(t), fd, atol=5e-5)
