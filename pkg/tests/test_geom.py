import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from varicontact import geom
from varicontact.geom import (CollarError, DomainError, make_ball_domain, make_ellipse_domain,
                              make_implicit_domain, project)


@pytest.fixture(scope="module")
def disk():
    return make_ball_domain([0.0, 0.0], 1.0)


@pytest.fixture(scope="module")
def ellipse():
    return make_ellipse_domain([0.0, 0.0], [2.0, 1.0], kappa_hint=2.0)


def _circle_implicit():
    return make_implicit_domain(lambda X: np.sum(X**2, axis=-1) - 1.0,
                                lambda X: 2.0 * X,
                                lambda X: np.broadcast_to(2.0 * np.eye(2), X.shape + (2,)),
                                kappa_hint=1.0, s0_hint=0.9,
                                bounds=([-1.0, -1.0], [1.0, 1.0]))


class TestDomains:
    def test_unit_disk(self, disk):
        assert disk.kappa == 1.0
        assert disk.s0 == 1.0

    def test_ball_radius_two(self):
        dom = make_ball_domain([0.0, 0.0, 0.0], 2.0)
        assert dom.kappa == 0.5
        assert dom.dim == 3 and dom.n == 2

    @pytest.mark.parametrize("radius", [0.0, -1.0])
    def test_bad_radius(self, radius):
        with pytest.raises(DomainError):
            make_ball_domain([0.0, 0.0], radius)

    def test_ellipse_curvature_hint(self, ellipse):
        # largest curvature of x^2/4 + y^2 = 1 is a/b^2 = 2 at (+-2, 0)
        npt.assert_allclose(geom.principal_curvatures(ellipse, np.array([[2.0, 0.0]])), [[2.0]],
                            atol=1e-12)
        assert ellipse.s0 == pytest.approx(0.5)

    def test_ellipse_hint_too_small_rejected(self):
        with pytest.raises(DomainError):
            make_ellipse_domain([0.0, 0.0], [2.0, 1.0], kappa_hint=1.0)

    def test_implicit_stores_min_s0(self):
        dom = _circle_implicit()
        assert dom.s0 == pytest.approx(0.9)

    def test_no_zero_set_rejected(self):
        with pytest.raises(DomainError):
            make_implicit_domain(lambda X: np.ones(X.shape[:-1]), lambda X: np.zeros_like(X),
                                 lambda X: np.zeros(X.shape + (2,)), kappa_hint=1.0,
                                 s0_hint=0.5, bounds=(np.array([-1.0, -1.0]),
                                                      np.array([1.0, 1.0])))

    def test_implicit_circle_matches_ball(self, disk):
        dom = _circle_implicit()
        rng = np.random.default_rng(3)
        x = geom.sample_collar(dom, 200, rng, side="both", depth=(0.0, 0.8))
        npt.assert_allclose(project(dom, x).xi, project(disk, x).xi, atol=1e-12)


class TestProjection:
    def test_interior_point(self, disk):
        cp = project(disk, [0.8, 0.0])
        npt.assert_allclose(cp.xi, [1.0, 0.0], atol=1e-15)
        npt.assert_allclose(cp.xtilde, [1.2, 0.0], atol=1e-15)
        assert cp.dist == pytest.approx(0.2)

    def test_boundary_point_fixed(self, disk):
        cp = project(disk, [1.0, 0.0])
        npt.assert_array_equal(cp.xi, [1.0, 0.0])
        npt.assert_array_equal(cp.xtilde, [1.0, 0.0])

    def test_centre_rejected(self, disk):
        with pytest.raises(CollarError):
            project(disk, [0.0, 0.0])

    def test_outside_collar_rejected(self, ellipse):
        with pytest.raises(CollarError):
            project(ellipse, [0.0, 0.0])

    def test_projections(self, disk):
        cp = project(disk, [0.3, 0.4])
        npt.assert_allclose(cp.tau + cp.nu, np.eye(2), atol=1e-15)
        npt.assert_allclose(cp.nu @ cp.nu, cp.nu, atol=1e-15)
        npt.assert_allclose(cp.tau, cp.tau.T)
        assert np.linalg.matrix_rank(cp.nu) == 1

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.05, 0.95), st.floats(-math.pi, math.pi))
    def test_reflection_involution(self, r, t):
        dom = make_ball_domain([0.0, 0.0], 1.0)
        x = np.array([[r * math.cos(t), r * math.sin(t)]])
        xt, ok = geom.reflect_points(dom, x)
        back, ok2 = geom.reflect_points(dom, xt)
        assert ok[0] and ok2[0]
        npt.assert_allclose(back, x, atol=1e-12)

    def test_ellipse_projection_is_nearest(self, ellipse):
        x = np.array([1.2, 0.5])
        cp = project(ellipse, x)
        t = np.linspace(-math.pi, math.pi, 200_001)
        curve = np.stack([2 * np.cos(t), np.sin(t)], axis=1)
        assert cp.dist == pytest.approx(np.min(np.linalg.norm(curve - x, axis=1)), abs=1e-9)


class TestReflectOp:
    @pytest.mark.parametrize("y, expected", [([0.0, 1.0], [0.0, 1.0]),
                                             ([1.0, 0.0], [-1.0, 0.0]),
                                             ([3.0, 4.0], [-3.0, 4.0])])
    def test_examples(self, disk, y, expected):
        cp = project(disk, [0.8, 0.0])
        out = geom.reflect_op(cp, np.array(y))
        npt.assert_allclose(out, expected, atol=1e-15)
        assert np.linalg.norm(out) == pytest.approx(np.linalg.norm(y))

    def test_involution(self, ellipse):
        cp = project(ellipse, [1.5, 0.3])
        y = np.array([0.7, -2.1])
        npt.assert_allclose(geom.reflect_op(cp, geom.reflect_op(cp, y)), y, atol=1e-14)


class TestQ:
    def test_disk_equality(self, disk):
        Q = geom.grad_xi_Q(disk, np.array([[0.9, 0.0]]))[0]
        assert np.linalg.norm(Q, 2) == pytest.approx(1.0 / 9.0, abs=1e-14)

    def test_q_nu_vanishes(self, ellipse):
        x = np.array([[1.5, 0.3], [0.0, 0.8]])
        Q = geom.grad_xi_Q(ellipse, x)
        nu = project(ellipse, x).nu
        npt.assert_allclose(Q @ nu, 0.0, atol=1e-6)

    def test_boundary_point(self, disk):
        npt.assert_allclose(geom.grad_xi_Q(disk, np.array([[0.0, 1.0]])), 0.0, atol=1e-15)

    def test_ellipse_closed_form_jacobian(self, ellipse):
        # grad xi = tau (I + s W)^-1 from the signed-distance Hessian
        x = np.array([[1.0, 0.6]])
        Q = geom.grad_xi_Q(ellipse, x)[0]
        cp = project(ellipse, x[0])
        W = geom.normal_field_gradient(ellipse, x)[0]
        s = np.linalg.norm(x[0] - cp.xi) * np.sign(np.sum((x[0] / [2.0, 1.0]) ** 2) - 1)
        jac = cp.tau - s * W
        npt.assert_allclose(Q, jac - cp.tau, atol=1e-6)


class TestReflectedBall:
    def test_examples(self, disk):
        a = np.array([1.0, 0.0])
        assert geom.in_reflected_ball(disk, a, 0.3, np.array([0.8, 0.0]))
        assert not geom.in_reflected_ball(disk, a, 0.3, np.array([0.6, 0.0]))

    def test_boundary_point_matches_ball(self, disk):
        a = np.array([1.0, 0.0])
        x = np.array([math.cos(0.2), math.sin(0.2)])
        assert geom.in_reflected_ball(disk, a, 0.25, x) == (np.linalg.norm(x - a) < 0.25)

    def test_outside_collar_flagged(self, ellipse):
        inside, ok = geom.in_reflected_ball(ellipse, np.array([2.0, 0.0]), 0.1,
                                            np.array([0.0, 0.0]), return_collar=True)
        assert not inside and not ok


class TestPropertyChecks:
    def test_ball_projection_derivative(self):
        dom = make_ball_domain([0.0, 0.0, 0.0], 1.0)
        r = geom.check_projection_derivative(dom, 2000, np.random.default_rng(0))
        assert sum(r["violations"].values()) == 0
        assert r["max_relative_equality_gap_inside"] < 1e-9
        npt.assert_allclose(r["max_normal_gradient_norm"], 1.0, atol=1e-12)

    def test_ellipse_projection_derivative(self, ellipse):
        r = geom.check_projection_derivative(ellipse, 1000, np.random.default_rng(0))
        assert sum(r["violations"].values()) == 0
        assert r["max_normal_gradient_norm"] <= ellipse.kappa * (1 + 1e-5)

    def test_reflected_ball(self, ellipse):
        r = geom.check_reflected_ball(ellipse, 1000, np.random.default_rng(1))
        assert sum(r["violations"].values()) == 0
        assert r["max_involution_error"] < 1e-9


class TestReflectionGradient:
    def test_ball_matches_fd(self):
        dom = make_ellipse_domain([0.0, 0.0], [1.0, 1.0])
        ball = make_ball_domain([0.0, 0.0], 1.0)
        b = np.array([[math.cos(0.7), math.sin(0.7)]])
        npt.assert_allclose(geom.reflection_gradient(dom, b), geom.reflection_gradient(ball, b),
                            atol=1e-6)
