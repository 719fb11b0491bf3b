import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from varicontact import varifold as vf
from varicontact.contact import tangentialize
from varicontact.exact import ArcSet, Segment, SphereBands
from varicontact.geom import make_ball_domain
from varicontact.varifold import BoundaryPatch, DiscreteVarifold

DISK = make_ball_domain(np.zeros(2), 1.0)
BALL = make_ball_domain(np.zeros(3), 1.0)


def icosphere(level):
    """Unit icosahedron refined ``level`` times, vertices pushed to the sphere."""
    p = (1 + math.sqrt(5)) / 2
    V = [[-1, p, 0], [1, p, 0], [-1, -p, 0], [1, -p, 0], [0, -1, p], [0, 1, p],
         [0, -1, -p], [0, 1, -p], [p, 0, -1], [p, 0, 1], [-p, 0, -1], [-p, 0, 1]]
    F = [[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11], [1, 5, 9], [5, 11, 4],
         [11, 10, 2], [10, 7, 6], [7, 1, 8], [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8],
         [3, 8, 9], [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]]
    V = [np.array(v, float) / np.linalg.norm(v) for v in V]
    for _ in range(level):
        cache, out = {}, []

        def mid(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = V[i] + V[j]
                V.append(m / np.linalg.norm(m))
                cache[key] = len(V) - 1
            return cache[key]

        for a, b, c in F:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            out += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        F = out
    return np.array(V), np.array(F)


def diameter():
    seg = Segment(np.array([-1.0, 0.0]), np.array([1.0, 0.0]))
    return vf.from_segments([[-1.0, 0.0], [1.0, 0.0]], lambda X: np.zeros_like(X),
                            nodes_per_segment=100, exact=seg)


class TestConstruction:
    def test_unit_square(self):
        V = vf.from_triangulation([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]],
                                  [[0, 1, 2], [0, 2, 3]])
        assert V.mass() == pytest.approx(1.0)
        assert V.n == 2 and len(V) == 6

    def test_empty_triangulation(self):
        V = vf.from_triangulation(np.zeros((0, 3)), np.zeros((0, 3), int))
        assert V.mass() == 0.0 and len(V) == 0

    def test_zero_area_triangle(self):
        with pytest.raises(ValueError):
            vf.from_triangulation([[0, 0, 0], [1, 0, 0], [2, 0, 0]], [[0, 1, 2]])

    def test_icosphere_area_second_order(self):
        err, h = [], []
        for k in (2, 3, 4):
            X, T = icosphere(k)
            err.append(abs(vf.from_triangulation(X, T).mass() - 4 * math.pi))
            h.append(2.0**-k)
        orders = np.log(np.array(err[:-1]) / err[1:]) / np.log(2)
        assert np.all(orders > 1.9)

    def test_segment_mass(self):
        V = vf.from_segments([[-1.0, 0.0], [1.0, 0.0]], nodes_per_segment=100)
        assert V.mass() == pytest.approx(2.0, abs=1e-15)

    def test_chord_mass(self):
        c = math.sqrt(0.75)
        V = vf.from_segments([[-c, 0.5], [c, 0.5]], nodes_per_segment=10)
        assert V.mass() == pytest.approx(math.sqrt(3.0), abs=1e-15)

    def test_single_point(self):
        with pytest.raises(ValueError):
            vf.from_segments([[0.0, 0.0]])

    def test_repeated_points(self):
        with pytest.raises(ValueError):
            vf.from_segments([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]])

    def test_plane_validation(self):
        with pytest.raises(ValueError):
            DiscreteVarifold(np.zeros((1, 2)), 0.5 * np.eye(2)[None], np.ones(1))
        with pytest.raises(ValueError):
            DiscreteVarifold(np.zeros((1, 2)), vf.line_projection([[1.0, 0.0]]), -np.ones(1))

    def test_immutable(self):
        V = diameter()
        with pytest.raises(ValueError):
            V.weights[0] = 1.0


class TestMeasures:
    def test_diameter_ball(self):
        V = diameter()
        for method in ("exact", "quadrature"):
            assert vf.mass_in_ball(V, [1.0, 0.0], 0.1, method) == pytest.approx(0.1)

    def test_diameter_reflected(self):
        V = diameter()
        assert vf.mass_in_reflected_ball(V, DISK, [1.0, 0.0], 0.1, "exact") == pytest.approx(0.1)
        assert vf.mass_in_reflected_ball(V, DISK, [1.0, 0.0], 0.1,
                                         "quadrature") == pytest.approx(0.1)

    def test_far_and_huge(self):
        V = diameter()
        assert vf.mass_in_ball(V, [0.0, 5.0], 1.0) == 0.0
        assert vf.mass_in_ball(V, [0.0, 0.0], 3.0) == pytest.approx(2.0)

    def test_interior_centre_misses_reflection(self):
        V = diameter()
        assert vf.mass_in_reflected_ball(V, DISK, [0.5, 0.0], 0.05) == 0.0

    def test_strict_inequality(self):
        V = DiscreteVarifold(np.array([[0.5, 0.0]]), vf.line_projection([[1.0, 0.0]]),
                             np.ones(1))
        assert vf.mass_in_ball(V, [0.0, 0.0], 0.5) == 0.0

    def test_boundary_symmetric_support(self):
        arc = ArcSet(np.zeros(2), 1.0, ((-0.5, 0.5),))
        pts, w = arc.quadrature(400)
        tang = np.stack([-np.sin(np.arctan2(pts[:, 1], pts[:, 0])),
                         np.cos(np.arctan2(pts[:, 1], pts[:, 0]))], axis=1)
        V = DiscreteVarifold(pts, vf.line_projection(tang), w)
        a = np.array([1.0, 0.0])
        assert vf.mass_in_reflected_ball(V, DISK, a, 0.3) == pytest.approx(
            vf.mass_in_ball(V, a, 0.3), abs=1e-14)

    def test_additivity(self):
        V = diameter()
        half = vf.from_segments([[-1.0, 0.5], [1.0, 0.5]], nodes_per_segment=50)
        both = V.concat(half)
        a = np.array([0.2, 0.2])
        assert vf.mass_in_ball(both, a, 0.5, "quadrature") == pytest.approx(
            vf.mass_in_ball(V, a, 0.5, "quadrature") + vf.mass_in_ball(half, a, 0.5))

    def test_quadrature_converges_to_exact(self):
        c = math.sqrt(0.75)
        seg = Segment(np.array([-c, 0.5]), np.array([c, 0.5]))
        a, rho = np.array([c, 0.5]), 0.137
        ex = seg.mass_in_reflected_ball(DISK, a, rho)
        for k in (64, 256, 1024):
            V = vf.from_segments([seg.p0, seg.p1], nodes_per_segment=k, exact=seg)
            h = seg.length / k
            assert abs(vf.mass_in_reflected_ball(V, DISK, a, rho, "quadrature") - ex) <= 2 * h

    def test_density_ratio(self):
        V = diameter()
        assert vf.density_ratio(V, [0.1, 0.0], 0.05) == pytest.approx(1.0)
        assert vf.density_ratio(V, [1.0, 0.0], 0.05) == pytest.approx(0.5)
        assert vf.density_ratio(vf.empty_varifold(2, 1), [0.0, 0.0], 0.1) == 0.0

    def test_omega(self):
        assert vf.omega(1) == pytest.approx(2.0)
        assert vf.omega(2) == pytest.approx(math.pi)
        assert vf.omega(3) == pytest.approx(4 * math.pi / 3)


class TestFirstVariation:
    def test_circle_identity_field(self):
        t = np.linspace(0, 2 * math.pi, 2001)[:-1]
        V = vf.from_segments(np.stack([np.cos(t), np.sin(t)], axis=1), closed=True)
        # grad x = I and trace S = 1, so the pairing is the polygon length
        assert vf.first_variation(V, lambda X: np.broadcast_to(np.eye(2), X.shape + (2,))) \
            == pytest.approx(V.mass(), rel=1e-14)
        assert V.mass() == pytest.approx(2 * math.pi, rel=1e-5)

    def test_constant_field(self):
        V = diameter()
        assert vf.first_variation(V, lambda X: np.zeros(X.shape + (2,))) == 0.0

    def test_sphere_closure_second_order(self):
        err = []
        for k in (2, 3, 4):
            X, T = icosphere(k)
            V = vf.from_triangulation(X, T, h_field=lambda P: -2.0 * P)
            ident = lambda P: np.broadcast_to(np.eye(3), P.shape + (3,))
            err.append(abs(vf.first_variation(V, ident) + vf.curvature_pairing(V, lambda P: P)))
            assert vf.first_variation(V, ident) == pytest.approx(2 * V.mass())
        orders = np.log(np.array(err[:-1]) / err[1:]) / np.log(2)
        assert np.all(orders >= 1.8)

    def test_linearity(self):
        V = diameter()
        rng = np.random.default_rng(0)
        A, B = rng.normal(size=(2, 2)), rng.normal(size=(2, 2))
        gA = lambda X: np.broadcast_to(A, X.shape + (2,))
        gB = lambda X: np.broadcast_to(B, X.shape + (2,))
        gAB = lambda X: np.broadcast_to(2 * A - B, X.shape + (2,))
        assert vf.first_variation(V, gAB) == pytest.approx(
            2 * vf.first_variation(V, gA) - vf.first_variation(V, gB))


def _poly_field(dom, seed):
    rng = np.random.default_rng(seed)
    d = dom.dim
    b, A = rng.normal(size=d), rng.normal(size=(d, d))
    return tangentialize(dom, lambda X: b + X @ A.T,
                         lambda X: np.broadcast_to(A.T, X.shape + (d,)), f"lin{seed}")


class TestPatches:
    def test_lower_arc_measure(self):
        a0 = 0.4
        arc = ArcSet(np.zeros(2), 1.0, ((-math.pi + a0, -a0),))
        B = BoundaryPatch.from_exact(arc, 2000, DISK)
        a = arc.point(-a0)
        for rho in (0.01, 0.05):
            assert vf.patch_measure_in_ball(B, a, rho) == pytest.approx(rho, abs=rho**3)
            assert vf.patch_measure_in_ball(B, a, rho, "quadrature") == pytest.approx(
                vf.patch_measure_in_ball(B, a, rho), abs=2e-3)
        assert vf.patch_measure_in_ball(B, [0.0, 1.0], 0.2) == 0.0
        assert vf.patch_measure_in_ball(B, [0.0, 0.0], 5.0) == pytest.approx(arc.total())

    def test_closed_boundary_divergence_vanishes(self):
        B = BoundaryPatch.from_exact(ArcSet(np.zeros(2), 1.0, ((0.0, 2 * math.pi),)), 64, DISK)
        assert vf.surface_divergence_integral(DISK, B, _poly_field(DISK, 1)) == pytest.approx(
            0.0, abs=1e-12)

    @pytest.mark.parametrize("dom, desc, res", [
        (DISK, ArcSet(np.zeros(2), 1.0, ((-2.5, -0.6),)), 4000),
        (BALL, SphereBands(np.zeros(3), 1.0, ((math.pi / 3, math.pi),)), 24)])
    def test_divergence_theorem(self, dom, desc, res):
        B = BoundaryPatch.from_exact(desc, res, dom)
        g = _poly_field(dom, 2)
        assert vf.surface_divergence_integral(dom, B, g) == pytest.approx(
            vf.conormal_flux(B, g), abs=1e-6)

    def test_zero_field(self):
        B = BoundaryPatch.from_exact(ArcSet(np.zeros(2), 1.0, ((0.0, 1.0),)), 64, DISK)
        zero = lambda X: np.zeros_like(np.asarray(X, float))
        zero.grad = lambda X: np.zeros(np.shape(X) + (2,))
        assert vf.surface_divergence_integral(DISK, B, zero) == 0.0

    def test_normal_field_rejected(self):
        B = BoundaryPatch.from_exact(ArcSet(np.zeros(2), 1.0, ((0.0, 1.0),)), 64, DISK)
        radial = lambda X: np.asarray(X, float)
        radial.grad = lambda X: np.broadcast_to(np.eye(2), np.shape(X) + (2,))
        with pytest.raises(ValueError):
            vf.surface_divergence_integral(DISK, B, radial)

    def test_complement_and_reflection(self):
        B = BoundaryPatch.from_exact(ArcSet(np.zeros(2), 1.0, ((0.0, 1.0),)), 64, DISK)
        assert B.total() + B.complement().total() == pytest.approx(2 * math.pi)
        npt.assert_allclose(np.sort(B.reflected().nodes[:, 1]), np.sort(-B.nodes[:, 1]))


class TestFiles:
    def test_obj_roundtrip(self, tmp_path):
        X, T = icosphere(1)
        vf.write_obj(tmp_path / "s.obj", X, T)
        X2, T2 = vf.read_obj(tmp_path / "s.obj")
        npt.assert_array_equal(X2, X)
        npt.assert_array_equal(T2, T)

    def test_obj_quad_fanned(self, tmp_path):
        (tmp_path / "q.obj").write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
        _, T = vf.read_obj(tmp_path / "q.obj")
        npt.assert_array_equal(T, [[0, 1, 2], [0, 2, 3]])

    def test_polyline_roundtrip(self, tmp_path):
        P = np.array([[0.1, 0.2], [1.0 / 3.0, -0.5]])
        vf.write_polyline_csv(tmp_path / "p.csv", P)
        npt.assert_array_equal(vf.read_polyline_csv(tmp_path / "p.csv"), P)

    def test_varifold_roundtrip(self, tmp_path):
        X, T = icosphere(1)
        V = vf.from_triangulation(X, T, h_field=lambda P: -2.0 * P)
        vf.write_varifold_csv(tmp_path / "v.csv", V)
        W = vf.read_varifold_csv(tmp_path / "v.csv")
        npt.assert_array_equal(W.points, V.points)
        npt.assert_array_equal(W.planes, V.planes)
        npt.assert_array_equal(W.weights, V.weights)
        npt.assert_array_equal(W.curvature, V.curvature)
        header = (tmp_path / "v.csv").read_text().splitlines()[0].split(",")
        assert header[:4] == ["x0", "x1", "x2", "S00"] and header[-4:] == ["w", "h0", "h1", "h2"]


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1)), min_size=2, max_size=8,
                unique=True))
def test_polyline_mass_is_length(pts):
    P = np.array(pts)
    gaps = np.linalg.norm(np.diff(P, axis=0), axis=1)
    if np.any(gaps < 1e-6):
        return
    V = vf.from_segments(P, nodes_per_segment=3)
    assert V.mass() == pytest.approx(gaps.sum(), rel=1e-12)
    assert vf.mass_in_ball(V, [0.0, 0.0], 10.0) == pytest.approx(gaps.sum(), rel=1e-12)
