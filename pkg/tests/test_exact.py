import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from varicontact.exact import ArcSet, Segment, SphereBands, flat_disk, spherical_cap
from varicontact.geom import make_ball_domain, reflect_points

DISK = make_ball_domain(np.zeros(2), 1.0)
BALL = make_ball_domain(np.zeros(3), 1.0)


def lens_area(R, rho, d):
    """Area of the intersection of discs of radii R and rho at centre distance d."""
    if d >= R + rho:
        return 0.0
    if d <= abs(R - rho):
        return math.pi * min(R, rho) ** 2
    a1 = R * R * math.acos((d * d + R * R - rho * rho) / (2 * d * R))
    a2 = rho * rho * math.acos((d * d + rho * rho - R * R) / (2 * d * rho))
    tri = 0.5 * math.sqrt((-d + R + rho) * (d + R - rho) * (d - R + rho) * (d + R + rho))
    return a1 + a2 - tri


class TestSegment:
    def test_diameter_clipping(self):
        seg = Segment(np.array([-1.0, 0.0]), np.array([1.0, 0.0]))
        assert seg.mass_in_ball([1.0, 0.0], 0.1) == pytest.approx(0.1, abs=1e-15)
        assert seg.mass_in_reflected_ball(DISK, [1.0, 0.0], 0.1) == pytest.approx(0.1,
                                                                                  abs=1e-14)

    def test_far_and_huge(self):
        seg = Segment(np.array([-1.0, 0.0]), np.array([1.0, 0.0]))
        assert seg.mass_in_ball([0.0, 5.0], 1.0) == 0.0
        assert seg.mass_in_ball([0.0, 0.0], 10.0) == pytest.approx(2.0)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(-1.5, 1.5), st.floats(-1.0, 1.0), st.floats(0.01, 1.0))
    def test_ball_matches_sampling(self, ax, ay, rho):
        seg = Segment(np.array([-0.8, 0.3]), np.array([0.9, -0.2]))
        t = (np.arange(200_000) + 0.5) / 200_000
        pts = seg.p0 + t[:, None] * (seg.p1 - seg.p0)
        inside = np.linalg.norm(pts - [ax, ay], axis=1) < rho
        assert seg.mass_in_ball([ax, ay], rho) == pytest.approx(inside.mean() * seg.length,
                                                                abs=2e-5)

    def test_reflected_matches_sampling(self):
        seg = Segment(np.array([-math.sqrt(0.75), 0.5]), np.array([math.sqrt(0.75), 0.5]))
        a = np.array([math.sqrt(0.75), 0.5])
        t = (np.arange(400_000) + 0.5) / 400_000
        pts = seg.p0 + t[:, None] * (seg.p1 - seg.p0)
        xt, ok = reflect_points(DISK, pts)
        for rho in (0.01, 0.05, 0.15):
            inside = ok & (np.linalg.norm(np.nan_to_num(xt) - a, axis=1) < rho)
            assert seg.mass_in_reflected_ball(DISK, a, rho) == pytest.approx(
                inside.mean() * seg.length, abs=1e-5)

    def test_reflected_copy(self):
        seg = Segment(np.array([0.0, 0.5]), np.array([1.0, 0.5])).reflected()
        npt.assert_array_equal(seg.p0, [0.0, -0.5])


class TestArcSet:
    def test_lower_arc_at_endpoint(self):
        a0 = 0.3
        arc = ArcSet(np.zeros(2), 1.0, ((-math.pi + a0, -a0),))
        a = arc.point(-a0)
        for rho in (1e-3, 1e-2, 0.1):
            # chord length rho subtends the angle 2 asin(rho / 2)
            assert arc.measure_in_ball(a, rho) == pytest.approx(2 * math.asin(rho / 2),
                                                                rel=1e-13)
            assert abs(arc.measure_in_ball(a, rho) - rho) < rho**3

    def test_disjoint_and_huge(self):
        arc = ArcSet(np.zeros(2), 1.0, ((0.0, 1.0),))
        assert arc.measure_in_ball([-1.0, 0.0], 0.5) == 0.0
        assert arc.measure_in_ball([0.0, 0.0], 3.0) == pytest.approx(1.0)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(-math.pi, math.pi), st.floats(0.01, 2.5), st.floats(-4.0, 4.0),
           st.floats(0.1, 3.0))
    def test_matches_sampling(self, ta, rho, lo, width):
        arc = ArcSet(np.zeros(2), 1.0, ((lo, lo + width),))
        a = 0.9 * np.array([math.cos(ta), math.sin(ta)])
        t = lo + (np.arange(200_000) + 0.5) / 200_000 * width
        inside = np.linalg.norm(arc.point(t) - a, axis=1) < rho
        assert arc.measure_in_ball(a, rho) == pytest.approx(inside.mean() * width, abs=1e-4)

    def test_complement_partitions_circle(self):
        arc = ArcSet(np.zeros(2), 2.0, ((0.2, 1.0), (2.0, 3.5)))
        comp = arc.complement()
        assert arc.total() + comp.total() == pytest.approx(4 * math.pi)
        a = np.array([0.5, 1.7])
        full = ArcSet(np.zeros(2), 2.0, ((0.0, 2 * math.pi),))
        assert arc.measure_in_ball(a, 1.3) + comp.measure_in_ball(a, 1.3) == pytest.approx(
            full.measure_in_ball(a, 1.3))

    def test_boundary_conormals(self):
        arc = ArcSet(np.zeros(2), 1.0, ((0.0, math.pi / 2),))
        pts, nrm, w = arc.boundary_curve()
        npt.assert_allclose(pts, [[1.0, 0.0], [0.0, 1.0]], atol=1e-15)
        # outward co-normals point away from the arc along the circle
        npt.assert_allclose(nrm, [[0.0, -1.0], [-1.0, 0.0]], atol=1e-15)
        npt.assert_array_equal(w, [1.0, 1.0])


class TestSphereBands:
    @pytest.mark.parametrize("rho", [0.05, 0.4, 1.2])
    def test_archimedes(self, rho):
        # a ball of radius rho centred on the unit sphere cuts an area pi rho^2
        s = SphereBands(np.zeros(3), 1.0, ((0.0, math.pi),))
        a = np.array([0.0, 0.6, 0.8])
        assert s.measure_in_ball(a, rho) == pytest.approx(math.pi * rho**2, rel=1e-12)

    def test_complement_total(self):
        s = SphereBands(np.zeros(3), 1.0, ((0.5, 1.2),))
        assert s.total() + s.complement().total() == pytest.approx(4 * math.pi)

    def test_lower_hemisphere_reflection(self):
        s = SphereBands(np.zeros(3), 1.0, ((math.pi / 2, math.pi),)).reflected()
        assert s.intervals == ((0.0, math.pi / 2),)

    def test_quadrature_area(self):
        s = SphereBands(np.zeros(3), 1.0, ((0.3, 2.0),))
        _, w = s.quadrature(12)
        assert w.sum() == pytest.approx(s.total(), rel=1e-13)


class TestRevolution:
    @pytest.mark.parametrize("rho", [0.01, 0.1, 0.3])
    def test_flat_disk_lens(self, rho):
        disk = flat_disk(1.0)
        a = np.array([1.0, 0.0, 0.0])
        assert disk.mass_in_ball(a, rho) == pytest.approx(lens_area(1.0, rho, 1.0), rel=1e-12)

    def test_cap_total(self):
        cap = spherical_cap(-1.0, 2.0, 0.7)
        assert cap.total() == pytest.approx(2 * math.pi * 4.0 * (1 - math.cos(0.7)), rel=1e-14)

    def test_flat_disk_reflected_matches_sampling(self):
        disk = flat_disk(1.0)
        a = np.array([1.0, 0.0, 0.0])
        rho = 0.1
        nr, nt = 2000, 4000
        r = 1 - 2 * rho + (np.arange(nr) + 0.5) / nr * 2 * rho
        t = -0.5 + (np.arange(nt) + 0.5) / nt
        R, T = np.meshgrid(r, t, indexing="ij")
        # x~ = (2 - |x|) x / |x| stays in the plane
        Rt = 2 - R
        inside = (Rt * np.cos(T) - 1) ** 2 + (Rt * np.sin(T)) ** 2 < rho**2
        approx = float(np.sum(R * inside)) * (2 * rho / nr) * (1.0 / nt)
        assert disk.mass_in_reflected_ball(BALL, a, rho) == pytest.approx(approx, rel=2e-3)
