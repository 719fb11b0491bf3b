"""Nearest-point projection and boundary reflection in a tubular collar.

Samples the collar of an ellipse and of the unit ball, checks the operator
bound on ``grad xi - tau`` and the reflected-ball inclusions, and shows the
reflection of a few points.
"""
import numpy as np

from varicontact import geom


def main():
    rng = np.random.default_rng(0)
    for dom in (geom.make_ball_domain(np.zeros(3), 1.0),
                geom.make_ellipse_domain([0.0, 0.0], [2.0, 1.0])):
        print(f"{dom.kind} in R^{dom.dim}: kappa = {dom.kappa:.3g}, s0 = {dom.s0:.3g}")
        pd = geom.check_projection_derivative(dom, 2000, rng)
        rb = geom.check_reflected_ball(dom, 2000, rng)
        print(f"  projection derivative violations: {pd['violations']}")
        print(f"  reflected ball violations: {rb['violations']}, "
              f"involution error {rb['max_involution_error']:.1e}")
    dom = geom.make_ellipse_domain([0.0, 0.0], [2.0, 1.0])
    x = np.array([[1.8, 0.0], [0.0, 0.8], [1.2, 0.6]])
    xt, ok = geom.reflect_points(dom, x)
    for p, q in zip(x, xt):
        print(f"  reflect {p} -> {np.round(q, 6)}")


if __name__ == "__main__":
    main()
