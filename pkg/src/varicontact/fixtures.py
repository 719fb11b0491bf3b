"""Analytic contact configurations with exact oracles.

* :func:`chord_fixture` -- the chord ``y = d`` of the unit disk; the wetted
  arc lies below it and ``sigma = d``.
* :func:`cap_fixture` -- a spherical cap in the unit ball meeting the wall
  along the equator at angle ``theta``; ``theta = pi/2`` is the flat disk.
* :func:`mirror_fixture` -- reflection across the last coordinate with
  ``theta -> pi - theta``; obtuse angles are rewritten with ``-sigma`` and
  the complementary wetted region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .contact import ContactConfig, apply_mirror_rule
from .exact import ArcSet, Segment, SphereBands, flat_disk, spherical_cap
from .geom import Domain, make_ball_domain
from .varifold import (
    BoundaryPatch,
    DiscreteVarifold,
    from_segments,
    from_triangulation,
    plane_projection,
)


@dataclass(frozen=True, eq=False)
class Fixture:
    """Domain, varifold, wetted region and contact angle, with ground truth.

    ``Bplus_raw`` is the wetted region belonging to ``cos(theta)``; ``Bplus``
    is the region to pair with ``cfg.effective_sigma`` (its complement after
    the obtuse-angle rewrite).
    """

    name: str
    dom: Domain
    V: DiscreteVarifold
    Bplus: BoundaryPatch
    cfg: ContactConfig
    contact_points: np.ndarray
    expected_density_limit: np.ndarray
    conormal_points: np.ndarray
    conormal_n_V: np.ndarray
    Bplus_raw: BoundaryPatch
    spacing: float
    level: int
    params: dict = field(default_factory=dict)
    mesh: Any = None

    @property
    def sigma(self) -> float:
        return self.cfg.effective_sigma

    @property
    def n(self) -> int:
        return self.V.n

    def describe(self) -> dict:
        return {"name": self.name, "theta": self.cfg.theta, "sigma": self.cfg.sigma,
                "mirror": self.cfg.mirror, "level": self.level, **self.params}


# ---------------------------------------------------------------------------
# chord in the unit disk
# ---------------------------------------------------------------------------


def chord_geometry(d: float):
    """Endpoints, wetted arc and co-normals of the chord ``y = d``."""
    c = math.sqrt(1.0 - d * d)
    p0, p1 = np.array([-c, d]), np.array([c, d])
    alpha = math.asin(d)
    arc = ArcSet(np.zeros(2), 1.0, ((-math.pi - alpha, alpha),))
    n_V = np.array([[-1.0, 0.0], [1.0, 0.0]])
    return p0, p1, arc, n_V


def chord_fixture(d: float, level: int = 256) -> Fixture:
    """Chord ``{y = d}`` of the unit disk with ``level`` segment nodes."""
    if not 0.0 <= d < 1.0:
        raise ValueError(f"chord offset must lie in [0, 1), got {d}")
    if level < 1:
        raise ValueError("level must be positive")
    dom = make_ball_domain(np.zeros(2), 1.0)
    p0, p1, arc, n_V = chord_geometry(d)
    seg = Segment(p0, p1)
    V = from_segments(np.stack([p0, p1]), h_field=lambda X: np.zeros_like(X),
                      nodes_per_segment=level, exact=seg)
    spacing = seg.length / level
    B = BoundaryPatch.from_exact(arc, level / seg.length, dom)
    cfg = ContactConfig(math.acos(d))
    pts = np.stack([p0, p1])
    return Fixture(
        name="diameter" if d == 0 else f"chord_d{d:g}", dom=dom, V=V, Bplus=B, cfg=cfg,
        contact_points=pts, expected_density_limit=np.full(2, 1.0 + d),
        conormal_points=pts, conormal_n_V=n_V, Bplus_raw=B, spacing=spacing,
        level=level, params={"kind": "chord", "d": d},
    )


def diameter_fixture(level: int = 256) -> Fixture:
    return chord_fixture(0.0, level)


# ---------------------------------------------------------------------------
# spherical cap in the unit ball
# ---------------------------------------------------------------------------


def cap_geometry(theta: float) -> dict:
    """Centre height, radius and angular extent of the cap meeting the equator at ``theta``.

    The sphere through the equator of the unit sphere whose normal there
    makes the angle ``theta`` with the wall normal has centre
    ``(0, 0, -tan theta)`` and radius ``1/cos theta``; the cap inside the
    unit ball consists of the polar angles below ``pi/2 - theta``.
    """
    if abs(theta - math.pi / 2) < 1e-15:
        return {"flat": True, "area": math.pi, "radius": math.inf}
    r = 1.0 / math.cos(theta)
    cz = -math.tan(theta)
    psi = math.pi / 2 - theta
    return {"flat": False, "center_z": cz, "radius": r, "psi_max": psi,
            "area": 2.0 * math.pi * r * r * (1.0 - math.sin(theta))}


def cap_mesh(theta: float, level: int):
    """Ring-stitched triangulation of the cap (or flat disk) with vertices on the surface.

    Ring ``i`` (``i = 1..level``) carries ``6 i`` vertices; the outer ring
    lies on the contact circle.
    """
    g = cap_geometry(theta)
    verts = [np.zeros(3) if g["flat"] else np.array([0.0, 0.0, g["center_z"] + g["radius"]])]
    rings = [[0]]
    for i in range(1, level + 1):
        m = 6 * i
        t = 2.0 * math.pi * np.arange(m) / m
        if g["flat"]:
            R, Z = i / level, 0.0
        else:
            psi = g["psi_max"] * i / level
            R, Z = g["radius"] * math.sin(psi), g["center_z"] + g["radius"] * math.cos(psi)
        if i == level:
            # exact contact circle: R = 1, Z = 0
            R, Z = 1.0, 0.0
        start = len(verts)
        for tk in t:
            verts.append(np.array([R * math.cos(tk), R * math.sin(tk), Z]))
        rings.append(list(range(start, start + m)))
    tris = []
    for i in range(1, level + 1):
        inner, outer = rings[i - 1], rings[i]
        if len(inner) == 1:
            m = len(outer)
            tris += [[inner[0], outer[k], outer[(k + 1) % m]] for k in range(m)]
            continue
        tris += _zip_rings(inner, outer)
    return np.array(verts), np.array(tris, dtype=int)


def _zip_rings(inner, outer):
    """Triangulate the band between two rings whose vertices start at angle 0."""
    na, nb = len(inner), len(outer)
    tris = []
    i = j = 0
    while i < na or j < nb:
        ta = (i + 1) / na
        tb = (j + 1) / nb
        if j >= nb or (i < na and ta <= tb):
            tris.append([inner[i % na], outer[j % nb], inner[(i + 1) % na]])
            i += 1
        else:
            tris.append([inner[i % na], outer[j % nb], outer[(j + 1) % nb]])
            j += 1
    return tris


def _cap_parametric(theta: float, level: int):
    """Gauss-Legendre in the profile parameter times the midpoint rule in azimuth."""
    g = cap_geometry(theta)
    x, w = np.polynomial.legendre.leggauss(level)
    n_az = 4 * level
    t = (np.arange(n_az) + 0.5) * 2.0 * math.pi / n_az
    if g["flat"]:
        u = 0.5 * (x + 1.0)
        wu = 0.5 * w * u
        R, Z = u, np.zeros_like(u)
        normal = np.array([0.0, 0.0, 1.0])
    else:
        r, cz, pm = g["radius"], g["center_z"], g["psi_max"]
        u = 0.5 * pm * (x + 1.0)
        wu = 0.5 * pm * w * r * r * np.sin(u)
        R, Z = r * np.sin(u), cz + r * np.cos(u)
    U, T = np.meshgrid(np.arange(level), t, indexing="ij")
    pts = np.stack([R[U] * np.cos(T), R[U] * np.sin(T), Z[U]], axis=-1).reshape(-1, 3)
    wts = (wu[:, None] * np.full(n_az, 2.0 * math.pi / n_az)).reshape(-1)
    if g["flat"]:
        S = np.broadcast_to(plane_projection(normal), (len(wts), 3, 3))
    else:
        S = plane_projection(pts - np.array([0.0, 0.0, g["center_z"]]))
    return pts, S, wts


def cap_fixture(theta: float, level: int = 24, discretization: str = "parametric") -> Fixture:
    """Spherical cap meeting the unit sphere along the equator at angle ``theta``.

    ``discretization="parametric"`` places atoms on the exact surface with
    exact tangent planes; ``"mesh"`` uses a ring-stitched triangulation with
    the mid-edge rule, whose errors are second order in the mesh size.
    """
    if not 0.0 < theta <= math.pi / 2 + 1e-15:
        raise ValueError(f"cap angle must lie in (0, pi/2], got {theta}")
    theta = min(theta, math.pi / 2)
    if level < 2:
        raise ValueError("level must be at least 2")
    dom = make_ball_domain(np.zeros(3), 1.0)
    g = cap_geometry(theta)
    if g["flat"]:
        exact = flat_disk(1.0)
        h_field = lambda X: np.zeros_like(np.asarray(X, float))
    else:
        exact = spherical_cap(g["center_z"], g["radius"], g["psi_max"])
        c = np.array([0.0, 0.0, g["center_z"]])
        r = g["radius"]
        h_field = lambda X: -2.0 * (np.asarray(X, float) - c) / r**2
    mesh = None
    if discretization == "parametric":
        pts, S, wts = _cap_parametric(theta, level)
        V = DiscreteVarifold(pts, S, wts, h_field(pts), exact, 2)
        spacing = (1.0 if g["flat"] else g["radius"] * g["psi_max"]) / level
    elif discretization == "mesh":
        verts, tris = cap_mesh(theta, level)
        V = from_triangulation(verts, tris, h_field=h_field, exact=exact)
        mesh = (verts, tris)
        spacing = (1.0 if g["flat"] else g["radius"] * g["psi_max"]) / level
    else:
        raise ValueError(f"unknown discretization {discretization!r}")
    bands = SphereBands(np.zeros(3), 1.0, ((math.pi / 2, math.pi),))
    B = BoundaryPatch.from_exact(bands, max(8, level), dom)
    cfg = ContactConfig(theta)
    sigma = cfg.sigma
    q = B.curve_points
    n2 = np.array([[0.0, 0.0, 0.0]]) if g["flat"] else (q - c) / r
    nV = q - sigma * n2 if not g["flat"] else q.copy()
    nV /= np.linalg.norm(nV, axis=1, keepdims=True)
    contact = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]])
    return Fixture(
        name=f"cap_theta{theta:.6g}", dom=dom, V=V, Bplus=B, cfg=cfg,
        contact_points=contact, expected_density_limit=np.full(len(contact), 1.0 + sigma),
        conormal_points=q, conormal_n_V=nV, Bplus_raw=B, spacing=spacing, level=level,
        params={"kind": "cap", "theta": theta, "discretization": discretization, **{
            k: v for k, v in g.items() if k != "flat"}, "flat": g["flat"]},
        mesh=mesh,
    )


# ---------------------------------------------------------------------------
# mirroring
# ---------------------------------------------------------------------------


def _reflect_matrix(d: int) -> np.ndarray:
    P = np.eye(d)
    P[-1, -1] = -1.0
    return P


def _reflect_varifold(V: DiscreteVarifold) -> DiscreteVarifold:
    P = _reflect_matrix(V.dim)
    h = None if V.curvature is None else V.curvature @ P
    exact = None if V.exact is None else V.exact.reflected()
    return DiscreteVarifold(V.points @ P, P @ V.planes @ P, V.weights, h, exact, V.rank)


def mirror_fixture(f: Fixture) -> Fixture:
    """Reflect across the last coordinate and replace ``theta`` by ``pi - theta``.

    The reflected varifold meets the wall at the same geometric angle, so the
    wetted region for the new angle is the reflection of the complement of
    the old one.  Obtuse results carry the rewrite (``mirror`` set,
    ``effective_sigma >= 0``, complemented patch).
    """
    d = f.dom.dim
    P = _reflect_matrix(d)
    if f.dom.kind != "ball":
        raise ValueError("mirroring is implemented for ball domains")
    dom = make_ball_domain(f.dom.center @ P, f.dom.radius)
    raw = f.Bplus_raw.complement().reflected()
    cfg = ContactConfig(math.pi - f.cfg.theta)
    cfg, eff = apply_mirror_rule(cfg, raw)
    name = f.name[:-len("_mirror")] if f.name.endswith("_mirror") else f.name + "_mirror"
    return Fixture(
        name=name, dom=dom, V=_reflect_varifold(f.V), Bplus=eff, cfg=cfg,
        contact_points=f.contact_points @ P, expected_density_limit=f.expected_density_limit,
        conormal_points=f.conormal_points @ P, conormal_n_V=f.conormal_n_V @ P,
        Bplus_raw=raw, spacing=f.spacing, level=f.level, params=dict(f.params),
        mesh=None if f.mesh is None else (f.mesh[0] @ P, f.mesh[1][:, ::-1]),
    )


def chord_family(level: int = 256, offsets=(0.0, 0.25, 0.5, 0.75)) -> list[Fixture]:
    return [chord_fixture(d, level) for d in offsets]


def cap_family(level: int = 24, thetas=(math.pi / 2, math.pi / 3)) -> list[Fixture]:
    return [cap_fixture(t, level) for t in thetas]


def build_fixture(spec: dict) -> Fixture:
    """Fixture from a config block ``{"name": ..., <parameters>}``."""
    spec = dict(spec)
    name = spec.pop("name")
    mirrored = spec.pop("mirror", False)
    if name == "chord":
        f = chord_fixture(float(spec.pop("d")), int(spec.pop("level", 256)))
    elif name == "diameter":
        f = diameter_fixture(int(spec.pop("level", 256)))
    elif name == "cap":
        f = cap_fixture(float(spec.pop("theta")), int(spec.pop("level", 24)),
                        spec.pop("discretization", "parametric"))
    else:
        raise ValueError(f"unknown fixture {name!r}")
    if spec:
        raise ValueError(f"unknown fixture parameters {sorted(spec)}")
    return mirror_fixture(f) if mirrored else f
