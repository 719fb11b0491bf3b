"""Discrete varifolds, boundary patches and their measures.

A :class:`DiscreteVarifold` is a finite list of atoms ``(x, S, w, h)``:
a point, the orthogonal projection onto an n-plane, an area weight and
optionally the mean curvature vector at that point.  It stands for the
measure ``sum_i w_i delta_(x_i, S_i)`` on position/plane pairs.

Mean curvature sign convention: ``delta V(g) = -sum w h.g`` for fields with
compact support away from the boundary of the surface, so the unit sphere
carries ``h(x) = -2 x``.

A :class:`BoundaryPatch` is a quadrature of a region ``B+`` of the container
wall together with its boundary curve and outward co-normals.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .geom import Domain, boundary_normal, reflect_points

SYM_TOL = 1e-10
TANGENT_CHECK = 1e-8


def omega(n: int) -> float:
    """Volume of the unit ball in R^n."""
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def line_projection(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    u = u / np.linalg.norm(u, axis=-1, keepdims=True)
    return u[..., :, None] * u[..., None, :]


def plane_projection(normal) -> np.ndarray:
    """Projection onto the hyperplane orthogonal to ``normal`` (batched)."""
    nu = np.asarray(normal, dtype=float)
    nu = nu / np.linalg.norm(nu, axis=-1, keepdims=True)
    d = nu.shape[-1]
    return np.eye(d) - nu[..., :, None] * nu[..., None, :]


@dataclass(frozen=True, eq=False)
class DiscreteVarifold:
    """Weighted tangent-plane atoms.

    Parameters
    ----------
    points : (m, d) array
    planes : (m, d, d) array of symmetric idempotent rank-``n`` matrices
    weights : (m,) array of non-negative area weights
    curvature : (m, d) array or None
        Mean curvature vector per atom.
    exact : object or None
        Exact-geometry descriptor with ``mass_in_ball(a, rho)`` and
        ``mass_in_reflected_ball(dom, a, rho)``; used by ``method="auto"``.
    rank : int or None
        Plane dimension ``n``; inferred from the planes when omitted.
    """

    points: np.ndarray
    planes: np.ndarray
    weights: np.ndarray
    curvature: np.ndarray | None = None
    exact: Any = None
    rank: int | None = None

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        m, d = pts.shape
        S = np.asarray(self.planes, dtype=float).reshape(m, d, d)
        w = np.asarray(self.weights, dtype=float).reshape(m)
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and non-negative")
        if m:
            if np.max(np.abs(S - np.swapaxes(S, 1, 2))) > SYM_TOL:
                raise ValueError("plane matrices must be symmetric")
            if np.max(np.abs(S @ S - S)) > 1e-8:
                raise ValueError("plane matrices must be idempotent")
            ranks = np.rint(np.trace(S, axis1=1, axis2=2)).astype(int)
            if np.any(ranks != ranks[0]):
                raise ValueError("all planes must have the same dimension")
            rank = int(ranks[0])
            if self.rank is not None and self.rank != rank:
                raise ValueError(f"planes have rank {rank}, expected {self.rank}")
        else:
            rank = d - 1 if self.rank is None else int(self.rank)
        h = None
        if self.curvature is not None:
            h = np.asarray(self.curvature, dtype=float).reshape(m, d)
        for k, v in (("points", pts), ("planes", S), ("weights", w), ("curvature", h),
                     ("rank", rank)):
            object.__setattr__(self, k, v)
        for arr in (pts, S, w, h):
            if isinstance(arr, np.ndarray):
                arr.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def n(self) -> int:
        return self.rank

    def __len__(self) -> int:
        return self.points.shape[0]

    def mass(self) -> float:
        return float(np.sum(self.weights))

    def with_exact(self, exact) -> "DiscreteVarifold":
        return DiscreteVarifold(self.points, self.planes, self.weights, self.curvature,
                                exact, self.rank)

    def scaled(self, factor: float) -> "DiscreteVarifold":
        return DiscreteVarifold(self.points, self.planes, factor * self.weights,
                                self.curvature, None, self.rank)

    def concat(self, other: "DiscreteVarifold") -> "DiscreteVarifold":
        h = None
        if self.curvature is not None and other.curvature is not None:
            h = np.concatenate([self.curvature, other.curvature])
        return DiscreteVarifold(np.concatenate([self.points, other.points]),
                                np.concatenate([self.planes, other.planes]),
                                np.concatenate([self.weights, other.weights]), h,
                                None, self.rank)


def empty_varifold(dim: int, n: int | None = None) -> DiscreteVarifold:
    return DiscreteVarifold(np.empty((0, dim)), np.empty((0, dim, dim)), np.empty(0),
                            np.empty((0, dim)), rank=dim - 1 if n is None else n)


def _eval_h(h_field, pts):
    if h_field is None:
        return None
    return np.asarray(h_field(pts), dtype=float).reshape(pts.shape)


def from_triangulation(vertices, triangles, h_field: Callable | None = None,
                       rule: str = "midedge", exact=None) -> DiscreteVarifold:
    """Varifold of a triangulated surface in R^3.

    ``rule="midedge"`` places three atoms at the edge midpoints with weight
    one third of the triangle area (exact for quadratics); ``"centroid"``
    uses one atom per triangle.
    """
    V = np.asarray(vertices, dtype=float)
    T = np.asarray(triangles, dtype=int).reshape(-1, 3)
    if T.size == 0:
        return empty_varifold(V.shape[1] if V.ndim == 2 else 3, 2)
    p0, p1, p2 = V[T[:, 0]], V[T[:, 1]], V[T[:, 2]]
    cr = np.cross(p1 - p0, p2 - p0)
    area2 = np.linalg.norm(cr, axis=1)
    scale = np.maximum(np.linalg.norm(p1 - p0, axis=1), np.linalg.norm(p2 - p0, axis=1))
    bad = area2 <= 1e-14 * scale**2
    if np.any(bad):
        raise ValueError(f"zero-area triangle at index {int(np.nonzero(bad)[0][0])}")
    normal = cr / area2[:, None]
    S = plane_projection(normal)
    area = 0.5 * area2
    if rule == "midedge":
        pts = np.concatenate([(p0 + p1) / 2, (p1 + p2) / 2, (p2 + p0) / 2])
        S = np.concatenate([S, S, S])
        w = np.concatenate([area, area, area]) / 3.0
    elif rule == "centroid":
        pts = (p0 + p1 + p2) / 3
        w = area
    else:
        raise ValueError(f"unknown quadrature rule {rule!r}")
    return DiscreteVarifold(pts, S, w, _eval_h(h_field, pts), exact, 2)


def from_segments(polyline, h_field: Callable | None = None, nodes_per_segment: int = 1,
                  closed: bool = False, exact=None) -> DiscreteVarifold:
    """1-varifold of a planar polyline, midpoint composite rule per segment."""
    P = np.asarray(polyline, dtype=float)
    if P.ndim != 2 or P.shape[0] < 2:
        raise ValueError("a polyline needs at least two points")
    Q = np.roll(P, -1, axis=0) if closed else P[1:]
    A = P if closed else P[:-1]
    D = Q - A
    L = np.linalg.norm(D, axis=1)
    if np.any(L <= 1e-15 * max(1.0, float(np.max(np.abs(P))))):
        raise ValueError("polyline contains repeated consecutive points")
    k = int(nodes_per_segment)
    if k < 1:
        raise ValueError("nodes_per_segment must be positive")
    t = (np.arange(k) + 0.5) / k
    pts = (A[:, None, :] + t[None, :, None] * D[:, None, :]).reshape(-1, P.shape[1])
    S = np.repeat(line_projection(D), k, axis=0)
    w = np.repeat(L / k, k)
    return DiscreteVarifold(pts, S, w, _eval_h(h_field, pts), exact, 1)


# ---------------------------------------------------------------------------
# measures
# ---------------------------------------------------------------------------


def _use_exact(obj, method: str) -> bool:
    if method == "exact":
        if obj.exact is None:
            raise ValueError("no exact-geometry descriptor attached")
        return True
    if method == "quadrature":
        return False
    if method != "auto":
        raise ValueError(f"unknown method {method!r}")
    return obj.exact is not None


def mass_in_ball(V: DiscreteVarifold, a, rho: float, method: str = "auto") -> float:
    """``||V||(B_rho(a))`` with the open-ball convention."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    if _use_exact(V, method):
        return float(V.exact.mass_in_ball(np.asarray(a, float), rho))
    if len(V) == 0:
        return 0.0
    r = np.linalg.norm(V.points - np.asarray(a, float), axis=1)
    return float(np.sum(V.weights[r < rho]))


def mass_in_reflected_ball(V: DiscreteVarifold, dom: Domain, a, rho: float,
                           method: str = "auto") -> float:
    """``||V||`` of the set of collar points whose reflection lies in ``B_rho(a)``."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    if _use_exact(V, method):
        return float(V.exact.mass_in_reflected_ball(dom, np.asarray(a, float), rho))
    if len(V) == 0:
        return 0.0
    xt, ok = reflect_points(dom, V.points)
    with np.errstate(invalid="ignore"):
        inside = ok & (np.linalg.norm(xt - np.asarray(a, float), axis=1) < rho)
    return float(np.sum(V.weights[inside]))


def density_ratio(V: DiscreteVarifold, a, rho: float, method: str = "auto") -> float:
    return mass_in_ball(V, a, rho, method) / (omega(V.n) * rho ** V.n)


def _grad_of(g):
    return g.grad if hasattr(g, "grad") else g


def first_variation(V: DiscreteVarifold, g) -> float:
    """``sum w (grad g . S)``; ``g`` is a field object with ``grad`` or a gradient callable.

    The gradient evaluator returns ``G[..., i, j] = d_i g_j``.  Only the
    Frobenius pairing with the symmetric ``S`` enters, so the index order
    does not matter here.
    """
    if len(V) == 0:
        return 0.0
    G = np.asarray(_grad_of(g)(V.points), dtype=float)
    return float(np.sum(V.weights * np.einsum("mij,mij->m", G, V.planes)))


def curvature_pairing(V: DiscreteVarifold, g) -> float:
    """``sum w h.g``."""
    if len(V) == 0:
        return 0.0
    if V.curvature is None:
        raise ValueError("varifold carries no mean curvature samples")
    val = g.value if hasattr(g, "value") else g
    return float(np.sum(V.weights * np.einsum("mi,mi->m", V.curvature, val(V.points))))


# ---------------------------------------------------------------------------
# boundary patches
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BoundaryPatch:
    """Quadrature of a wall region ``B+`` and of its boundary curve.

    Parameters
    ----------
    nodes, weights : quadrature of ``H^n`` restricted to ``B+``
    curve_points, curve_normals, curve_weights : quadrature of ``H^(n-1)``
        on the reduced boundary with outward unit co-normals tangent to the wall
    exact : ArcSet, SphereBands or None
    resolution : refinement parameter used to build the quadrature, kept so
        that complements use the same resolution
    """

    nodes: np.ndarray
    weights: np.ndarray
    curve_points: np.ndarray
    curve_normals: np.ndarray
    curve_weights: np.ndarray
    exact: Any = None
    resolution: int | None = None

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        d = nodes.shape[1] if nodes.ndim == 2 else np.asarray(self.curve_points).shape[-1]
        vals = dict(
            nodes=nodes.reshape(-1, d),
            weights=np.asarray(self.weights, dtype=float).reshape(-1),
            curve_points=np.asarray(self.curve_points, dtype=float).reshape(-1, d),
            curve_normals=np.asarray(self.curve_normals, dtype=float).reshape(-1, d),
            curve_weights=np.asarray(self.curve_weights, dtype=float).reshape(-1),
        )
        if vals["nodes"].shape[0] != vals["weights"].shape[0]:
            raise ValueError("nodes and weights differ in length")
        if np.any(vals["weights"] < 0):
            raise ValueError("patch weights must be non-negative")
        for k, v in vals.items():
            v.setflags(write=False)
            object.__setattr__(self, k, v)

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    def total(self) -> float:
        return float(self.exact.total()) if self.exact is not None else float(self.weights.sum())

    def validate(self, dom: Domain, tol: float = 1e-10, tangent_tol: float = TANGENT_CHECK):
        """Raise if nodes leave the wall or co-normals are not unit and tangent."""
        if len(self.weights):
            phi = np.abs(dom.phi(self.nodes))
            if np.max(phi) >= tol:
                raise ValueError(f"patch node off the boundary (|phi| = {np.max(phi):.2e})")
        if len(self.curve_weights):
            if np.max(np.abs(dom.phi(self.curve_points))) >= tol:
                raise ValueError("boundary-curve point off the boundary")
            nh = boundary_normal(dom, self.curve_points)
            if np.max(np.abs(np.einsum("mi,mi->m", nh, self.curve_normals))) >= tangent_tol:
                raise ValueError("co-normal not tangent to the boundary")
            if np.max(np.abs(np.linalg.norm(self.curve_normals, axis=1) - 1)) >= tangent_tol:
                raise ValueError("co-normal not unit length")
        return self

    @classmethod
    def from_exact(cls, desc, resolution: int, dom: Domain | None = None) -> "BoundaryPatch":
        """Quadrature of an :class:`ArcSet` (nodes per unit length) or
        :class:`SphereBands` (polar Gauss nodes per band)."""
        nodes, weights = desc.quadrature(resolution)
        if hasattr(desc, "boundary_curve"):
            if desc.center.shape[0] == 3:
                cp, cn, cw = desc.boundary_curve(max(16, 2 * resolution))
            else:
                cp, cn, cw = desc.boundary_curve()
        patch = cls(nodes, weights, cp, cn, cw, desc, resolution)
        return patch.validate(dom) if dom is not None else patch

    def complement(self) -> "BoundaryPatch":
        if self.exact is None:
            raise ValueError("complement requires an exact patch descriptor")
        return BoundaryPatch.from_exact(self.exact.complement(), self.resolution)

    def reflected(self) -> "BoundaryPatch":
        if self.exact is None:
            raise ValueError("reflection requires an exact patch descriptor")
        return BoundaryPatch.from_exact(self.exact.reflected(), self.resolution)


def empty_patch(dim: int) -> BoundaryPatch:
    z = np.empty((0, dim))
    return BoundaryPatch(z, np.empty(0), z, z, np.empty(0))


def patch_measure_in_ball(B: BoundaryPatch, a, rho: float, method: str = "auto") -> float:
    """``H^n(B+ intersect B_rho(a))``."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    if _use_exact(B, method):
        return float(B.exact.measure_in_ball(np.asarray(a, float), rho))
    if len(B.weights) == 0:
        return 0.0
    r = np.linalg.norm(B.nodes - np.asarray(a, float), axis=1)
    return float(np.sum(B.weights[r < rho]))


def check_tangential(dom: Domain, g, pts, tol: float = TANGENT_CHECK) -> float:
    """Max ``|g.nu|`` over ``pts``; raises when it reaches ``tol``."""
    if len(pts) == 0:
        return 0.0
    val = g.value if hasattr(g, "value") else g
    defect = float(np.max(np.abs(np.einsum("mi,mi->m", val(pts), boundary_normal(dom, pts)))))
    if defect >= tol:
        raise ValueError(f"test field is not tangential on the boundary (|g.nu| = {defect:.2e})")
    return defect


def surface_divergence_integral(dom: Domain, B: BoundaryPatch, g,
                                tol: float = TANGENT_CHECK) -> float:
    """``int_{B+} div_wall g dH^n`` as ``sum w (grad g . tau)``."""
    if len(B.weights) == 0:
        return 0.0
    check_tangential(dom, g, B.nodes, tol)
    tau = plane_projection(boundary_normal(dom, B.nodes))
    G = np.asarray(_grad_of(g)(B.nodes), dtype=float)
    return float(np.sum(B.weights * np.einsum("mij,mij->m", G, tau)))


def conormal_flux(B: BoundaryPatch, g) -> float:
    """``int_{boundary of B+} g . n_B+ dH^(n-1)``."""
    if len(B.curve_weights) == 0:
        return 0.0
    val = g.value if hasattr(g, "value") else g
    return float(np.sum(B.curve_weights * np.einsum("mi,mi->m", val(B.curve_points),
                                                    B.curve_normals)))


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------


def read_obj(path) -> tuple[np.ndarray, np.ndarray]:
    """Vertices and triangles of an ASCII OBJ file; polygons are fanned."""
    verts, tris = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                verts.append([float(c) for c in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(tok.split("/")[0]) for tok in parts[1:]]
                idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
                if len(idx) < 3:
                    raise ValueError(f"{path}:{lineno}: face with fewer than 3 vertices")
                for k in range(1, len(idx) - 1):
                    tris.append([idx[0], idx[k], idx[k + 1]])
    return np.array(verts, dtype=float).reshape(-1, 3), np.array(tris, dtype=int).reshape(-1, 3)


def write_obj(path, vertices, triangles) -> None:
    with open(path, "w") as fh:
        for v in np.asarray(vertices):
            fh.write("v " + " ".join(f"{c:.17g}" for c in v) + "\n")
        for t in np.asarray(triangles):
            fh.write("f " + " ".join(str(int(i) + 1) for i in t) + "\n")


def read_polyline_csv(path) -> np.ndarray:
    """Points of a plain ``x,y`` CSV polyline; a non-numeric first row is a header."""
    rows = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                rows.append([float(c) for c in row[:2]])
            except ValueError:
                if i == 0:
                    continue
                raise
    return np.array(rows, dtype=float).reshape(-1, 2)


def write_polyline_csv(path, points) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y"])
        for p in np.asarray(points):
            w.writerow([f"{p[0]:.17g}", f"{p[1]:.17g}"])


def write_varifold_csv(path, V: DiscreteVarifold) -> None:
    """One row per atom: coordinates, plane projection row-major, weight, curvature."""
    d = V.dim
    xs = [f"x{i}" for i in range(d)]
    ss = [f"S{i}{j}" for i in range(d) for j in range(d)]
    hs = [f"h{i}" for i in range(d)] if V.curvature is not None else []
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(xs + ss + ["w"] + hs)
        for k in range(len(V)):
            row = list(V.points[k]) + list(V.planes[k].ravel()) + [V.weights[k]]
            if hs:
                row += list(V.curvature[k])
            w.writerow([f"{v:.17g}" for v in row])


def read_varifold_csv(path) -> DiscreteVarifold:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(c) for c in row] for row in reader if row], dtype=float)
    d = sum(1 for c in header if c.startswith("x"))
    has_h = any(c.startswith("h") for c in header)
    data = data.reshape(-1, len(header))
    pts = data[:, :d]
    S = data[:, d:d + d * d].reshape(-1, d, d)
    w = data[:, d + d * d]
    h = data[:, d + d * d + 1:] if has_h else None
    return DiscreteVarifold(pts, S, w, h)
