"""Weak contact-angle condition as a computable residual.

For an admissible field ``g`` (tangential on the wall) the condition reads

    delta V(g) + sigma int_{B+} div_wall g dH^n = -int h.g d||V||

and :func:`angle_residual` returns the difference of the two sides.  Test
fields carry their own gradients with the index convention
``grad[..., i, j] = d_i g_j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .geom import (
    Domain,
    boundary_normal,
    footpoints,
    grad_xi_Q,
    normal_field_gradient,
    reflection_gradient,
    sample_ball_points,
    sample_boundary,
)
from .varifold import (
    TANGENT_CHECK,
    BoundaryPatch,
    DiscreteVarifold,
    check_tangential,
    conormal_flux,
    curvature_pairing,
    first_variation,
    surface_divergence_integral,
)

Field = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ContactConfig:
    """Contact angle ``theta`` with ``sigma = cos(theta)``.

    ``mirror`` records that the rewrite ``sigma -> -sigma``,
    ``B+ -> wall minus B+`` has been applied, so :attr:`effective_sigma` is
    the coefficient to use together with the complemented patch.
    """

    theta: float
    mirror: bool = False

    def __post_init__(self):
        if not (0.0 <= self.theta <= math.pi):
            raise ValueError(f"theta must lie in [0, pi], got {self.theta}")

    @property
    def sigma(self) -> float:
        return math.cos(self.theta)

    @property
    def effective_sigma(self) -> float:
        return -self.sigma if self.mirror else self.sigma

    @classmethod
    def from_sigma(cls, sigma: float) -> "ContactConfig":
        if not -1.0 <= sigma <= 1.0:
            raise ValueError("sigma must lie in [-1, 1]")
        return cls(math.acos(sigma))


def apply_mirror_rule(cfg: ContactConfig, Bplus: BoundaryPatch):
    """Rewrite obtuse angles: returns ``(cfg, patch)`` with ``effective_sigma >= 0``.

    Acute configurations are returned unchanged.
    """
    if cfg.mirror or cfg.theta <= math.pi / 2:
        return cfg, Bplus
    return replace(cfg, mirror=True), Bplus.complement()


# ---------------------------------------------------------------------------
# test fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TestField:
    """Vector field with its gradient ``grad[..., i, j] = d_i g_j``."""

    value: Field
    grad: Field
    field_id: str = "g"
    tangent_tol: float = TANGENT_CHECK
    meta: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    def __call__(self, X):
        return self.value(X)

    def tangential_defect(self, dom: Domain, pts) -> float:
        if len(pts) == 0:
            return 0.0
        nh = boundary_normal(dom, pts)
        return float(np.max(np.abs(np.einsum("mi,mi->m", self.value(pts), nh))))

    def is_admissible(self, dom: Domain, pts) -> bool:
        return self.tangential_defect(dom, pts) < self.tangent_tol

    def c1_norm(self, pts) -> float:
        """``max |g| + max |grad g|_F`` over the sample points."""
        v = np.linalg.norm(self.value(pts), axis=-1)
        G = np.linalg.norm(self.grad(pts), axis=(-2, -1))
        return float(np.max(v) + np.max(G))


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


def _smoothstep_d(t):
    inside = (t > 0) & (t < 1)
    t = np.clip(t, 0.0, 1.0)
    return np.where(inside, 30.0 * t * t * (1.0 - t) ** 2, 0.0)


def bump(t, width: float):
    """Quintic ``eta`` with ``eta(0) = 1``, ``eta'(0) = 0``, ``eta = 0`` for ``t >= width``."""
    return 1.0 - _smoothstep(np.asarray(t, float) / width)


def bump_d(t, width: float):
    return -_smoothstep_d(np.asarray(t, float) / width) / width


def cutoff(s):
    """Smooth ``phi`` with ``phi = 1`` for ``s <= 1/2`` and ``phi = 0`` for ``s >= 1``."""
    return 1.0 - _smoothstep(2.0 * np.asarray(s, float) - 1.0)


def cutoff_d(s):
    return -2.0 * _smoothstep_d(2.0 * np.asarray(s, float) - 1.0)


def tangentialize(dom: Domain, G: Field, dG: Field, field_id: str = "G") -> TestField:
    """Remove the normal component of ``G`` near the wall.

    ``g = G - eta(|s|) (G.n) n`` with ``n = nu_hat(xi(x))`` and ``eta``
    supported in ``[0, s0/2]``; ``g = G`` further away.  The gradient is
    analytic: ``d_i n_j`` is the signed-distance Hessian.
    """
    width = 0.5 * dom.s0

    def _parts(X):
        X = np.asarray(X, dtype=float)
        flat = X.reshape(-1, dom.dim)
        xi, s, ok = footpoints(dom, flat)
        ok &= np.abs(s) < width
        return flat, xi, s, ok

    def value(X):
        X = np.asarray(X, dtype=float)
        flat, xi, s, ok = _parts(X)
        g = np.array(G(flat), dtype=float).reshape(flat.shape)
        if np.any(ok):
            n = boundary_normal(dom, xi[ok])
            f = np.einsum("mi,mi->m", g[ok], n)
            g[ok] -= (bump(np.abs(s[ok]), width) * f)[:, None] * n
        return g.reshape(X.shape)

    def grad(X):
        X = np.asarray(X, dtype=float)
        flat, xi, s, ok = _parts(X)
        J = np.array(dG(flat), dtype=float).reshape(flat.shape + (dom.dim,))
        if np.any(ok):
            Xo, xo, so = flat[ok], xi[ok], s[ok]
            g = np.asarray(G(Xo), dtype=float)
            n = boundary_normal(dom, xo)
            Dn = normal_field_gradient(dom, Xo, xo, so)
            f = np.einsum("mi,mi->m", g, n)
            eta = bump(np.abs(so), width)
            # d_i eta(|s|) = eta'(|s|) sign(s) n_i
            deta = (bump_d(np.abs(so), width) * np.sign(so))[:, None] * n
            df = np.einsum("mij,mj->mi", J[ok], n) + np.einsum("mij,mj->mi", Dn, g)
            J[ok] -= (f[:, None, None] * deta[:, :, None] * n[:, None, :]
                      + eta[:, None, None] * df[:, :, None] * n[:, None, :]
                      + (eta * f)[:, None, None] * Dn)
        return J.reshape(X.shape + (dom.dim,))

    return TestField(value, grad, field_id, meta={"kind": "tangentialized"})


def proof_test_field(dom: Domain, a, rho: float, field_id: str = "proof",
                     check_range: bool = True) -> TestField:
    """``g(x) = gamma(r)(x - a) + gamma(r~) i_x(x~ - a)``, ``gamma(t) = phi(t/rho)``.

    ``r = |x - a|``, ``r~ = |x~ - a|`` and ``i_x = tau - nu`` at ``xi(x)``.
    The field is tangential on the wall by construction.
    """
    a = np.asarray(a, dtype=float)
    if check_range:
        if not 0 < rho <= dom.s0 / 6 * (1 + 1e-12):
            raise ValueError(f"rho must lie in (0, s0/6], got {rho}")
        _, s_a, ok_a = footpoints(dom, a[None])
        if not (ok_a[0] and s_a[0] <= 1e-12 and -s_a[0] < dom.s0 / 6):
            raise ValueError("centre must lie in the closed domain within s0/6 of the wall")

    def _reflected_parts(flat):
        xi, s, ok = footpoints(dom, flat)
        xt = np.where(ok[:, None], 2.0 * xi - flat, np.inf)
        rt = np.linalg.norm(xt - a, axis=1)
        live = ok & (rt < rho)
        return xi, xt, rt, live

    def value(X):
        X = np.asarray(X, dtype=float)
        flat = X.reshape(-1, dom.dim)
        r = np.linalg.norm(flat - a, axis=1)
        out = cutoff(r / rho)[:, None] * (flat - a)
        xi, xt, rt, live = _reflected_parts(flat)
        if np.any(live):
            n = boundary_normal(dom, xi[live])
            y = xt[live] - a
            iy = y - 2.0 * np.einsum("mi,mi->m", n, y)[:, None] * n
            out[live] += cutoff(rt[live] / rho)[:, None] * iy
        return out.reshape(X.shape)

    def grad(X):
        X = np.asarray(X, dtype=float)
        flat = X.reshape(-1, dom.dim)
        d = dom.dim
        v = flat - a
        r = np.linalg.norm(v, axis=1)
        gam = cutoff(r / rho)
        dgam = cutoff_d(r / rho) / rho
        safe = np.where(r > 0, r, 1.0)
        out = gam[:, None, None] * np.eye(d) + (dgam / safe)[:, None, None] * (
            v[:, :, None] * v[:, None, :])
        xi, xt, rt, live = _reflected_parts(flat)
        if np.any(live):
            xl = flat[live]
            y = xt[live] - a
            n = boundary_normal(dom, xi[live])
            L = np.eye(d) - 2.0 * n[:, :, None] * n[:, None, :]
            Dxi = grad_xi_Q(dom, xl) + (np.eye(d) - n[:, :, None] * n[:, None, :])
            dL = reflection_gradient(dom, xi[live])
            Ly = np.einsum("mjk,mk->mj", L, y)
            rtl = rt[live]
            g2 = cutoff(rtl / rho)
            dg2 = cutoff_d(rtl / rho) / rho
            # d_i r~ = ((2 grad xi - I)(x~ - a))_i / r~
            drt = np.einsum("mik,mk->mi", 2.0 * Dxi - np.eye(d), y) / np.where(
                rtl > 0, rtl, 1.0)[:, None]
            term_m = dg2[:, None, None] * drt[:, :, None] * Ly[:, None, :]
            dLy = np.einsum("mil,mljk,mk->mij", Dxi, dL, y)
            LdX = np.einsum("mjk,mik->mij", L, 2.0 * Dxi - np.eye(d))
            out[live] += term_m + g2[:, None, None] * (dLy + LdX)
        return out.reshape(X.shape + (d,))

    return TestField(value, grad, field_id,
                     meta={"kind": "proof", "a": a.tolist(), "rho": float(rho)})


def coordinate_fields(dom: Domain) -> list[TestField]:
    """Tangentialized ``e_k`` and ``x_{k+1}^2 e_k`` for ``k = 0..d-1``."""
    d = dom.dim
    out = []
    for k in range(d):
        e = np.zeros(d)
        e[k] = 1.0
        out.append(tangentialize(
            dom, lambda X, e=e: np.broadcast_to(e, np.shape(X)).copy(),
            lambda X: np.zeros(np.shape(X) + (d,)), field_id=f"const_e{k}"))
    for k in range(d):
        m = (k + 1) % d

        def G(X, k=k, m=m):
            X = np.asarray(X, float)
            out = np.zeros_like(X)
            out[..., k] = X[..., m] ** 2
            return out

        def dG(X, k=k, m=m):
            X = np.asarray(X, float)
            out = np.zeros(X.shape + (d,))
            out[..., m, k] = 2.0 * X[..., m]
            return out

        out.append(tangentialize(dom, G, dG, field_id=f"quad_x{m}sq_e{k}"))
    return out


def closure_fields(dom: Domain) -> list[TestField]:
    """Fields ``phi(x)^2 G(x)`` vanishing to second order on the wall.

    ``G`` runs over ``e_k`` and ``x_{k+1}^2 e_k``.  For these fields the
    first variation of a smooth surface with boundary on the wall reduces to
    ``-int h.g``, so they test the curvature samples alone.
    """
    d = dom.dim
    out = []
    for k in range(d):
        for quad in (False, True):
            m = (k + 1) % d

            def G(X, k=k, m=m, quad=quad):
                X = np.asarray(X, float)
                out = np.zeros_like(X)
                out[..., k] = X[..., m] ** 2 if quad else 1.0
                return out

            def dG(X, k=k, m=m, quad=quad):
                X = np.asarray(X, float)
                out = np.zeros(X.shape + (d,))
                if quad:
                    out[..., m, k] = 2.0 * X[..., m]
                return out

            def value(X, G=G):
                f = dom.phi(X)
                return (f * f)[..., None] * G(X)

            def grad(X, G=G, dG=dG):
                f = dom.phi(X)
                df = dom.grad(X)
                return (2.0 * f[..., None, None] * df[..., :, None] * G(X)[..., None, :]
                        + (f * f)[..., None, None] * dG(X))

            name = f"phi2_x{m}sq_e{k}" if quad else f"phi2_e{k}"
            out.append(TestField(value, grad, name, meta={"kind": "closure"}))
    return out


def random_collar_centers(dom: Domain, m: int, rng: np.random.Generator,
                          depth: float | None = None) -> np.ndarray:
    """``m`` points of the closed domain within ``depth`` (default ``s0/6``) of the wall."""
    depth = dom.s0 / 6 if depth is None else depth
    b = sample_boundary(dom, m, rng)
    t = depth * rng.random(m) * (1 - 1e-9)
    return b - t[:, None] * boundary_normal(dom, b)


def default_family(dom: Domain, rng: np.random.Generator, n_proof: int = 5,
                   centers=None) -> list[TestField]:
    """``2(n+1)`` tangentialized coordinate fields plus ``n_proof`` proof fields."""
    fam = coordinate_fields(dom)
    rho = dom.s0 / 6
    if centers is None:
        centers = random_collar_centers(dom, n_proof, rng)
    for i, a in enumerate(np.asarray(centers, float).reshape(-1, dom.dim)):
        fam.append(proof_test_field(dom, a, rho, field_id=f"proof_{i}"))
    return fam


def sample_domain(dom: Domain, m: int, rng: np.random.Generator) -> np.ndarray:
    """Points of the closed domain: half uniform inside, half on the wall."""
    m_in = m - m // 2
    if dom.kind == "ball":
        inner = sample_ball_points(rng, dom.center, dom.radius, m_in)
    else:
        lo, hi = dom.bounds
        inner = np.empty((0, dom.dim))
        while inner.shape[0] < m_in:
            c = lo + (hi - lo) * rng.random((4 * m_in, dom.dim))
            inner = np.concatenate([inner, c[dom.phi(c) < 0]])
        inner = inner[:m_in]
    return np.concatenate([inner, sample_boundary(dom, m // 2, rng)])


# ---------------------------------------------------------------------------
# residuals
# ---------------------------------------------------------------------------


def angle_residual(V: DiscreteVarifold, dom: Domain, Bplus: BoundaryPatch,
                   cfg: ContactConfig, g: TestField, sigma: float | None = None) -> float:
    """``delta V(g) + sigma int_{B+} div_wall g + sum w h.g``.

    ``sigma`` overrides ``cfg.effective_sigma`` for perturbation studies.
    """
    wall_pts = Bplus.nodes if len(Bplus.weights) else np.empty((0, dom.dim))
    check_tangential(dom, g, wall_pts, g.tangent_tol)
    if len(V) and V.curvature is None:
        raise ValueError("varifold carries no mean curvature samples")
    s = cfg.effective_sigma if sigma is None else sigma
    out = first_variation(V, g) + curvature_pairing(V, g)
    if s != 0.0 and len(Bplus.weights):
        out += s * surface_divergence_integral(dom, Bplus, g, g.tangent_tol)
    return float(out)


@dataclass(frozen=True)
class ResidualRecord:
    field_id: str
    raw_residual: float
    normalized_residual: float
    refinement_level: int | str

    def to_dict(self) -> dict:
        return {"field_id": self.field_id, "raw_residual": self.raw_residual,
                "normalized_residual": self.normalized_residual,
                "refinement_level": self.refinement_level}


@dataclass(frozen=True)
class ResidualReport:
    records: tuple[ResidualRecord, ...]

    @property
    def max_normalized(self) -> float:
        return max(abs(r.normalized_residual) for r in self.records)

    @property
    def max_raw(self) -> float:
        return max(abs(r.raw_residual) for r in self.records)

    def to_list(self) -> list[dict]:
        return [r.to_dict() for r in self.records]


def residual_sweep(V, dom, Bplus, cfg, family: Sequence[TestField], *, level=0,
                   norm_samples: np.ndarray | None = None, sigma: float | None = None,
                   norms: dict | None = None) -> ResidualReport:
    """Residual of every field, raw and divided by its sampled C^1 norm."""
    if not family:
        raise ValueError("test family is empty")
    if norm_samples is None and norms is None:
        norm_samples = sample_domain(dom, 2000, np.random.default_rng(12345))
    recs = []
    for g in family:
        raw = angle_residual(V, dom, Bplus, cfg, g, sigma)
        nrm = norms[g.field_id] if norms is not None else g.c1_norm(norm_samples)
        recs.append(ResidualRecord(g.field_id, raw, raw / nrm if nrm > 0 else 0.0, level))
    return ResidualReport(tuple(recs))


def observed_orders(h, err) -> np.ndarray:
    """Pairwise orders ``log(e1/e2)/log(h1/h2)`` of successive refinements."""
    h = np.asarray(h, float)
    e = np.abs(np.asarray(err, float))
    return np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:])


def tolerance_schedule(h, err, factor: float = 10.0) -> float:
    """``factor * K * h_fine^2`` with ``K = max err_l / h_l^2``."""
    h = np.asarray(h, float)
    K = float(np.max(np.abs(np.asarray(err, float)) / h**2))
    return factor * K * float(np.min(h)) ** 2


def conormal_check(points, n_V, dom: Domain, Bplus: BoundaryPatch, sigma: float,
                   match_tol: float = 1e-10) -> np.ndarray:
    """Defect of the smooth contact condition at each boundary point of ``M``.

    On the boundary curve of ``B+`` the tangential part of ``n_V`` must equal
    ``-sigma n_B+``; elsewhere ``n_V`` must equal the wall normal.
    """
    q = np.asarray(points, float).reshape(-1, dom.dim)
    nV = np.asarray(n_V, float).reshape(-1, dom.dim)
    if nV.shape != q.shape:
        raise ValueError("co-normal data does not match the boundary sample")
    nu = boundary_normal(dom, q)
    out = np.empty(len(q))
    cp = Bplus.curve_points
    for i in range(len(q)):
        tang = nV[i] - (nV[i] @ nu[i]) * nu[i]
        if len(cp):
            dist = np.linalg.norm(cp - q[i], axis=1)
            j = int(np.argmin(dist))
            if dist[j] < match_tol:
                out[i] = np.linalg.norm(tang + sigma * Bplus.curve_normals[j])
                continue
        out[i] = np.linalg.norm(nV[i] - nu[i])
    return out


def conormal_residual_oracle(Bplus: BoundaryPatch, g: TestField, sigma_true: float,
                             sigma_used: float) -> float:
    """Residual predicted by the divergence theorem when ``sigma`` is misconfigured."""
    return (sigma_used - sigma_true) * conormal_flux(Bplus, g)
