"""Domains with C^2 boundary and the collar machinery around them.

A :class:`Domain` is described by an implicit function ``phi`` (negative
inside) together with its gradient and Hessian.  Inside the collar
``N_s0 = {dist(x, boundary) < s0}`` every point has a unique nearest boundary
point ``xi(x)``; from it we build the reflection ``2 xi(x) - x``, the tangent
and normal projections ``tau``, ``nu`` and the linear reflection
``i_x = tau - nu``.

All evaluators are vectorised: points are arrays of shape ``(..., d)``.
Matrix-valued quantities carry two trailing axes, the gradient of the
reflection matrix three (``[..., l, j, k] = d_l (tau - nu)_jk``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

__all__ = [
    "CollarError",
    "CollarPoint",
    "Domain",
    "DomainError",
    "boundary_normal",
    "check_projection_derivative",
    "check_reflected_ball",
    "footpoints",
    "grad_xi_Q",
    "in_reflected_ball",
    "make_ball_domain",
    "make_ellipse_domain",
    "make_implicit_domain",
    "normal_gradient_norm",
    "principal_curvatures",
    "project",
    "reflect_op",
    "reflect_points",
    "reflection_gradient",
    "sample_ball_points",
    "sample_boundary",
    "sample_collar",
]

Evaluator = Callable[[np.ndarray], np.ndarray]

PHI_TOL = 1e-12
TANGENT_TOL = 1e-10
MAX_NEWTON = 50


class DomainError(ValueError):
    """Invalid domain description or a failed validation sweep."""


class CollarError(ValueError):
    """A point lies outside the collar where the projection is defined."""


@dataclass(frozen=True, eq=False)
class Domain:
    """Bounded open set with C^2 boundary.

    Attributes
    ----------
    kind : {"ball", "ellipse", "implicit"}
    dim : int
        Ambient dimension ``n + 1``.
    phi, grad, hess : callable
        Implicit function (``phi < 0`` inside) and its derivatives, vectorised
        over leading axes.
    kappa : float
        Bound on the principal curvatures of the boundary.
    s0 : float
        Collar width, ``0 < s0 <= 1/kappa``.
    center, radius : only for balls (closed-form projection).
    radii : only for ellipses/ellipsoids.
    bounds : (lo, hi) box containing the closure, used for sampling.
    """

    kind: str
    dim: int
    phi: Evaluator
    grad: Evaluator
    hess: Evaluator
    kappa: float
    s0: float
    center: np.ndarray | None = None
    radius: float | None = None
    radii: np.ndarray | None = None
    bounds: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def n(self) -> int:
        return self.dim - 1

    @property
    def fd_step(self) -> float:
        return 1e-5 * self.s0

    @property
    def closed_form(self) -> bool:
        return self.kind == "ball"

    def describe(self) -> dict:
        out = {"kind": self.kind, "dim": self.dim, "kappa": self.kappa, "s0": self.s0}
        if self.center is not None:
            out["center"] = [float(c) for c in self.center]
        if self.radius is not None:
            out["radius"] = float(self.radius)
        if self.radii is not None:
            out["radii"] = [float(r) for r in self.radii]
        return out


@dataclass(frozen=True, eq=False)
class CollarPoint:
    """Projection data of one point or a batch of points in the collar."""

    x: np.ndarray
    xi: np.ndarray
    dist: np.ndarray
    xtilde: np.ndarray
    tau: np.ndarray
    nu: np.ndarray
    normal: np.ndarray
    signed: np.ndarray


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------


def make_ball_domain(center, radius: float) -> Domain:
    """Ball with closed-form projection; ``kappa = 1/radius``, ``s0 = radius``."""
    if not radius > 0:
        raise DomainError(f"radius must be positive, got {radius}")
    c = np.asarray(center, dtype=float).copy()
    R = float(radius)
    d = c.shape[0]

    def phi(x):
        x = np.asarray(x, dtype=float)
        return (np.sum((x - c) ** 2, axis=-1) - R * R) / (2 * R)

    def grad(x):
        return (np.asarray(x, dtype=float) - c) / R

    def hess(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.eye(d) / R, x.shape + (d,)).copy()

    return Domain("ball", d, phi, grad, hess, kappa=1.0 / R, s0=R,
                  center=c, radius=R, bounds=(c - R, c + R))


def make_implicit_domain(phi: Evaluator, grad: Evaluator, hess: Evaluator,
                         kappa_hint: float, s0_hint: float, bounds,
                         *, kind: str = "implicit", n_validate: int = 1000,
                         seed: int = 0, radii=None, center=None) -> Domain:
    """Domain projected by Newton iteration, validated by sampling.

    ``kappa_hint`` must dominate the principal curvatures found at
    ``n_validate`` boundary samples, and projections started from perturbed
    initial guesses must agree throughout the collar.  The stored collar width
    is ``min(s0_hint, 1/kappa_hint)``.
    """
    if not (kappa_hint > 0 and s0_hint > 0):
        raise DomainError("kappa_hint and s0_hint must be positive")
    lo, hi = (np.asarray(b, dtype=float) for b in bounds)
    dom = Domain(kind, lo.shape[0], phi, grad, hess, kappa=float(kappa_hint),
                 s0=float(min(s0_hint, 1.0 / kappa_hint)),
                 center=None if center is None else np.asarray(center, float),
                 radii=None if radii is None else np.asarray(radii, float),
                 bounds=(lo, hi))
    _validate_implicit(dom, n_validate, np.random.default_rng(seed))
    return dom


def make_ellipse_domain(center, radii, kappa_hint: float | None = None,
                        s0_hint: float | None = None, **kw) -> Domain:
    """Ellipse or ellipsoid ``sum(((x - c)/r)^2) < 1``.

    Without hints the sharp values are used: the largest principal curvature is
    ``max(r)/min(r)^2`` and the reach on the inside equals its reciprocal.
    """
    c = np.asarray(center, dtype=float)
    r = np.asarray(radii, dtype=float)
    if np.any(r <= 0):
        raise DomainError("ellipse radii must be positive")
    inv2 = 1.0 / r**2
    if kappa_hint is None:
        kappa_hint = r.max() / r.min() ** 2
    if s0_hint is None:
        s0_hint = 1.0 / kappa_hint

    def phi(x):
        return np.sum((np.asarray(x, float) - c) ** 2 * inv2, axis=-1) - 1.0

    def grad(x):
        return 2.0 * (np.asarray(x, float) - c) * inv2

    def hess(x):
        x = np.asarray(x, float)
        return np.broadcast_to(np.diag(2.0 * inv2), x.shape + (c.shape[0],)).copy()

    pad = r + 1.0 / kappa_hint
    return make_implicit_domain(phi, grad, hess, kappa_hint, s0_hint,
                                (c - pad, c + pad), kind="ellipse",
                                radii=r, center=c, **kw)


# ---------------------------------------------------------------------------
# nearest point projection
# ---------------------------------------------------------------------------


def _ball_footpoints(dom: Domain, X: np.ndarray):
    v = X - dom.center
    r = np.linalg.norm(v, axis=-1)
    ok = r > 1e-14 * dom.radius
    safe = np.where(ok, r, 1.0)
    xi = dom.center + dom.radius * v / safe[..., None]
    xi = np.where(ok[..., None], xi, np.nan)
    return xi, r - dom.radius, ok


def _lagrange_residual(dom, X, Y, lam):
    f = dom.phi(Y)
    G = dom.grad(Y)
    return np.concatenate([Y - X + lam[:, None] * G, f[:, None]], axis=1), f, G


def _newton_footpoints(dom: Domain, X: np.ndarray, start: np.ndarray | None = None):
    """Closest point on ``{phi = 0}`` for each row of ``X`` (shape ``(m, d)``).

    A one-dimensional Newton solve along the normal ray through the start
    brings the iterate onto the zero set; a damped Newton solve of the
    Lagrange system ``y - x + lam grad(y) = 0, phi(y) = 0`` then removes the
    tangential residual (quadratic convergence near the boundary).
    """
    m, d = X.shape
    Y0 = (X if start is None else start).astype(float, copy=True)
    ok = np.ones(m, dtype=bool)
    G0 = dom.grad(Y0)
    g0 = np.linalg.norm(G0, axis=-1)
    ok &= g0 > 1e-14
    n0 = G0 / np.where(ok, g0, 1.0)[:, None]
    t = np.zeros(m)
    for _ in range(MAX_NEWTON):
        Y = Y0 + t[:, None] * n0
        f = dom.phi(Y)
        df = np.sum(dom.grad(Y) * n0, axis=-1)
        ok &= np.abs(df) > 1e-14
        t = t - f / np.where(ok, df, 1.0)
        if np.all((np.abs(f) < 1e-13) | ~ok):
            break
    Y = Y0 + t[:, None] * n0
    G = dom.grad(Y)
    g2 = np.maximum(np.sum(G * G, axis=-1), 1e-300)
    lam = np.sum((X - Y) * G, axis=-1) / g2
    eye = np.eye(d)
    done = np.zeros(m, dtype=bool)
    polish = 0
    for _ in range(MAX_NEWTON + 2):
        F, f, G = _lagrange_residual(dom, X, Y, lam)
        H = dom.hess(Y)
        gn = np.linalg.norm(G, axis=-1)
        nh = G / np.where(gn > 0, gn, 1.0)[:, None]
        res = X - Y
        tan = res - np.sum(res * nh, axis=-1)[:, None] * nh
        done = (np.abs(f) < PHI_TOL) & (np.linalg.norm(tan, axis=-1) < TANGENT_TOL)
        ok &= np.isfinite(Y).all(axis=-1) & np.isfinite(lam)
        if np.all(done | ~ok):
            # two extra steps take the quadratic iteration to rounding level,
            # which finite differences of xi rely on
            if polish == 2:
                break
            polish += 1
        J = np.zeros((m, d + 1, d + 1))
        J[:, :d, :d] = eye + lam[:, None, None] * H
        J[:, :d, d] = G
        J[:, d, :d] = G
        singular = ~np.isfinite(J).all(axis=(1, 2)) | (np.abs(np.linalg.det(J)) < 1e-300)
        singular |= ~ok
        J[singular] = np.eye(d + 1)
        F[singular] = 0.0
        step = np.linalg.solve(J, -F[..., None])[..., 0]
        if not polish:
            step[done] = 0.0
        # backtracking on |F| keeps iterates from jumping across the evolute
        merit = np.linalg.norm(F, axis=-1)
        alpha = np.ones(m)
        accepted = done | singular
        for _ in range(12):
            Yc = Y + alpha[:, None] * step[:, :d]
            lc = lam + alpha * step[:, d]
            Fc, _, _ = _lagrange_residual(dom, X, Yc, lc)
            better = np.linalg.norm(Fc, axis=-1) <= merit * (1 - 1e-4 * alpha)
            accepted |= better
            if np.all(accepted):
                break
            alpha = np.where(accepted, alpha, 0.5 * alpha)
        if not polish:
            alpha = np.where(done, 1.0, alpha)
        Y = Y + alpha[:, None] * step[:, :d]
        lam = lam + alpha * step[:, d]
        ok &= ~singular | done
    ok &= done
    s = np.linalg.norm(X - Y, axis=-1) * np.sign(dom.phi(X))
    return Y, s, ok


def footpoints(dom: Domain, X, start=None):
    """Nearest boundary points without raising.

    Returns ``(xi, signed_distance, ok)`` where ``ok`` marks converged
    projections of points strictly inside the collar.  Signed distance is
    positive outside the domain.
    """
    X = np.asarray(X, dtype=float)
    shape = X.shape[:-1]
    flat = X.reshape(-1, dom.dim)
    if dom.kind == "ball":
        xi, s, ok = _ball_footpoints(dom, flat)
    else:
        st = None if start is None else np.asarray(start, float).reshape(-1, dom.dim)
        xi, s, ok = _newton_footpoints(dom, flat, st)
    ok &= np.abs(s) < dom.s0
    return xi.reshape(shape + (dom.dim,)), s.reshape(shape), ok.reshape(shape)


def boundary_normal(dom: Domain, b) -> np.ndarray:
    """Outward unit normal at boundary points."""
    G = dom.grad(np.asarray(b, dtype=float))
    return G / np.linalg.norm(G, axis=-1, keepdims=True)


def _projections(nh: np.ndarray):
    nu = nh[..., :, None] * nh[..., None, :]
    tau = np.eye(nh.shape[-1]) - nu
    return tau, nu


def project(dom: Domain, x) -> CollarPoint:
    """Project points of the collar onto the boundary.

    Raises :class:`CollarError` for points outside ``N_s0`` and at the centre
    of a ball, where the projection is undefined.
    """
    x = np.asarray(x, dtype=float)
    xi, s, ok = footpoints(dom, x)
    if not np.all(ok):
        bad = np.asarray(x).reshape(-1, dom.dim)[~ok.reshape(-1)][0]
        raise CollarError(f"point {bad} is outside the collar N_s0 (s0={dom.s0})")
    nh = boundary_normal(dom, xi)
    tau, nu = _projections(nh)
    return CollarPoint(x=x, xi=xi, dist=np.abs(s), xtilde=2.0 * xi - x,
                       tau=tau, nu=nu, normal=nh, signed=s)


def reflect_points(dom: Domain, X):
    """Reflections ``2 xi(x) - x`` for arbitrary points, with a collar mask.

    Points outside the collar get ``nan`` reflections and ``False`` in the mask.
    """
    X = np.asarray(X, dtype=float)
    xi, _, ok = footpoints(dom, X)
    xt = 2.0 * xi - X
    xt = np.where(ok[..., None], xt, np.nan)
    return xt, ok


def reflect_op(cp: CollarPoint, y) -> np.ndarray:
    """Apply ``i_x(y) = tau(xi(x)) y - nu(xi(x)) y``."""
    return np.einsum("...ij,...j->...i", cp.tau - cp.nu, np.asarray(y, dtype=float))


def in_reflected_ball(dom: Domain, a, rho: float, x, return_collar: bool = False):
    """Membership ``|x~ - a| < rho``; points outside the collar are never members."""
    xt, ok = reflect_points(dom, x)
    with np.errstate(invalid="ignore"):
        inside = ok & (np.linalg.norm(xt - np.asarray(a, float), axis=-1) < rho)
    if return_collar:
        return inside, ok
    return inside


# ---------------------------------------------------------------------------
# derivatives of the projection
# ---------------------------------------------------------------------------


def grad_xi_Q(dom: Domain, x, fd_step: float | None = None) -> np.ndarray:
    """``Q(x) = grad xi(x) - tau(xi(x))`` with ``grad xi[i, j] = d_i xi_j``.

    Closed form for balls, central differences of the projection otherwise.
    """
    x = np.asarray(x, dtype=float)
    cp = project(dom, x)
    if dom.kind == "ball":
        r = np.linalg.norm(x - dom.center, axis=-1)
        return (dom.radius / r - 1.0)[..., None, None] * cp.tau
    if fd_step is None:
        # derivatives of xi blow up at the reach; keep the stencil well inside it
        h = 1e-5 * np.minimum(dom.s0, 10.0 * (dom.s0 - cp.dist))
    else:
        h = np.broadcast_to(np.asarray(fd_step, dtype=float), cp.dist.shape)
    if not np.all(h > 0):
        raise ValueError("fd_step must be positive")
    jac = _fd_jacobian(dom, x, cp.xi, h)
    return np.swapaxes(jac, -1, -2) - cp.tau


def normal_field_gradient(dom: Domain, x, xi=None, s=None) -> np.ndarray:
    """Gradient ``d_i n_j`` of ``n(x) = nu_hat(xi(x))`` in the collar.

    Equals the Hessian of the signed distance, ``W (I + s W)^-1`` with the
    shape operator ``W = tau H tau / |grad phi|`` taken at the foot point.
    """
    x = np.asarray(x, dtype=float)
    if xi is None or s is None:
        xi, s, _ = footpoints(dom, x)
    G = dom.grad(xi)
    gn = np.linalg.norm(G, axis=-1)
    nh = G / gn[..., None]
    tau = np.eye(dom.dim) - nh[..., :, None] * nh[..., None, :]
    W = tau @ dom.hess(xi) @ tau / gn[..., None, None]
    A = np.eye(dom.dim) + np.asarray(s)[..., None, None] * W
    return W @ np.linalg.inv(A)


def _fd_jacobian(dom, x, guess, h):
    """``jac[..., i, j] = d xi_i / d x_j`` by central differences, step ``h`` per point."""
    cols = []
    for j in range(dom.dim):
        e = np.zeros(dom.dim)
        e[j] = 1.0
        step = h[..., None] * e
        yp, _, okp = footpoints(dom, x + step, start=guess)
        ym, _, okm = footpoints(dom, x - step, start=guess)
        if not (np.all(okp) and np.all(okm)):
            raise CollarError("finite-difference stencil leaves the collar")
        cols.append((yp - ym) / (2 * h[..., None]))
    return np.stack(cols, axis=-1)


def _reflection_matrix(dom: Domain, b):
    nh = boundary_normal(dom, b)
    return np.eye(dom.dim) - 2.0 * nh[..., :, None] * nh[..., None, :]


def reflection_gradient(dom: Domain, b, fd_step: float | None = None) -> np.ndarray:
    """Tangential gradient of ``tau - nu`` along the boundary at ``b``.

    Returns ``D[..., l, j, k] = d_l (tau - nu)_jk`` where the derivative is
    taken in the direction ``tau e_l``.  Balls use the closed form; other
    domains difference ``(tau - nu)(xi(b +- h e_l))``, which is tangential
    because ``grad xi = tau`` on the boundary.
    """
    b = np.asarray(b, dtype=float)
    d = dom.dim
    if dom.kind == "ball":
        nh = (b - dom.center) / dom.radius
        tau = np.eye(d) - nh[..., :, None] * nh[..., None, :]
        # d_l nh = tau e_l / R
        dn = tau / dom.radius
        return -2.0 * (dn[..., :, :, None] * nh[..., None, None, :]
                       + nh[..., None, :, None] * dn[..., :, None, :])
    h = dom.fd_step if fd_step is None else fd_step
    out = []
    for l in range(d):
        e = np.zeros(d)
        e[l] = h
        xp, _, okp = footpoints(dom, b + e, start=b)
        xm, _, okm = footpoints(dom, b - e, start=b)
        if not (np.all(okp) and np.all(okm)):
            raise CollarError("finite-difference stencil leaves the collar")
        out.append((_reflection_matrix(dom, xp) - _reflection_matrix(dom, xm)) / (2 * h))
    return np.stack(out, axis=-3)


def _tangent_basis(nh: np.ndarray) -> np.ndarray:
    """Orthonormal tangent basis (rows) for one unit normal."""
    u, _, _ = np.linalg.svd(np.eye(nh.shape[0]) - np.outer(nh, nh))
    return u[:, : nh.shape[0] - 1].T


def principal_curvatures(dom: Domain, b) -> np.ndarray:
    """Principal curvatures at boundary points from the Hessian of ``phi``.

    Shape ``(..., n)``; positive for convex boundaries.
    """
    b = np.atleast_2d(np.asarray(b, dtype=float))
    G = dom.grad(b)
    H = dom.hess(b)
    gn = np.linalg.norm(G, axis=-1)
    out = np.empty((b.shape[0], dom.n))
    for i in range(b.shape[0]):
        T = _tangent_basis(G[i] / gn[i])
        W = T @ H[i] @ T.T / gn[i]
        out[i] = np.linalg.eigvalsh(0.5 * (W + W.T))
    return out


def normal_gradient_norm(dom: Domain, b, fd_step: float | None = None) -> np.ndarray:
    """``sup_{e tangent, |e| = 1} ||d_e nu(b)||`` (operator norm), per point."""
    b = np.atleast_2d(np.asarray(b, dtype=float))
    Dnu = -0.5 * reflection_gradient(dom, b, fd_step)
    nh = boundary_normal(dom, b)
    out = np.empty(b.shape[0])
    for i in range(b.shape[0]):
        T = _tangent_basis(nh[i])
        dirs = np.einsum("tl,ljk->tjk", T, Dnu[i])

        def norm_at(angle, dirs=dirs):
            if dirs.shape[0] == 1:
                return np.linalg.norm(dirs[0], 2)
            m = math.cos(angle) * dirs[0] + math.sin(angle) * dirs[1]
            if dirs.shape[0] > 2:
                raise NotImplementedError("normal_gradient_norm supports n <= 2")
            return np.linalg.norm(m, 2)

        if dirs.shape[0] == 1:
            out[i] = norm_at(0.0)
            continue
        grid = np.linspace(0.0, math.pi, 73)
        vals = np.array([norm_at(t) for t in grid])
        k = int(np.argmax(vals))
        lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
        res = minimize_scalar(lambda t: -norm_at(t), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-10})
        out[i] = max(vals[k], -res.fun)
    return out


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def _unit_vectors(rng, m, d):
    v = rng.standard_normal((m, d))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def sample_boundary(dom: Domain, m: int, rng: np.random.Generator) -> np.ndarray:
    """``m`` boundary points (uniform for balls, projected box samples otherwise)."""
    if dom.kind == "ball":
        return dom.center + dom.radius * _unit_vectors(rng, m, dom.dim)
    if dom.kind == "ellipse":
        # radial scaling lands exactly on the quadric
        return dom.center + dom.radii * _unit_vectors(rng, m, dom.dim)
    lo, hi = dom.bounds
    out = []
    have = 0
    for _ in range(50):
        X = rng.uniform(lo, hi, size=(max(2 * (m - have), 16), dom.dim))
        xi, _, ok = _newton_footpoints(dom, X)
        good = xi[ok & (np.abs(dom.phi(xi)) < 1e-10)]
        out.append(good)
        have += len(good)
        if have >= m:
            break
    pts = np.concatenate(out)[:m] if out else np.empty((0, dom.dim))
    if len(pts) < m:
        raise DomainError("could not sample the boundary: projection does not converge")
    return pts


def sample_collar(dom: Domain, m: int, rng: np.random.Generator, *, side: str = "inside",
                  depth: tuple[float, float] = (0.0, 1.0)) -> np.ndarray:
    """Points whose distance to the boundary is uniform in ``depth * s0``.

    ``side`` is ``"inside"``, ``"outside"`` or ``"both"``.  The points are
    built as ``b -+ t nu(b)``, so their nearest boundary point is ``b``.
    """
    b = sample_boundary(dom, m, rng)
    nh = boundary_normal(dom, b)
    lo, hi = depth
    t = rng.uniform(lo * dom.s0, hi * dom.s0, size=m)
    if side == "inside":
        sgn = -np.ones(m)
    elif side == "outside":
        sgn = np.ones(m)
    elif side == "both":
        sgn = rng.choice([-1.0, 1.0], size=m)
    else:
        raise ValueError(f"unknown side {side!r}")
    return b + (sgn * t)[:, None] * nh


def sample_ball_points(rng: np.random.Generator, center, radius, m: int) -> np.ndarray:
    """Uniform samples of the open ball ``B_radius(center)``; radius may vary per row."""
    center = np.asarray(center, dtype=float)
    d = center.shape[-1]
    u = _unit_vectors(rng, m, d)
    r = np.asarray(radius, dtype=float) * rng.uniform(0.0, 1.0, size=m) ** (1.0 / d)
    return center + r[..., None] * u


def _validate_implicit(dom: Domain, m: int, rng: np.random.Generator) -> None:
    b = sample_boundary(dom, m, rng)
    kmax = np.abs(principal_curvatures(dom, b)).max()
    if kmax > dom.kappa * (1 + 1e-6):
        raise DomainError(f"principal curvature {kmax:.6g} exceeds kappa_hint {dom.kappa:.6g}")
    nh = boundary_normal(dom, b)
    t = rng.uniform(-1.0, 1.0, size=m) * dom.s0 * (1 - 1e-3)
    X = b + t[:, None] * nh
    xi, _, ok = footpoints(dom, X)
    margin = np.minimum(1e-2 * dom.s0, 0.1 * (dom.s0 - np.abs(t)))
    pert = X + margin[:, None] * _unit_vectors(rng, m, dom.dim)
    xi2, _, ok2 = footpoints(dom, X, start=pert)
    if not (np.all(ok) and np.all(ok2)):
        raise DomainError("projection failed to converge during the validation sweep")
    if np.abs(xi - b).max() > 1e-6 or np.abs(xi2 - xi).max() > 1e-6:
        raise DomainError("nearest boundary point is not unique inside the collar")


# ---------------------------------------------------------------------------
# sampled property checks of the collar geometry
# ---------------------------------------------------------------------------


def check_projection_derivative(dom: Domain, samples: int, rng: np.random.Generator,
                   fd_tol: float = 1e-5, max_depth: float | None = None) -> dict:
    """Sampled check of symmetry, ``Q nu = 0`` and ``||Q|| <= k d / (1 - k d)``.

    Also checks ``||grad_boundary nu|| <= kappa`` at boundary samples.  The
    closed-form ball path uses ``1e-9`` absolute plus ``1e-12`` relative slack; Newton
    domains allow ``fd_tol`` relative slack.  Symmetry and ``Q nu`` defects are
    measured relative to ``1 + ||Q||``.

    Sample depths are uniform in ``[0, max_depth * s0)``; the default is the
    full collar for balls and ``0.99`` for Newton domains, whose projection is
    ill-conditioned next to the reach.
    """
    if max_depth is None:
        max_depth = 1.0 if dom.closed_form else 0.99
    x = sample_collar(dom, samples, rng, side="both", depth=(0.0, max_depth))
    cp = project(dom, x)
    Q = grad_xi_Q(dom, x)
    d = cp.dist
    kd = dom.kappa * d
    bound = kd / (1.0 - kd)
    qnorm = np.linalg.norm(Q, ord=2, axis=(-2, -1))
    sym = np.abs(Q - np.swapaxes(Q, -1, -2)).max(axis=(-2, -1))
    qnu = np.abs(np.einsum("...ij,...jk->...ik", Q, cp.nu)).max(axis=(-2, -1))
    if dom.closed_form:
        atol, rtol, sym_tol = 1e-9, 1e-12, 1e-12
    else:
        atol, rtol, sym_tol = fd_tol, fd_tol, 1e-6
    scale = 1.0 + qnorm
    viol_bound = qnorm > bound * (1 + rtol) + atol
    viol_sym = sym > sym_tol * scale
    viol_qnu = qnu > sym_tol * scale
    inside = cp.signed < 0
    eq_slack = np.abs(qnorm - bound)[inside]
    eq_rel = eq_slack / np.maximum(1.0, bound[inside])

    b = sample_boundary(dom, min(samples, 1000), rng)
    ngn = normal_gradient_norm(dom, b)
    ng_tol = 1e-12 if dom.closed_form else fd_tol
    viol_ng = ngn > dom.kappa * (1 + ng_tol)
    return {
        "check": "projection_derivative",
        "domain": dom.describe(),
        "samples": int(samples),
        "max_depth_fraction": float(max_depth),
        "max_bound_slack": float(np.max(qnorm - bound)),
        "max_equality_gap_inside": float(eq_slack.max()) if eq_slack.size else 0.0,
        "max_relative_equality_gap_inside": float(eq_rel.max()) if eq_rel.size else 0.0,
        "max_asymmetry": float(sym.max()),
        "max_Q_nu": float(qnu.max()),
        "max_relative_asymmetry": float((sym / scale).max()),
        "max_relative_Q_nu": float((qnu / scale).max()),
        "boundary_samples": int(len(b)),
        "max_normal_gradient_norm": float(ngn.max()),
        "min_normal_gradient_norm": float(ngn.min()),
        "violations": {
            "norm_bound": int(viol_bound.sum()),
            "symmetry": int(viol_sym.sum()),
            "Q_nu": int(viol_qnu.sum()),
            "normal_gradient": int(viol_ng.sum()),
        },
        "tolerance": {"atol": atol, "rtol": rtol, "symmetry": sym_tol},
    }


def check_reflected_ball(dom: Domain, samples: int, rng: np.random.Generator) -> dict:
    """Sampled check that reflected balls stay within ``N_2rho`` and ``B_5rho(a)``.

    Centres ``a`` have ``dist(a) = delta`` uniform in ``[0, s0/2)`` and radii
    ``rho`` uniform in ``[delta, s0 - delta)``, which guarantees
    ``B_rho(a) in N_s0``.  Each ``x`` is the reflection of a uniform sample of
    ``B_rho(a)``, so every point of the reflected ball can be drawn.
    """
    delta = rng.uniform(0.0, 0.5, size=samples) * dom.s0
    b = sample_boundary(dom, samples, rng)
    nh = boundary_normal(dom, b)
    sgn = rng.choice([-1.0, 1.0], size=samples)
    a = b + (sgn * delta)[:, None] * nh
    rho = delta + rng.uniform(0.0, 1.0, size=samples) * (dom.s0 - 2 * delta)
    rho = np.maximum(rho, 1e-12)
    y = sample_ball_points(rng, a, rho, samples)
    x, ok = reflect_points(dom, y)
    _, sx, okx = footpoints(dom, x)
    ok &= okx
    # the reflection is an involution, so x~ = y
    xt, _ = reflect_points(dom, x)
    involution_err = np.nanmax(np.abs(xt - y)[ok]) if ok.any() else 0.0
    dist_x = np.abs(sx)
    v_dist = ok & (dist_x > 2 * rho * (1 + 1e-12))
    v_ball = ok & (np.linalg.norm(x - a, axis=-1) >= 5 * rho)
    return {
        "check": "reflected_ball",
        "domain": dom.describe(),
        "samples": int(samples),
        "evaluated": int(ok.sum()),
        "max_dist_over_rho": float(np.max(dist_x[ok] / rho[ok])) if ok.any() else 0.0,
        "max_offset_over_rho": float(np.max(np.linalg.norm(x - a, axis=-1)[ok] / rho[ok]))
        if ok.any() else 0.0,
        "max_involution_error": float(involution_err),
        "violations": {"dist_2rho": int(v_dist.sum()), "ball_5rho": int(v_ball.sum())},
    }
