"""Boundary monotonicity quantity and its diagnostics.

For a centre ``a`` near the wall the quantity

    (I(rho) / (omega_n rho^n))^(1/p) (1 + C kappa rho (1 + 1/(p - n)))
        + Gamma rho^(1 - n/p) / (p - n),

    I(rho) = ||V||(B_rho(a)) + ||V||(B~_rho(a)) + 2 sigma H^n(B+ cap B_rho(a)),

is non-decreasing on ``(0, s0/6)``.  This module evaluates it on a grid,
fits the smallest constant ``C`` that makes a family of profiles monotone,
extrapolates densities and evaluates the error terms of the standard proof.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .contact import cutoff, proof_test_field
from .geom import (
    Domain,
    CollarError,
    boundary_normal,
    footpoints,
    grad_xi_Q,
    reflect_points,
    reflection_gradient,
)
from .varifold import (
    BoundaryPatch,
    DiscreteVarifold,
    mass_in_ball,
    mass_in_reflected_ball,
    omega,
    patch_measure_in_ball,
)

C_MAX = 1.0e3


@dataclass(frozen=True)
class MonotoneParams:
    p: float
    n: int
    kappa: float
    s0: float
    Gamma: float = 0.0
    C: float = 0.0
    sigma: float = 0.0

    def __post_init__(self):
        if not self.p > self.n:
            raise ValueError(f"p must exceed n = {self.n}, got {self.p}")
        if self.Gamma < 0 or self.C < 0:
            raise ValueError("Gamma and C must be non-negative")

    def with_C(self, C: float) -> "MonotoneParams":
        return MonotoneParams(self.p, self.n, self.kappa, self.s0, self.Gamma, C, self.sigma)


@dataclass(frozen=True, eq=False)
class DensityProfile:
    a: np.ndarray
    rho_grid: np.ndarray
    I_values: np.ndarray
    raw_ratio: np.ndarray
    n: int
    parts: dict = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        r = np.asarray(self.rho_grid, float)
        if r.ndim != 1 or np.any(np.diff(r) <= 0):
            raise ValueError("rho grid must be strictly increasing")


def rho_grid(s0: float, m: int = 64, lo_frac: float = 1.0 / 600) -> np.ndarray:
    """``m`` log-spaced radii in ``[lo_frac s0, s0/6)``."""
    return np.geomspace(lo_frac * s0, s0 / 6.0, m, endpoint=False)


def collar_depth(dom: Domain, a) -> float:
    """Distance of ``a`` to the wall; raises unless ``a`` lies in the closed domain
    within ``s0/6`` of the wall."""
    a = np.asarray(a, float)
    _, s, ok = footpoints(dom, a[None])
    tol = 1e-10 * max(1.0, dom.s0)
    if not ok[0] or s[0] > tol or -s[0] >= dom.s0 / 6:
        raise ValueError(f"centre {a.tolist()} is outside the closed collar N_(s0/6)")
    return max(0.0, -float(s[0]))


def compute_gamma(V: DiscreteVarifold, dom: Domain, p: float) -> float:
    """``((1/omega_n) sum_{atoms in collar} 2 w |h|^p)^(1/p)``."""
    if V.curvature is None:
        raise ValueError("varifold carries no mean curvature samples")
    if not p > V.n:
        raise ValueError(f"p must exceed n = {V.n}")
    if len(V) == 0:
        return 0.0
    _, s, ok = footpoints(dom, V.points)
    inside = ok & (s <= 0)
    hp = np.linalg.norm(V.curvature[inside], axis=1) ** p
    return float((np.sum(2.0 * V.weights[inside] * hp) / omega(V.n)) ** (1.0 / p))


def profile_I(V: DiscreteVarifold, dom: Domain, Bplus: BoundaryPatch, sigma: float, a,
              grid, method: str = "auto", label: str = "") -> DensityProfile:
    """``I(rho)`` and ``I/(omega_n rho^n)`` on a grid."""
    a = np.asarray(a, float)
    collar_depth(dom, a)
    grid = np.asarray(grid, float)
    if np.any(grid <= 0) or np.any(grid >= dom.s0 / 6 * (1 + 1e-12)):
        raise ValueError("rho grid must lie in (0, s0/6)")
    if sigma < 0:
        raise ValueError("sigma must be non-negative here; apply the mirror rule first")
    ball = np.array([mass_in_ball(V, a, r, method) for r in grid])
    refl = np.array([mass_in_reflected_ball(V, dom, a, r, method) for r in grid])
    if sigma != 0 and len(Bplus.weights):
        patch = np.array([patch_measure_in_ball(Bplus, a, r, method) for r in grid])
    else:
        patch = np.zeros_like(grid)
    I = ball + refl + 2.0 * sigma * patch
    raw = I / (omega(V.n) * grid**V.n)
    return DensityProfile(a, grid, I, raw, V.n,
                          {"ball": ball, "reflected": refl, "patch": patch}, label)


def corrected_quantity(profile: DensityProfile, params: MonotoneParams) -> np.ndarray:
    p, n = params.p, params.n
    rho = profile.rho_grid
    base = np.maximum(profile.raw_ratio, 0.0) ** (1.0 / p)
    return (base * (1.0 + params.C * params.kappa * rho * (1.0 + 1.0 / (p - n)))
            + params.Gamma * rho ** (1.0 - n / p) / (p - n))


def check_monotone(values, tol: float = 1e-6) -> list[int]:
    """Indices ``i`` with ``values[i+1] < values[i] - tol``."""
    v = np.asarray(values, float)
    return [int(i) for i in np.nonzero(v[1:] < v[:-1] - tol)[0]]


@dataclass(frozen=True)
class ConstantFit:
    C: float
    ok: bool
    binding: str
    binding_index: int
    iterations: int
    violations_at_zero: int

    def to_dict(self) -> dict:
        return asdict(self)


def find_constant(profiles: Sequence[DensityProfile], params: Sequence[MonotoneParams] |
                  MonotoneParams, tol: float = 1e-6, C_max: float = C_MAX,
                  rel_tol: float = 1e-9) -> ConstantFit:
    """Smallest ``C`` (to ``rel_tol``) making every corrected profile pass
    :func:`check_monotone`.

    Each difference of the corrected quantity is affine in ``C`` with a
    positive slope (``I`` is non-decreasing and ``n/p < 1``), so the set of
    admissible ``C`` is a half-line and bisection applies.
    """
    if isinstance(params, MonotoneParams):
        params = [params] * len(profiles)
    if len(params) != len(profiles):
        raise ValueError("need one parameter set per profile")

    def failing(C):
        for k, (pr, pa) in enumerate(zip(profiles, params)):
            if check_monotone(corrected_quantity(pr, pa.with_C(C)), tol):
                return k
        return None

    n_zero = sum(bool(check_monotone(corrected_quantity(pr, pa.with_C(0.0)), tol))
                 for pr, pa in zip(profiles, params))
    if failing(0.0) is None:
        return ConstantFit(0.0, True, "", -1, 0, 0)
    if failing(C_max) is not None:
        k = failing(C_max)
        return ConstantFit(math.inf, False, profiles[k].label, k, 0, n_zero)
    lo, hi = 0.0, C_max
    it = 0
    bind = failing(lo)
    while hi - lo > rel_tol * max(hi, 1e-12) and it < 200:
        mid = 0.5 * (lo + hi)
        k = failing(mid)
        if k is None:
            hi = mid
        else:
            lo, bind = mid, k
        it += 1
    return ConstantFit(hi, True, profiles[bind].label, bind, it, n_zero)


@dataclass(frozen=True)
class DensityEstimate:
    estimate: float
    uncertainty: float
    slope: float
    fit_residual: float
    points: int
    converged: bool

    def to_dict(self) -> dict:
        return asdict(self)


def density_limit(profile: DensityProfile, points: int = 8,
                  resid_tol: float = 1e-3) -> DensityEstimate:
    """Affine-in-``rho`` extrapolation of the raw ratio to ``rho -> 0``.

    Uses the ``points`` smallest radii.  The uncertainty combines the RMS fit
    residual with the standard error of the intercept; ``converged`` is
    false when the residual exceeds ``resid_tol``.
    """
    if points < 4 or len(profile.rho_grid) < 4:
        raise ValueError("density extrapolation needs at least 4 radii")
    k = min(points, len(profile.rho_grid))
    r = profile.rho_grid[:k]
    y = profile.raw_ratio[:k]
    A = np.stack([np.ones(k), r], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    rms = float(np.sqrt(np.mean(res**2)))
    dof = max(k - 2, 1)
    cov = np.linalg.inv(A.T @ A) * float(res @ res) / dof
    se = float(math.sqrt(max(cov[0, 0], 0.0)))
    return DensityEstimate(float(coef[0]), rms + se, float(coef[1]), rms, k,
                           bool(rms <= resid_tol))


# ---------------------------------------------------------------------------
# error terms of the proof
# ---------------------------------------------------------------------------


def epsilon_terms(dom: Domain, a, x, S):
    """``(eps1, eps2, eps3)`` at collar points ``x`` (batched) with planes ``S``.

    ``eps1 = 2 S.Q + sum S_ij (Q + tau)_il D_ljk (x~ - a)_k``,
    ``eps2 = -2 (Q u).(S i_x u)`` with ``u = (x~ - a)/r~``, and
    ``eps3 = sum tau_lj D_ljk (b - a)_k`` at the foot point ``b = xi(x)``,
    where ``D`` is the tangential gradient of ``tau - nu``.
    """
    x = np.atleast_2d(np.asarray(x, float))
    S = np.asarray(S, float).reshape(x.shape + (x.shape[1],))
    a = np.broadcast_to(np.asarray(a, float), x.shape)
    return _epsilon_terms_per_centre(dom, a, x, S)


def random_planes(rng: np.random.Generator, m: int, d: int, n: int) -> np.ndarray:
    """Projections onto ``m`` uniformly random ``n``-planes of ``R^d``."""
    A = rng.standard_normal((m, d, n))
    Qm, _ = np.linalg.qr(A)
    return Qm @ np.swapaxes(Qm, 1, 2)


def sample_epsilon_triples(dom: Domain, m: int, rng: np.random.Generator, n: int | None = None):
    """Configurations in the range where the pointwise bounds are claimed.

    ``a`` lies in the closed domain within ``s0/6`` of the wall,
    ``dist(a) <= rho <= s0/6`` and ``x`` is the reflection of a point
    ``y in B_rho(a)`` outside the domain, so ``x~ = y``.
    """
    from .contact import random_collar_centers
    from .geom import sample_ball_points

    n = dom.dim - 1 if n is None else n
    A, R, X = [], [], []
    need = m
    while need > 0:
        k = max(2 * need, 64)
        a = random_collar_centers(dom, k, rng)
        _, s, _ = footpoints(dom, a)
        da = np.maximum(-s, 0.0)
        rho = da + (dom.s0 / 6 - da) * rng.random(k)
        dirs = sample_ball_points(rng, np.zeros(dom.dim), 1.0, k)
        y = a + rho[:, None] * dirs
        xi, sy, ok = footpoints(dom, y)
        keep = ok & (sy > 0) & (np.linalg.norm(y - a, axis=1) > 1e-9 * dom.s0)
        x = 2.0 * xi - y
        _, sx, okx = footpoints(dom, x)
        keep &= okx
        A.append(a[keep][:need])
        R.append(rho[keep][:need])
        X.append(x[keep][:need])
        need -= int(min(keep.sum(), need))
    a, rho, x = (np.concatenate(v) for v in (A, R, X))
    S = random_planes(rng, len(x), dom.dim, n)
    return a, rho, x, S


@dataclass(frozen=True)
class EpsilonLedger:
    samples: int
    C_hat: float
    C_terms: tuple[float, float, float]
    finite: bool

    def to_dict(self) -> dict:
        return asdict(self)


def _epsilon_ratios(dom, a, rho, x, S, chunk=2000) -> np.ndarray:
    out = []
    for lo in range(0, len(rho), chunk):
        sl = slice(lo, lo + chunk)
        e = _epsilon_terms_per_centre(dom, a[sl], x[sl], S[sl])
        out.append(np.abs(np.stack(e)) / (dom.kappa * rho[sl]))
    return np.concatenate(out, axis=1)


def _ledger(ratios) -> EpsilonLedger:
    best = ratios.max(axis=1)
    return EpsilonLedger(ratios.shape[1], float(best.max()), tuple(float(b) for b in best),
                         bool(np.all(np.isfinite(best))))


def epsilon_ledger(dom: Domain, samples: int, rng: np.random.Generator,
                   n: int | None = None) -> EpsilonLedger:
    """Empirical ``max |eps_i| / (kappa rho)`` over random admissible configurations."""
    return _ledger(_epsilon_ratios(dom, *sample_epsilon_triples(dom, samples, rng, n)))


def epsilon_stability(dom: Domain, samples: int, rng: np.random.Generator,
                      n: int | None = None) -> tuple[EpsilonLedger, EpsilonLedger]:
    """Ledgers of the first ``samples`` and of all ``2 samples`` draws of one stream."""
    r = _epsilon_ratios(dom, *sample_epsilon_triples(dom, 2 * samples, rng, n))
    return _ledger(r[:, :samples]), _ledger(r)


def _epsilon_terms_per_centre(dom, a, x, S):
    """:func:`epsilon_terms` with one centre per point."""
    d = dom.dim
    xi, _, ok = footpoints(dom, x)
    if not np.all(ok):
        raise CollarError("epsilon terms need points inside the collar")
    nh = boundary_normal(dom, xi)
    nu = nh[:, :, None] * nh[:, None, :]
    tau = np.eye(d) - nu
    Q = grad_xi_Q(dom, x)
    D = reflection_gradient(dom, xi)
    y = 2.0 * xi - x - a
    rt = np.linalg.norm(y, axis=1)
    if np.any(rt <= 1e-14):
        raise ValueError("reflected point coincides with the centre")
    e1 = 2.0 * np.einsum("mij,mij->m", S, Q) + np.einsum("mij,mil,mljk,mk->m", S, Q + tau, D, y)
    u = y / rt[:, None]
    iu = np.einsum("mjk,mk->mj", tau - nu, u)
    e2 = -2.0 * np.einsum("mi,mi->m", np.einsum("mij,mj->mi", Q, u),
                          np.einsum("mij,mj->mi", S, iu))
    e3 = np.einsum("mlj,mljk,mk->m", tau, D, xi - a)
    return e1, e2, e3


@dataclass(frozen=True)
class ProofDiagnostics:
    """Smooth-cutoff error integrals at one radius and the inequality ledger."""

    rho: float
    I: float
    J_reflected: float
    E1: float
    E2: float
    E2_prime: float
    E3: float
    H: float
    C_hat: float
    bounds: dict
    violations: list

    def to_dict(self) -> dict:
        return asdict(self)


def _smooth_integrals(V, dom, Bplus, sigma, a, rho, atoms, patch_eps3, xi_ok):
    x, rt, ok, e1, e2 = atoms
    r = np.linalg.norm(V.points - a, axis=1)
    phr = cutoff(r / rho)
    phrt = np.where(ok, cutoff(np.where(ok, rt, np.inf) / rho), 0.0)
    J = float(np.sum(V.weights * phrt))
    I = float(np.sum(V.weights * (phr + phrt)))
    E1 = float(np.sum(V.weights * phrt * e1))
    E2 = float(np.sum(V.weights * phrt * e2))
    E3 = 0.0
    if len(Bplus.weights):
        rb = np.linalg.norm(Bplus.nodes - a, axis=1)
        phb = cutoff(rb / rho)
        I += 2.0 * sigma * float(np.sum(Bplus.weights * phb))
        if sigma != 0:
            E3 = sigma * float(np.sum(Bplus.weights * phb * patch_eps3))
    return I, J, E1, E2, E3


def proof_E_terms(V: DiscreteVarifold, dom: Domain, Bplus: BoundaryPatch, sigma: float, a,
                  rho: float, C_hat: float, p: float | None = None,
                  Gamma: float | None = None, drho: float | None = None,
                  slack: float = 1e-12) -> ProofDiagnostics:
    """Error integrals ``E1, E2, E2', E3, H`` with the smooth cutoff ``phi``.

    ``E2'`` is a central difference with step ``drho``.  The ledger checks
    ``|E1| <= C kappa rho J``, ``|E3| <= C kappa rho I``,
    ``|E2'| <= C kappa rho J'`` (``J`` the reflected-ball part of ``I``) and,
    when ``p`` and ``Gamma`` are given, ``|H| <= rho omega_n^(1/p) Gamma I^(1-1/p)``.
    """
    a = np.asarray(a, float)
    collar_depth(dom, a)
    if drho is None:
        drho = 1e-3 * rho
    d = dom.dim
    xt, ok = reflect_points(dom, V.points)
    rt = np.where(ok, np.linalg.norm(np.nan_to_num(xt) - a, axis=1), np.inf)
    live = ok & (rt < (rho + drho)) & (rt > 0)
    e1 = np.zeros(len(V))
    e2 = np.zeros(len(V))
    if np.any(live):
        S = V.planes[live]
        ee = _epsilon_terms_per_centre(dom, np.broadcast_to(a, (int(live.sum()), d)),
                                       V.points[live], S)
        e1[live], e2[live] = ee[0], ee[1]
    eps3 = np.zeros(len(Bplus.weights))
    if len(Bplus.weights) and sigma != 0:
        near = np.linalg.norm(Bplus.nodes - a, axis=1) < rho + drho
        if np.any(near):
            b = Bplus.nodes[near]
            nh = boundary_normal(dom, b)
            tau = np.eye(d) - nh[:, :, None] * nh[:, None, :]
            D = reflection_gradient(dom, b)
            eps3[near] = np.einsum("mlj,mljk,mk->m", tau, D, b - a)
    atoms = (V.points, rt, ok, e1, e2)
    I, J, E1, E2, E3 = _smooth_integrals(V, dom, Bplus, sigma, a, rho, atoms, eps3, ok)
    _, Jp, _, E2p, _ = _smooth_integrals(V, dom, Bplus, sigma, a, rho + drho, atoms, eps3, ok)
    _, Jm, _, E2m, _ = _smooth_integrals(V, dom, Bplus, sigma, a, rho - drho, atoms, eps3, ok)
    E2_prime = (E2p - E2m) / (2 * drho)
    J_prime = (Jp - Jm) / (2 * drho)
    H = 0.0
    if V.curvature is not None and len(V):
        g = proof_test_field(dom, a, rho, check_range=False)
        H = float(np.sum(V.weights * np.einsum("mi,mi->m", g.value(V.points), V.curvature)))
    kr = C_hat * dom.kappa * rho
    bounds = {"E1": kr * J, "E3": kr * I, "E2_prime": kr * J_prime}
    values = {"E1": abs(E1), "E3": abs(E3), "E2_prime": abs(E2_prime)}
    if p is not None and Gamma is not None:
        bounds["H"] = rho * omega(V.n) ** (1.0 / p) * Gamma * max(I, 0.0) ** (1.0 - 1.0 / p)
        values["H"] = abs(H)
    viol = [k for k in bounds if values[k] > bounds[k] * (1 + 1e-9) + slack]
    return ProofDiagnostics(rho, I, J, E1, E2, E2_prime, E3, H, C_hat,
                            {k: {"value": values[k], "bound": bounds[k]} for k in bounds},
                            viol)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def write_profile_csv(path, profile: DensityProfile, corrected) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rho", "I", "raw_ratio", "corrected"])
        for r, I, q, c in zip(profile.rho_grid, profile.I_values, profile.raw_ratio, corrected):
            w.writerow([f"{r:.17g}", f"{I:.17g}", f"{q:.17g}", f"{c:.17g}"])


def read_profile_csv(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in ("rho", "I", "raw_ratio",
                                                               "corrected")}


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not serialisable: {type(o)}")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def profile_svg(profile: DensityProfile, corrected, title: str = "",
                width: int = 640, height: int = 400) -> str:
    """Raw and corrected curves against ``log10 rho`` as a standalone SVG."""
    x = np.log10(profile.rho_grid)
    ys = [np.asarray(profile.raw_ratio, float), np.asarray(corrected, float)]
    ml, mr, mt, mb = 60, 20, 30, 45
    lo = min(float(y.min()) for y in ys)
    hi = max(float(y.max()) for y in ys)
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad
    x0, x1 = float(x.min()), float(x.max())
    if x1 - x0 < 1e-12:
        x0, x1 = x0 - 1, x1 + 1

    def px(v):
        return ml + (v - x0) / (x1 - x0) * (width - ml - mr)

    def py(v):
        return height - mb - (v - lo) / (hi - lo) * (height - mt - mb)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13" '
           f'font-family="sans-serif">{_esc(title)}</text>',
           f'<line x1="{ml}" y1="{height - mb}" x2="{width - mr}" y2="{height - mb}" '
           'stroke="black"/>',
           f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{height - mb}" stroke="black"/>']
    for e in range(math.ceil(x0), math.floor(x1) + 1):
        out.append(f'<line x1="{px(e):.2f}" y1="{height - mb}" x2="{px(e):.2f}" '
                   f'y2="{height - mb + 5}" stroke="black"/>')
        out.append(f'<text x="{px(e):.2f}" y="{height - mb + 18}" text-anchor="middle" '
                   f'font-size="11" font-family="sans-serif">1e{e}</text>')
    for v in np.linspace(lo, hi, 5):
        out.append(f'<text x="{ml - 6}" y="{py(v) + 4:.2f}" text-anchor="end" font-size="11" '
                   f'font-family="sans-serif">{v:.4g}</text>')
    out.append(f'<text x="{width / 2:.1f}" y="{height - 8}" text-anchor="middle" '
               'font-size="12" font-family="sans-serif">rho (log scale)</text>')
    for y, colour, name, k in ((ys[0], "#1f77b4", "raw ratio", 0),
                               (ys[1], "#d62728", "corrected", 1)):
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" '
                   f'points="{pts}"/>')
        out.append(f'<text x="{width - mr - 90}" y="{mt + 14 + 16 * k}" font-size="11" '
                   f'font-family="sans-serif" fill="{colour}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
