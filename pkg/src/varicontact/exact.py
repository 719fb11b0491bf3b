"""Exact-geometry measures of simple sets intersected with balls.

These descriptors back the analytic fixtures.  Each one can report the
measure of its set inside an open ball ``B_rho(a)`` and, for surfaces inside
a ball domain, inside the reflected ball ``{x : |x~ - a| < rho}``.

* :class:`Segment` -- straight segment (1-dimensional measure).
* :class:`RevolutionSurface` -- surface of revolution about the vertical axis
  (2-dimensional measure), e.g. spherical caps and flat disks.
* :class:`ArcSet` -- finite union of arcs of a circle (patches on a disk
  boundary).
* :class:`SphereBands` -- finite union of latitude bands of a sphere (patches
  on a ball boundary).

The measures are exact up to root finding and, for surfaces of revolution,
a one-dimensional Gauss rule applied between the parameter values where the
ball starts or stops cutting a ring.  A cosine substitution on every
sub-interval absorbs the square-root behaviour at those break points so the
rule converges spectrally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .geom import Domain, reflect_points

TWO_PI = 2.0 * math.pi
_GAUSS_ORDER = 64
_gl_nodes, _gl_weights = np.polynomial.legendre.leggauss(_GAUSS_ORDER)


def _cos_gauss(a: float, b: float, n: int | None = None):
    """Nodes and weights on ``[a, b]`` after ``u = a + (b - a)(1 - cos(pi s))/2``."""
    if n is None or n == _GAUSS_ORDER:
        x, w = _gl_nodes, _gl_weights
    else:
        x, w = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (x + 1.0)
    u = a + (b - a) * 0.5 * (1.0 - np.cos(math.pi * s))
    du = (b - a) * 0.25 * math.pi * np.sin(math.pi * s)
    return u, w * du


def _sign_change_roots(fn: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
                       samples: int = 1025) -> list[float]:
    """All sign changes of a vectorised ``fn`` on ``[lo, hi]`` located with brentq."""
    if hi <= lo:
        return []
    t = np.linspace(lo, hi, samples)
    v = fn(t)
    roots = []
    sgn = np.sign(v)
    for i in np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]:
        f1 = lambda s: float(fn(np.array([s]))[0])
        roots.append(brentq(f1, t[i], t[i + 1], xtol=1e-15, rtol=1e-15, maxiter=200))
    roots.extend(float(t[i]) for i in np.nonzero(sgn == 0)[0])
    return sorted(roots)


def _interval_overlap(a0, a1, b0, b1) -> float:
    return max(0.0, min(a1, b1) - max(a0, b0))


# ---------------------------------------------------------------------------
# segments
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Segment:
    """Straight segment from ``p0`` to ``p1``."""

    p0: np.ndarray
    p1: np.ndarray

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.p1 - self.p0))

    def total(self) -> float:
        return self.length

    def _unit(self):
        return (self.p1 - self.p0) / self.length

    def mass_in_ball(self, a, rho: float) -> float:
        a = np.asarray(a, dtype=float)
        u = self._unit()
        w = self.p0 - a
        b = float(u @ w)
        perp = w - b * u
        # rho^2 - |w_perp|^2 avoids the cancellation in b^2 - (|w|^2 - rho^2)
        disc = rho * rho - float(perp @ perp)
        if disc <= 0:
            return 0.0
        r = math.sqrt(disc)
        return _interval_overlap(-b - r, -b + r, 0.0, self.length)

    def mass_in_reflected_ball(self, dom: Domain, a, rho: float) -> float:
        a = np.asarray(a, dtype=float)
        u = self._unit()
        L = self.length

        def f(t):
            pts = self.p0 + np.asarray(t)[:, None] * u
            xt, ok = reflect_points(dom, pts)
            with np.errstate(invalid="ignore"):
                val = np.sum((xt - a) ** 2, axis=-1) - rho * rho
            return np.where(ok, val, 1.0)

        roots = _sign_change_roots(f, 0.0, L, samples=4097)
        knots = [0.0] + roots + [L]
        total = 0.0
        for lo, hi in zip(knots[:-1], knots[1:]):
            if hi > lo and f(np.array([0.5 * (lo + hi)]))[0] < 0:
                total += hi - lo
        return total

    def reflected(self, axis: int = -1) -> "Segment":
        return Segment(_flip(self.p0, axis), _flip(self.p1, axis))


def _flip(p, axis=-1):
    q = np.array(p, dtype=float, copy=True)
    q[..., axis] = -q[..., axis]
    return q


# ---------------------------------------------------------------------------
# surfaces of revolution
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RevolutionSurface:
    """Surface ``origin + (R(u) cos t, R(u) sin t, Z(u))`` for ``u`` in ``intervals``.

    ``speed(u) = |(R'(u), Z'(u))|`` so the area element is ``R speed du dt``.
    """

    radial: Callable[[np.ndarray], np.ndarray]
    height: Callable[[np.ndarray], np.ndarray]
    speed: Callable[[np.ndarray], np.ndarray]
    intervals: tuple[tuple[float, float], ...]
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def total(self) -> float:
        out = 0.0
        for lo, hi in self.intervals:
            for a, b in _split(lo, hi, 8):
                u, w = _cos_gauss(a, b)
                out += TWO_PI * float(np.sum(w * self.radial(u) * self.speed(u)))
        return out

    def _rings(self, u, dom: Domain | None):
        """Ring radius and height relative to ``origin``; reflected if ``dom`` given."""
        R = self.radial(u)
        Z = self.height(u)
        if dom is None:
            return R, Z, np.ones_like(R, dtype=bool)
        if dom.kind != "ball" or dom.dim != 3:
            raise ValueError("reflected revolution measures need a ball domain in R^3")
        off = self.origin - dom.center
        if abs(off[0]) > 1e-14 or abs(off[1]) > 1e-14:
            raise ValueError("the ball centre must lie on the axis of revolution")
        Zc = Z + off[2]
        r = np.hypot(R, Zc)
        ok = (r > 1e-14) & (np.abs(r - dom.radius) < dom.s0)
        lam = np.where(ok, (2.0 * dom.radius - r) / np.where(ok, r, 1.0), 0.0)
        # reflected ring, expressed back relative to origin
        return lam * R, lam * Zc - off[2], ok

    def _ring_measure(self, u, a_perp, a_z, rho, dom):
        Rr, Zr, ok = self._rings(u, dom)
        dz2 = (Zr - a_z) ** 2
        dmin = (Rr - a_perp) ** 2 + dz2
        dmax = (Rr + a_perp) ** 2 + dz2
        denom = 2.0 * Rr * a_perp
        with np.errstate(divide="ignore", invalid="ignore"):
            k = (Rr * Rr + a_perp * a_perp + dz2 - rho * rho) / denom
        part = 2.0 * np.arccos(np.clip(np.nan_to_num(k, nan=1.0), -1.0, 1.0))
        meas = np.where(dmax < rho * rho, TWO_PI, np.where(dmin >= rho * rho, 0.0, part))
        return np.where(ok, meas, 0.0), dmin, dmax, ok

    def _measure(self, a, rho, dom):
        a = np.asarray(a, dtype=float) - self.origin
        a_perp = float(math.hypot(a[0], a[1]))
        a_z = float(a[2])
        r2 = rho * rho
        total = 0.0
        for lo, hi in self.intervals:
            fns = (
                lambda u: self._ring_measure(u, a_perp, a_z, rho, dom)[1] - r2,
                lambda u: self._ring_measure(u, a_perp, a_z, rho, dom)[2] - r2,
            )
            knots = {lo, hi}
            for fn in fns:
                knots.update(_sign_change_roots(fn, lo, hi))
            if dom is not None:
                # rings leaving the collar switch the integrand off
                knots.update(_sign_change_roots(
                    lambda u: self._rings(u, dom)[2].astype(float) - 0.5, lo, hi))
            knots = sorted(knots)
            for p, q in zip(knots[:-1], knots[1:]):
                if q - p <= 0:
                    continue
                u, w = _cos_gauss(p, q)
                m, _, _, _ = self._ring_measure(u, a_perp, a_z, rho, dom)
                if not np.any(m):
                    continue
                total += float(np.sum(w * m * self.radial(u) * self.speed(u)))
        return total

    def mass_in_ball(self, a, rho: float) -> float:
        return self._measure(a, rho, None)

    def mass_in_reflected_ball(self, dom: Domain, a, rho: float) -> float:
        return self._measure(a, rho, dom)

    def reflected(self, axis: int = -1) -> "RevolutionSurface":
        if axis not in (-1, 2):
            raise ValueError("revolution surfaces reflect across the plane z = const only")
        height = self.height
        return RevolutionSurface(self.radial, lambda u: -height(u), self.speed,
                                 self.intervals, _flip(self.origin))

    def points(self, u, t):
        """Surface points for parameter arrays ``u``, ``t`` (broadcast)."""
        R = self.radial(u)
        return self.origin + np.stack([R * np.cos(t), R * np.sin(t), self.height(u)
                                       + 0.0 * t], axis=-1)


def _split(lo, hi, k):
    e = np.linspace(lo, hi, k + 1)
    return list(zip(e[:-1], e[1:]))


def spherical_cap(center_z: float, radius: float, psi_max: float,
                  origin=None) -> RevolutionSurface:
    """Cap of the sphere ``|x - (0, 0, center_z)| = radius`` with polar angle below ``psi_max``."""
    r = float(radius)
    return RevolutionSurface(
        radial=lambda u: r * np.sin(u),
        height=lambda u: center_z + r * np.cos(u),
        speed=lambda u: np.full_like(np.asarray(u, dtype=float), r),
        intervals=((0.0, float(psi_max)),),
        origin=np.zeros(3) if origin is None else np.asarray(origin, float),
    )


def flat_disk(radius: float, height: float = 0.0, origin=None) -> RevolutionSurface:
    """Horizontal disk of the given radius at ``z = height``."""
    return RevolutionSurface(
        radial=lambda u: np.asarray(u, dtype=float),
        height=lambda u: np.full_like(np.asarray(u, dtype=float), height),
        speed=lambda u: np.ones_like(np.asarray(u, dtype=float)),
        intervals=((0.0, float(radius)),),
        origin=np.zeros(3) if origin is None else np.asarray(origin, float),
    )


# ---------------------------------------------------------------------------
# boundary patches
# ---------------------------------------------------------------------------


def _merge(intervals, lo_bound, hi_bound):
    ivs = sorted((max(a, lo_bound), min(b, hi_bound)) for a, b in intervals)
    out = []
    for a, b in ivs:
        if b <= a:
            continue
        if out and a <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return tuple(out)


@dataclass(frozen=True, eq=False)
class ArcSet:
    """Union of arcs ``center + radius (cos t, sin t)`` for ``t`` in ``intervals``.

    Each interval has length at most ``2 pi``; intervals are listed in
    increasing ``t`` and may be shifted by multiples of ``2 pi``.
    """

    center: np.ndarray
    radius: float
    intervals: tuple[tuple[float, float], ...]

    def total(self) -> float:
        return self.radius * sum(b - a for a, b in self.intervals)

    @property
    def closed(self) -> bool:
        return abs(sum(b - a for a, b in self.intervals) - TWO_PI) < 1e-14

    def measure_in_ball(self, a, rho: float) -> float:
        a = np.asarray(a, dtype=float) - self.center
        dist = float(np.linalg.norm(a))
        R = self.radius
        if dist < 1e-15:
            return self.total() if R < rho else 0.0
        k = (R * R + dist * dist - rho * rho) / (2 * R * dist)
        if k >= 1:
            return 0.0
        if k <= -1:
            return self.total()
        beta = math.acos(k)
        ta = math.atan2(a[1], a[0])
        out = 0.0
        for lo, hi in self.intervals:
            # shift the ball's window next to this interval, then try neighbours
            shift = TWO_PI * math.floor((ta - beta - lo) / TWO_PI)
            for m in (-1, 0, 1, 2):
                c0 = ta - beta - shift + m * TWO_PI
                out += _interval_overlap(lo, hi, c0, c0 + 2 * beta)
        return R * out

    def complement(self) -> "ArcSet":
        if not self.intervals:
            return ArcSet(self.center, self.radius, ((0.0, TWO_PI),))
        start = self.intervals[0][0]
        ivs = [(a - start, b - start) for a, b in self.intervals]
        gaps = []
        cur = 0.0
        for a, b in ivs:
            if a > cur:
                gaps.append((cur + start, a + start))
            cur = max(cur, b)
        if cur < TWO_PI:
            gaps.append((cur + start, TWO_PI + start))
        return ArcSet(self.center, self.radius, tuple(gaps))

    def reflected(self, axis: int = -1) -> "ArcSet":
        if axis not in (-1, 1):
            raise ValueError("arcs reflect across the line y = const only")
        ivs = sorted((-b, -a) for a, b in self.intervals)
        return ArcSet(_flip(self.center), self.radius, tuple(ivs))

    def point(self, t):
        t = np.asarray(t, dtype=float)
        return self.center + self.radius * np.stack([np.cos(t), np.sin(t)], axis=-1)

    def quadrature(self, nodes_per_unit: int):
        """Midpoint rule in angle; ``nodes_per_unit`` nodes per unit arc length."""
        pts, wts = [], []
        for a, b in self.intervals:
            L = self.radius * (b - a)
            m = max(1, int(round(nodes_per_unit * L)))
            dt = (b - a) / m
            t = a + (np.arange(m) + 0.5) * dt
            pts.append(self.point(t))
            wts.append(np.full(m, self.radius * dt))
        if not pts:
            return np.empty((0, 2)), np.empty(0)
        return np.concatenate(pts), np.concatenate(wts)

    def boundary_curve(self):
        """Endpoints with outward unit co-normals (tangent to the circle), weight 1."""
        if self.closed:
            return np.empty((0, 2)), np.empty((0, 2)), np.empty(0)
        pts, nrm = [], []
        for a, b in self.intervals:
            for t, sgn in ((a, -1.0), (b, 1.0)):
                pts.append(self.point(t))
                nrm.append(sgn * np.array([-math.sin(t), math.cos(t)]))
        return np.array(pts), np.array(nrm), np.ones(len(pts))


@dataclass(frozen=True, eq=False)
class SphereBands:
    """Union of latitude bands of the sphere ``|x - center| = radius``.

    Bands are polar-angle intervals measured from the ``+z`` axis.
    """

    center: np.ndarray
    radius: float
    intervals: tuple[tuple[float, float], ...]

    def _surface(self) -> RevolutionSurface:
        r = float(self.radius)
        return RevolutionSurface(
            radial=lambda u: r * np.sin(u),
            height=lambda u: r * np.cos(u),
            speed=lambda u: np.full_like(np.asarray(u, dtype=float), r),
            intervals=self.intervals,
            origin=np.asarray(self.center, dtype=float),
        )

    def total(self) -> float:
        r = self.radius
        return sum(TWO_PI * r * r * (math.cos(a) - math.cos(b)) for a, b in self.intervals)

    @property
    def closed(self) -> bool:
        return abs(sum(b - a for a, b in self.intervals) - math.pi) < 1e-14

    def measure_in_ball(self, a, rho: float) -> float:
        if not self.intervals:
            return 0.0
        return self._surface().mass_in_ball(a, rho)

    def complement(self) -> "SphereBands":
        gaps = []
        cur = 0.0
        for a, b in _merge(self.intervals, 0.0, math.pi):
            if a > cur:
                gaps.append((cur, a))
            cur = b
        if cur < math.pi:
            gaps.append((cur, math.pi))
        return SphereBands(self.center, self.radius, tuple(gaps))

    def reflected(self, axis: int = -1) -> "SphereBands":
        if axis not in (-1, 2):
            raise ValueError("sphere bands reflect across the plane z = const only")
        ivs = sorted((math.pi - b, math.pi - a) for a, b in self.intervals)
        return SphereBands(_flip(self.center), self.radius, tuple(ivs))

    def point(self, u, t):
        u = np.asarray(u, dtype=float)
        t = np.asarray(t, dtype=float)
        return self.center + self.radius * np.stack(
            [np.sin(u) * np.cos(t), np.sin(u) * np.sin(t), np.cos(u) + 0.0 * t], axis=-1)

    def quadrature(self, n_polar: int, n_azimuth: int | None = None):
        """Gauss-Legendre in polar angle times the midpoint rule in azimuth."""
        if n_azimuth is None:
            n_azimuth = 2 * n_polar
        x, w = np.polynomial.legendre.leggauss(n_polar)
        t = (np.arange(n_azimuth) + 0.5) * TWO_PI / n_azimuth
        pts, wts = [], []
        for a, b in self.intervals:
            u = a + (b - a) * 0.5 * (x + 1)
            wu = w * 0.5 * (b - a) * self.radius**2 * np.sin(u)
            U, T = np.meshgrid(u, t, indexing="ij")
            pts.append(self.point(U, T).reshape(-1, 3))
            wts.append((wu[:, None] * np.full(n_azimuth, TWO_PI / n_azimuth)).reshape(-1))
        if not pts:
            return np.empty((0, 3)), np.empty(0)
        return np.concatenate(pts), np.concatenate(wts)

    def boundary_curve(self, n_azimuth: int = 64):
        """Boundary circles with outward co-normals ``-e_psi`` / ``+e_psi``."""
        t = (np.arange(n_azimuth) + 0.5) * TWO_PI / n_azimuth
        pts, nrm, wts = [], [], []
        for a, b in self.intervals:
            for u, sgn in ((a, -1.0), (b, 1.0)):
                if u <= 1e-15 or u >= math.pi - 1e-15:
                    continue
                pts.append(self.point(np.full_like(t, u), t))
                e_psi = np.stack([np.cos(u) * np.cos(t), np.cos(u) * np.sin(t),
                                  -np.sin(u) * np.ones_like(t)], axis=-1)
                nrm.append(sgn * e_psi)
                wts.append(np.full(n_azimuth, TWO_PI * self.radius * math.sin(u) / n_azimuth))
        if not pts:
            return np.empty((0, 3)), np.empty((0, 3)), np.empty(0)
        return np.concatenate(pts), np.concatenate(nrm), np.concatenate(wts)
