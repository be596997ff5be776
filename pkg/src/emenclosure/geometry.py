"""Obstacle geometry: shapes, signed distances, and first-reflector analysis.

Shapes are immutable; every operation here is a pure function.  Supported
variants are spheres, ellipsoids, axis-aligned boxes and finite unions.
Curvature data (needed for the reflector non-degeneracy flags) is only
defined for the C^2 variants, so boxes are accepted as media but rejected
by the reflector search.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray


class GeometryError(ValueError):
    """Source/obstacle configuration is geometrically invalid."""


class UnsupportedGeometryError(GeometryError):
    """Operation requires a smoother surface than the shape provides."""


# ---------------------------------------------------------------------------
# shape variants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Sphere:
    center: tuple[float, float, float]
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise GeometryError("sphere radius must be positive")

    @property
    def parts(self):
        return (self,)

    def signed_distance(self, x: NDArray) -> NDArray:
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x - np.asarray(self.center), axis=-1)
        return r - self.radius

    def bounding_box(self):
        c = np.asarray(self.center)
        r = self.radius
        return c - r, c + r

    def surface_seeds(self, n: int, rng: np.random.Generator) -> NDArray:
        u = rng.normal(size=(n, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        return np.asarray(self.center) + self.radius * u

    def project_to_surface(self, x: NDArray) -> NDArray:
        c = np.asarray(self.center)
        d = x - c
        r = np.linalg.norm(d, axis=-1, keepdims=True)
        return c + self.radius * d / r

    # implicit function F = |x-c|^2/R^2 - 1 used for curvature formulas
    def implicit_grad_hess(self, q: NDArray):
        c = np.asarray(self.center)
        g = 2.0 * (q - c) / self.radius**2
        h = (2.0 / self.radius**2) * np.eye(3)
        return g, h

    def diameter(self) -> float:
        return 2.0 * self.radius


@dataclass(frozen=True)
class Ellipsoid:
    center: tuple[float, float, float]
    semi_axes: tuple[float, float, float]

    def __post_init__(self):
        if min(self.semi_axes) <= 0:
            raise GeometryError("ellipsoid semi-axes must be positive")

    @property
    def parts(self):
        return (self,)

    def signed_distance(self, x: NDArray) -> NDArray:
        """Exact signed distance via the stationary-point equation.

        The nearest boundary point of x is q_i = a_i^2 x_i / (t + a_i^2)
        (coordinates relative to the center) where t solves
        sum (a_i x_i / (t + a_i^2))^2 = 1, with the root t > -min(a_i^2).
        Solved by vectorized bisection; t > 0 outside, t < 0 inside.
        """
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 1
        pts = np.atleast_2d(x) - np.asarray(self.center)
        a2 = np.asarray(self.semi_axes) ** 2

        def g(t):
            return np.sum(a2 * pts**2 / (t[:, None] + a2) ** 2, axis=1) - 1.0

        # bracket: g is decreasing in t on (-min a2, inf)
        lo = np.full(len(pts), -a2.min() + 1e-14 * a2.min())
        # ensure g(lo) > 0: points with vanishing near-axis coordinate can
        # make g(lo) finite but still > 0 unless x is (numerically) at the
        # center plane; nudge such points
        hi = np.maximum(np.linalg.norm(np.asarray(self.semi_axes) * pts, axis=1), 1.0) + a2.max()
        glo = g(lo)
        deg = glo <= 0  # degenerate: x on an axis plane, nearest point off-plane
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            gm = g(mid)
            take_hi = gm > 0
            lo = np.where(take_hi, mid, lo)
            hi = np.where(take_hi, hi, mid)
        t = 0.5 * (lo + hi)
        q = a2 * pts / (t[:, None] + a2)
        d = np.linalg.norm(q - pts, axis=1)
        inside = np.sum(pts**2 / a2, axis=1) < 1.0
        sd = np.where(inside, -d, d)
        if np.any(deg):
            # fall back to dense surface sampling for the measure-zero cases
            rng = np.random.default_rng(0)
            surf = self.surface_seeds(4096, rng) - np.asarray(self.center)
            dd = np.linalg.norm(pts[deg][:, None, :] - surf[None, :, :], axis=2).min(axis=1)
            sd[deg] = np.where(inside[deg], -dd, dd)
        return sd[0] if scalar else sd

    def bounding_box(self):
        c = np.asarray(self.center)
        a = np.asarray(self.semi_axes)
        return c - a, c + a

    def surface_seeds(self, n: int, rng: np.random.Generator) -> NDArray:
        u = rng.normal(size=(n, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        return np.asarray(self.center) + np.asarray(self.semi_axes) * u

    def project_to_surface(self, x: NDArray) -> NDArray:
        c = np.asarray(self.center)
        pts = np.atleast_2d(x) - c
        a2 = np.asarray(self.semi_axes) ** 2
        lo = np.full(len(pts), -a2.min() + 1e-14 * a2.min())
        hi = np.maximum(np.linalg.norm(np.asarray(self.semi_axes) * pts, axis=1), 1.0) + a2.max()
        for _ in range(120):
            mid = 0.5 * (lo + hi)
            gm = np.sum(a2 * pts**2 / (mid[:, None] + a2) ** 2, axis=1) - 1.0
            take_hi = gm > 0
            lo = np.where(take_hi, mid, lo)
            hi = np.where(take_hi, hi, mid)
        t = 0.5 * (lo + hi)
        q = c + a2 * pts / (t[:, None] + a2)
        return q.reshape(np.shape(x))

    def implicit_grad_hess(self, q: NDArray):
        c = np.asarray(self.center)
        a2 = np.asarray(self.semi_axes) ** 2
        g = 2.0 * (q - c) / a2
        h = np.diag(2.0 / a2)
        return g, h

    def diameter(self) -> float:
        return 2.0 * max(self.semi_axes)


@dataclass(frozen=True)
class Box:
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def __post_init__(self):
        if not np.all(np.asarray(self.hi) > np.asarray(self.lo)):
            raise GeometryError("box must have hi > lo on every axis")

    @property
    def parts(self):
        return (self,)

    def signed_distance(self, x: NDArray) -> NDArray:
        x = np.asarray(x, dtype=float)
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        c = 0.5 * (lo + hi)
        b = 0.5 * (hi - lo)
        q = np.abs(x - c) - b
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(np.max(q, axis=-1), 0.0)
        return outside + inside

    def bounding_box(self):
        return np.asarray(self.lo, dtype=float), np.asarray(self.hi, dtype=float)

    def diameter(self) -> float:
        return float(np.linalg.norm(np.asarray(self.hi) - np.asarray(self.lo)))


@dataclass(frozen=True)
class Union:
    shapes: tuple

    def __post_init__(self):
        if len(self.shapes) == 0:
            raise GeometryError("union needs at least one shape")

    @property
    def parts(self):
        out = []
        for s in self.shapes:
            out.extend(s.parts)
        return tuple(out)

    def signed_distance(self, x: NDArray) -> NDArray:
        return np.min([s.signed_distance(x) for s in self.shapes], axis=0)

    def bounding_box(self):
        boxes = [s.bounding_box() for s in self.shapes]
        lo = np.min([b[0] for b in boxes], axis=0)
        hi = np.max([b[1] for b in boxes], axis=0)
        return lo, hi

    def diameter(self) -> float:
        lo, hi = self.bounding_box()
        return float(np.linalg.norm(hi - lo))


Shape = Sphere | Ellipsoid | Box | Union


# ---------------------------------------------------------------------------
# distances
# ---------------------------------------------------------------------------


def distance_to_boundary(shape: Shape, p) -> float:
    """dist({p}, boundary of the shape); exact for all supported variants."""
    return float(abs(shape.signed_distance(np.asarray(p, dtype=float))))


def dist_D_B(shape: Shape, p, eta: float) -> float:
    """Distance between the obstacle and the source ball B(p, eta)."""
    d = float(shape.signed_distance(np.asarray(p, dtype=float)))
    if d <= eta:
        raise GeometryError(
            f"source ball B(p, {eta}) overlaps or touches the obstacle (sdf(p)={d:.4g})"
        )
    return d - eta


# ---------------------------------------------------------------------------
# first reflector
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReflectorPoint:
    q: tuple[float, float, float]
    nu: tuple[float, float, float]          # outward unit normal
    gauss_curvature: float
    mean_curvature: float                   # positive for a sphere's outward normal
    det_diff: float                         # det of the relative shape operator


@dataclass(frozen=True)
class ReflectorFlags:
    positive_gauss: bool        # every nearest point has K > 0
    positive_det_diff: bool     # every nearest point has lam^2 - 2 lam H + K > 0
    polarization_generic: bool  # some nearest point has |a x nu| above tolerance


@dataclass(frozen=True)
class ReflectorReport:
    points: tuple[ReflectorPoint, ...]
    dist_pD: float
    lam: float                  # 1 / dist({p}, boundary)
    flags: ReflectorFlags


def _curvatures(part, q: NDArray) -> tuple[float, float, NDArray]:
    """(K, H, outward normal) from the part's implicit quadric.

    Sign convention: H > 0 for a sphere's outward normal, which is the one
    that makes det_diff = lam^2 - 2 lam H + K consistent with the nested
    spheres picture.
    """
    g, hess = part.implicit_grad_hess(q)
    ng = np.linalg.norm(g)
    nu = g / ng
    # mean curvature w.r.t. outward normal
    H = (ng**2 * np.trace(hess) - g @ hess @ g) / (2.0 * ng**3)
    # Gauss curvature via the adjugate of the Hessian
    adj = np.linalg.det(hess) * np.linalg.inv(hess)
    K = (g @ adj @ g) / ng**4
    return float(K), float(H), nu


def first_reflector(shape: Shape, p, a, tol: float = 1e-6) -> ReflectorReport:
    """All nearest boundary points of `shape` seen from p, with curvatures.

    Global minimization of |q - p| over the boundary is done by multi-start
    projected descent (surface seeds -> tangential gradient steps with
    reprojection), then clustering of the converged minima.
    """
    p = np.asarray(p, dtype=float)
    a = np.asarray(a, dtype=float)
    a = a / np.linalg.norm(a)
    if shape.signed_distance(p) <= 0:
        raise GeometryError("source point p lies inside or on the obstacle")
    parts = shape.parts
    for part in parts:
        if isinstance(part, Box):
            raise UnsupportedGeometryError(
                "boxes have no C^2 boundary; reflector curvatures are undefined"
            )

    cluster_tol = tol * shape.diameter() if tol < 1e-2 else tol
    rng = np.random.default_rng(12345)

    candidates = []  # (distance, q, part)
    for part in parts:
        seeds = part.surface_seeds(1000, rng)
        q = seeds.copy()
        step = 0.25 * part.diameter()
        for _ in range(120):
            d = q - p
            dist = np.linalg.norm(d, axis=1, keepdims=True)
            grad = d / dist
            g_imp = np.stack([part.implicit_grad_hess(qi)[0] for qi in q])
            nu = g_imp / np.linalg.norm(g_imp, axis=1, keepdims=True)
            tang = grad - np.sum(grad * nu, axis=1, keepdims=True) * nu
            q = part.project_to_surface(q - step * tang)
            step *= 0.95
        # polish each converged point with small fixed steps
        for _ in range(200):
            d = q - p
            dist = np.linalg.norm(d, axis=1, keepdims=True)
            grad = d / dist
            g_imp = np.stack([part.implicit_grad_hess(qi)[0] for qi in q])
            nu = g_imp / np.linalg.norm(g_imp, axis=1, keepdims=True)
            tang = grad - np.sum(grad * nu, axis=1, keepdims=True) * nu
            q = part.project_to_surface(q - 1e-3 * part.diameter() * tang)
        dists = np.linalg.norm(q - p, axis=1)
        for qi, di in zip(q, dists):
            candidates.append((di, qi, part))

    dmin = min(c[0] for c in candidates)
    # keep global minimizers, cluster duplicates; the merge radius must
    # exceed the descent's convergence scatter or one minimum shows up as
    # many near-coincident points
    merge_radius = max(cluster_tol * 10.0, 1e-3 * shape.diameter())
    kept: list[tuple[NDArray, object]] = []
    for di, qi, part in sorted(candidates, key=lambda c: c[0]):
        if di > dmin + cluster_tol:
            break
        if all(np.linalg.norm(qi - qk) > merge_radius for qk, _ in kept):
            kept.append((qi, part))

    lam = 1.0 / dmin
    pts = []
    for qi, part in kept:
        K, H, nu = _curvatures(part, qi)
        det_diff = lam**2 - 2.0 * lam * H + K
        pts.append(
            ReflectorPoint(
                q=tuple(qi), nu=tuple(nu),
                gauss_curvature=K, mean_curvature=H, det_diff=det_diff,
            )
        )

    flags = ReflectorFlags(
        positive_gauss=all(pt.gauss_curvature > 0 for pt in pts),
        positive_det_diff=all(pt.det_diff > 0 for pt in pts),
        polarization_generic=any(
            np.linalg.norm(np.cross(a, pt.nu)) > max(tol, 1e-9) for pt in pts
        ),
    )
    return ReflectorReport(points=tuple(pts), dist_pD=dmin, lam=lam, flags=flags)
