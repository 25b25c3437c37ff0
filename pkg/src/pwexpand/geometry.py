"""Convex polytopes in halfspace form.

A :class:`Polytope` is the set ``{x : A x <= b}``.  In dimension <= 3 the
vertex set is enumerated at construction and used both for exact volumes and
for redundancy reduction (a halfspace is kept only when at least ``dim``
vertices lie on its boundary).  Higher dimensions use linear programming and
seeded Monte Carlo volumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection
from scipy.spatial import QhullError

from . import kernels

TOL = 1e-9
MC_SAMPLES = 1 << 16
MC_SEED = 20240101

_BIG = 1e9


class GeometryError(ValueError):
    pass


class DimensionMismatchError(GeometryError):
    pass


class SingularMapError(GeometryError):
    pass


class UnboundedError(GeometryError):
    pass


def set_tolerance(tol: float) -> None:
    """Change the global emptiness/incidence tolerance."""
    global TOL
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    TOL = float(tol)


def get_tolerance() -> float:
    return TOL


def _normalize(A, b):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    if A.shape[0] != b.shape[0]:
        raise GeometryError("normals and offsets differ in length")
    norms = np.linalg.norm(A, axis=1)
    zero = norms == 0.0
    infeasible = bool(np.any(b[zero] < -TOL))
    keep = ~zero
    A = A[keep] / norms[keep, None]
    b = b[keep] / norms[keep]
    return A, b, infeasible


def _dedupe(A, b, tol=1e-12):
    if A.shape[0] == 0:
        return A, b
    key = np.hstack([A, b[:, None]])
    keep = []
    for i in range(key.shape[0]):
        if not any(np.max(np.abs(key[i] - key[j])) <= tol for j in keep):
            keep.append(i)
    return A[keep], b[keep]


def _tight_rows(A, b, V, need, tol):
    """Rows of ``A x <= b`` with at least ``need`` vertices on the boundary."""
    if V.shape[0] == 0:
        return np.zeros(A.shape[0], dtype=bool)
    slack = V @ A.T - b[None, :]
    scale = max(1.0, float(np.max(np.abs(V))))
    on = np.abs(slack) <= tol * scale
    return on.sum(axis=0) >= need


def _dedupe_vertices(V, tol):
    if V.shape[0] <= 1:
        return V
    keep = [0]
    for i in range(1, V.shape[0]):
        if np.max(np.abs(V[i] - V[keep[-1]])) > tol:
            keep.append(i)
    if len(keep) > 1 and np.max(np.abs(V[keep[-1]] - V[keep[0]])) <= tol:
        keep.pop()
    return V[keep]


def _chebyshev(A, b, bounds=None):
    """Chebyshev center and radius, or ``(None, -inf)`` when infeasible."""
    d = A.shape[1]
    norms = np.linalg.norm(A, axis=1)
    c = np.zeros(d + 1)
    c[-1] = -1.0
    A_ub = np.hstack([A, norms[:, None]])
    if bounds is None:
        bounds = [(None, None)] * d + [(0, None)]
    res = linprog(c, A_ub=A_ub, b_ub=b, bounds=bounds, method="highs")
    if res.status == 3:
        return None, math.inf
    if res.status != 0:
        return None, -math.inf
    return res.x[:d], float(res.x[-1])


class Polytope:
    """Bounded convex polytope ``{x : A x <= b}``.

    Instances are immutable.  Use :meth:`box`, :meth:`from_halfspaces` or the
    module functions to build them; the raw constructor trusts its input.
    """

    __slots__ = ("A", "b", "vertices", "empty", "bounded", "_volume", "_stderr")

    def __init__(self, A, b, vertices, empty, bounded=True):
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.vertices = None if vertices is None else np.asarray(vertices, dtype=float)
        self.empty = bool(empty)
        self.bounded = bool(bounded)
        self._volume = 0.0 if self.empty else None
        self._stderr = 0.0
        for arr in (self.A, self.b, self.vertices):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def halfspaces(self):
        return list(zip(self.A, self.b))

    def __repr__(self):
        if self.empty:
            return f"Polytope(dim={self.dim}, empty)"
        if self.dim == 1 and self.vertices is not None:
            return f"Polytope([{float(self.vertices[0, 0])!r}, {float(self.vertices[1, 0])!r}])"
        return f"Polytope(dim={self.dim}, facets={self.A.shape[0]})"

    # -- construction -------------------------------------------------

    @classmethod
    def empty_set(cls, dim: int) -> "Polytope":
        return cls(np.zeros((0, dim)), np.zeros(0), np.zeros((0, dim)), True)

    @classmethod
    def box(cls, lo, hi) -> "Polytope":
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        d = lo.shape[0]
        A = np.vstack([np.eye(d), -np.eye(d)])
        b = np.concatenate([hi, -lo])
        return cls.from_halfspaces(A, b)

    @classmethod
    def interval(cls, lo: float, hi: float) -> "Polytope":
        return cls.box([lo], [hi])

    @classmethod
    def from_halfspaces(cls, A, b) -> "Polytope":
        A, b, infeasible = _normalize(A, b)
        d = A.shape[1]
        if infeasible:
            return cls.empty_set(d)
        if d == 1:
            return _build_1d(A, b)
        if d == 2:
            return _build_2d(A, b)
        if d == 3:
            return _build_3d(A, b)
        return _build_nd(A, b)

    @classmethod
    def from_vertices(cls, V) -> "Polytope":
        """Convex hull of a point set (dim <= 3)."""
        V = np.atleast_2d(np.asarray(V, dtype=float))
        d = V.shape[1]
        if d == 1:
            return cls.interval(float(V.min()), float(V.max()))
        try:
            hull = ConvexHull(V)
        except QhullError:
            return cls.empty_set(d)
        A = hull.equations[:, :-1]
        b = -hull.equations[:, -1]
        return cls.from_halfspaces(A, b)

    # -- queries ------------------------------------------------------

    def slack(self, points) -> np.ndarray:
        """Largest ``n.x - c`` over the halfspaces, per point (<= 0 inside)."""
        P = np.atleast_2d(np.asarray(points, dtype=float))
        if self.empty:
            return np.full(P.shape[0], np.inf)
        if self.A.shape[0] == 0:
            return np.full(P.shape[0], -np.inf)
        return np.max(P @ self.A.T - self.b[None, :], axis=1)

    def contains(self, x, tol: float | None = None) -> bool:
        tol = TOL if tol is None else tol
        return bool(self.slack(x)[0] <= tol)

    def bbox(self):
        if self.empty:
            raise GeometryError("empty polytope has no bounding box")
        if self.vertices is not None:
            return self.vertices.min(axis=0), self.vertices.max(axis=0)
        lo = np.empty(self.dim)
        hi = np.empty(self.dim)
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = 1.0
            r1 = linprog(e, A_ub=self.A, b_ub=self.b, bounds=[(None, None)] * self.dim, method="highs")
            r2 = linprog(-e, A_ub=self.A, b_ub=self.b, bounds=[(None, None)] * self.dim, method="highs")
            if r1.status != 0 or r2.status != 0:
                raise UnboundedError("polytope is unbounded")
            lo[i] = r1.fun
            hi[i] = -r2.fun
        return lo, hi

    def centroid(self) -> np.ndarray:
        """Volume centroid for dim <= 2, vertex mean otherwise."""
        if self.empty:
            raise GeometryError("empty polytope has no centroid")
        if self.dim == 1:
            return self.vertices.mean(axis=0)
        if self.dim == 2:
            V = self.vertices
            x, y = V[:, 0], V[:, 1]
            xn, yn = np.roll(x, -1), np.roll(y, -1)
            cross = x * yn - xn * y
            a = cross.sum() / 2.0
            if abs(a) < 1e-300:
                return V.mean(axis=0)
            return np.array([((x + xn) * cross).sum(), ((y + yn) * cross).sum()]) / (6.0 * a)
        if self.vertices is not None:
            return self.vertices.mean(axis=0)
        return self.chebyshev_center()[0]

    def chebyshev_center(self):
        if self.empty:
            raise GeometryError("empty polytope has no Chebyshev center")
        if self.dim == 1:
            lo, hi = self.vertices[0, 0], self.vertices[1, 0]
            return np.array([(lo + hi) / 2.0]), (hi - lo) / 2.0
        return _chebyshev(self.A, self.b)


def _build_1d(A, b):
    a = A[:, 0]
    up = b[a > 0] / a[a > 0]
    down = b[a < 0] / a[a < 0]
    if up.size == 0 or down.size == 0:
        return Polytope(A, b, None, False, bounded=False)
    hi = float(up.min())
    lo = float(down.max())
    if hi - lo <= TOL:
        return Polytope.empty_set(1)
    return Polytope(np.array([[1.0], [-1.0]]), np.array([hi, -lo]), np.array([[lo], [hi]]), False)


def _big_square():
    return np.array([[-_BIG, -_BIG], [_BIG, -_BIG], [_BIG, _BIG], [-_BIG, _BIG]])


def _finish_2d(A, b, V):
    """Redundancy reduction + emptiness for a clipped polygon."""
    scale = max(1.0, float(np.max(np.abs(V)))) if V.shape[0] else 1.0
    V = _dedupe_vertices(V, 1e-14 * scale)
    if V.shape[0] < 3:
        return Polytope.empty_set(2)
    area = abs(kernels.polygon_area(V))
    diam = float(np.max(np.linalg.norm(V[:, None, :] - V[None, :, :], axis=2)))
    if area <= TOL * diam:
        return Polytope.empty_set(2)
    if kernels.polygon_area(V) < 0:
        V = V[::-1].copy()
    keep = _tight_rows(A, b, V, 2, 1e-10)
    A2, b2 = _dedupe(A[keep], b[keep])
    return Polytope(A2, b2, V, False)


def _build_2d(A, b):
    V = kernels.clip_polygon(_big_square(), A, b)
    if V.shape[0] >= 3 and np.max(np.abs(V)) >= _BIG / 2:
        return Polytope(A, b, None, False, bounded=False)
    if V.shape[0] < 3:
        return Polytope.empty_set(2)
    # second pass from a tight box: the first one carries 1e9-scale rounding
    lo, hi = V.min(axis=0), V.max(axis=0)
    pad = 0.1 * (hi - lo).max() + 1.0
    lo, hi = lo - pad, hi + pad
    square = np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])
    V = kernels.clip_polygon(square, A, b)
    if V.shape[0] < 3:
        return Polytope.empty_set(2)
    return _finish_2d(A, b, V)


def _build_3d(A, b):
    big = np.vstack([np.eye(3), -np.eye(3)])
    Ab = np.vstack([A, big])
    bb = np.concatenate([b, np.full(6, _BIG)])
    center, radius = _chebyshev(Ab, bb)
    if center is None or radius <= TOL:
        return Polytope.empty_set(3)
    try:
        hs = HalfspaceIntersection(np.hstack([Ab, -bb[:, None]]), center)
    except QhullError:
        return Polytope.empty_set(3)
    V = hs.intersections
    if np.max(np.abs(V)) >= _BIG / 2:
        return Polytope(A, b, None, False, bounded=False)
    V = np.unique(np.round(V, 13), axis=0)
    keep = _tight_rows(A, b, V, 3, 1e-10)
    A2, b2 = _dedupe(A[keep], b[keep])
    return Polytope(A2, b2, V, False)


def _build_nd(A, b):
    d = A.shape[1]
    center, radius = _chebyshev(A, b)
    if radius == math.inf:
        return Polytope(A, b, None, False, bounded=False)
    if center is None or radius <= TOL:
        return Polytope.empty_set(d)
    for i in range(d):
        for sgn in (1.0, -1.0):
            e = np.zeros(d)
            e[i] = sgn
            res = linprog(-e, A_ub=A, b_ub=b, bounds=[(None, None)] * d, method="highs")
            if res.status == 3:
                return Polytope(A, b, None, False, bounded=False)
    # drop halfspace i when maximizing its normal over the others stays within c_i
    keep = np.ones(A.shape[0], dtype=bool)
    for i in range(A.shape[0]):
        others = keep.copy()
        others[i] = False
        if not others.any():
            continue
        res = linprog(-A[i], A_ub=A[others], b_ub=b[others] + TOL, bounds=[(None, None)] * d, method="highs")
        if res.status == 0 and -res.fun <= b[i] + TOL:
            keep[i] = False
    A2, b2 = _dedupe(A[keep], b[keep])
    return Polytope(A2, b2, None, False)


# -- operations -----------------------------------------------------------


def intersect(p: Polytope, q: Polytope) -> Polytope:
    """Intersection of two polytopes of equal dimension."""
    if p.dim != q.dim:
        raise DimensionMismatchError(f"dimension mismatch: {p.dim} vs {q.dim}")
    if p.empty or q.empty:
        return Polytope.empty_set(p.dim)
    A = np.vstack([p.A, q.A])
    b = np.concatenate([p.b, q.b])
    if p.dim == 1 and p.vertices is not None and q.vertices is not None:
        lo = max(p.vertices[0, 0], q.vertices[0, 0])
        hi = min(p.vertices[1, 0], q.vertices[1, 0])
        if hi - lo <= TOL:
            return Polytope.empty_set(1)
        return Polytope(np.array([[1.0], [-1.0]]), np.array([hi, -lo]), np.array([[lo], [hi]]), False)
    if p.dim == 2 and p.vertices is not None and q.bounded:
        V = kernels.clip_polygon(p.vertices, q.A, q.b)
        if V.shape[0] < 3:
            return Polytope.empty_set(2)
        return _finish_2d(A, b, V)
    return Polytope.from_halfspaces(A, b)


def _check_affine(p, a, off):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    off = np.atleast_1d(np.asarray(off, dtype=float))
    if a.shape != (p.dim, p.dim) or off.shape != (p.dim,):
        raise DimensionMismatchError("affine map does not match polytope dimension")
    det = float(np.linalg.det(a))
    if abs(det) <= 1e-12:
        raise SingularMapError(f"singular linear part (det = {det:g})")
    return a, off, det


def affine_preimage(p: Polytope, a, off) -> Polytope:
    """``{x : a x + off in p}``; halfspace ``(n, c)`` becomes ``(a^T n, c - n.off)``."""
    a, off, det = _check_affine(p, a, off)
    if p.empty:
        return Polytope.empty_set(p.dim)
    A = p.A @ a
    b = p.b - p.A @ off
    norms = np.linalg.norm(A, axis=1)
    A = A / norms[:, None]
    b = b / norms
    V = None
    if p.vertices is not None:
        V = np.linalg.solve(a, (p.vertices - off).T).T
        if p.dim == 1:
            V = np.sort(V, axis=0)
        elif p.dim == 2 and det < 0:
            V = V[::-1].copy()
    return Polytope(A, b, V, False, p.bounded)


def affine_image(p: Polytope, a, off) -> Polytope:
    """``{a x + off : x in p}`` for invertible ``a``."""
    a, off, det = _check_affine(p, a, off)
    if p.empty:
        return Polytope.empty_set(p.dim)
    ainv = np.linalg.inv(a)
    A = p.A @ ainv
    b = p.b + A @ off
    norms = np.linalg.norm(A, axis=1)
    A = A / norms[:, None]
    b = b / norms
    V = None
    if p.vertices is not None:
        V = p.vertices @ a.T + off
        if p.dim == 1:
            V = np.sort(V, axis=0)
        elif p.dim == 2 and det < 0:
            V = V[::-1].copy()
    return Polytope(A, b, V, False, p.bounded)


def volume_with_error(p: Polytope, seed: int | None = None):
    """Lebesgue volume and its standard error (0 on the exact paths)."""
    if p.empty:
        return 0.0, 0.0
    if not p.bounded:
        raise UnboundedError("volume of an unbounded polytope")
    if p._volume is not None:
        return p._volume, p._stderr
    d = p.dim
    if d == 1:
        vol, err = float(p.vertices[1, 0] - p.vertices[0, 0]), 0.0
    elif d == 2:
        vol, err = abs(kernels.polygon_area(p.vertices)), 0.0
    elif d == 3:
        try:
            vol, err = float(ConvexHull(p.vertices).volume), 0.0
        except QhullError:
            vol, err = 0.0, 0.0
    else:
        lo, hi = p.bbox()
        rng = np.random.default_rng(MC_SEED if seed is None else seed)
        pts = lo + (hi - lo) * rng.random((MC_SAMPLES, d))
        inside = (p.slack(pts) <= 0.0).astype(float)
        box_vol = float(np.prod(hi - lo))
        frac = inside.mean()
        vol = box_vol * frac
        err = box_vol * math.sqrt(max(frac * (1 - frac), 0.0) / MC_SAMPLES)
    p._volume = vol
    p._stderr = err
    return vol, err


def volume(p: Polytope) -> float:
    return volume_with_error(p)[0]


def incidence_count(regions, x, tol: float | None = None) -> int:
    """Number of regions whose closure contains ``x`` within ``tol``."""
    tol = TOL if tol is None else tol
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = 0
    for r in regions:
        if r.empty:
            continue
        if r.dim != x.shape[0]:
            raise DimensionMismatchError("point and region dimensions differ")
        if r.slack(x)[0] <= tol:
            n += 1
    return n


@dataclass(frozen=True)
class Interval:
    """Closed interval; ``lo == hi`` is treated as empty."""

    lo: float
    hi: float

    @property
    def empty(self) -> bool:
        return not self.hi - self.lo > 0

    @property
    def length(self) -> float:
        return 0.0 if self.empty else self.hi - self.lo

    def to_polytope(self) -> Polytope:
        if self.empty:
            return Polytope.empty_set(1)
        return Polytope.interval(self.lo, self.hi)

    @classmethod
    def from_polytope(cls, p: Polytope) -> "Interval":
        if p.dim != 1:
            raise DimensionMismatchError("not a 1D polytope")
        if p.empty:
            return cls(0.0, 0.0)
        return cls(float(p.vertices[0, 0]), float(p.vertices[1, 0]))
