"""Cylinder refinements and the combinatorial complexities of a map.

For a word ``(i_0, ..., i_{n-1})`` the cylinder is the set of points whose
first ``n`` steps visit the branch domains in that order.  Two counts
describe how cylinders pile up:

* ``D_n^b`` -- the largest number of cylinder closures through one point;
* ``D_n^e`` -- the same for the closures of the cylinder images ``T^n O``.

``lambda_n`` is the smallest singular value of ``DT^n`` over all cylinders.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .geometry import (
    Interval,
    Polytope,
    affine_image,
    affine_preimage,
    get_tolerance,
    intersect,
    volume,
)
from .maps import AffineBranch, CUSTOM, PiecewiseMap, SmoothBranch1D, branch_domain

DEFAULT_CAP = 10**6
PRUNE_REL = 1e-12
RANDOM_CANDIDATES = 10**4
SMOOTH_GRID = 256
DEFAULT_SEED = 12345


class RefinementCapError(RuntimeError):
    """Raised when a refinement exceeds the cylinder cap."""

    def __init__(self, n: int, partial_count: int, cap: int):
        self.n = n
        self.partial_count = partial_count
        self.cap = cap
        super().__init__(f"level {n} exceeds the cylinder cap {cap} (reached {partial_count})")


@dataclass(frozen=True, eq=False)
class Cylinder:
    """One level-n cylinder.

    For affine maps ``composed_matrix``/``composed_offset`` describe ``T^n``
    on the region.  For 1D maps with smooth branches they are ``None`` and
    ``image`` holds the interval ``T^n(O)``.
    """

    itinerary: tuple
    region: Polytope
    composed_matrix: np.ndarray | None = None
    composed_offset: np.ndarray | None = None
    image_interval: Interval | None = None

    @property
    def n(self) -> int:
        return len(self.itinerary)

    def image(self) -> Polytope:
        if self.composed_matrix is not None:
            return affine_image(self.region, self.composed_matrix, self.composed_offset)
        return self.image_interval.to_polytope()


# -- 1D branch helpers -----------------------------------------------------


def _forward(br, x):
    if isinstance(br, AffineBranch):
        return br.matrix[0, 0] * np.asarray(x, dtype=float) + br.offset[0]
    return np.asarray(br.forward(x), dtype=float)


def _derivative(br, x):
    if isinstance(br, AffineBranch):
        return np.full(np.shape(x), br.matrix[0, 0])
    return np.asarray(br.derivative(x), dtype=float)


def _inverse(br, y: float) -> float:
    if isinstance(br, AffineBranch):
        return (y - br.offset[0]) / br.matrix[0, 0]
    return br.inverse(y)


def _interval_of(br) -> Interval:
    if isinstance(br, AffineBranch):
        return Interval.from_polytope(br.domain)
    return br.domain


def _push_interval(m: PiecewiseMap, itinerary, iv: Interval) -> Interval:
    a, b = iv.lo, iv.hi
    for k in itinerary:
        br = m.branches[k]
        fa, fb = float(_forward(br, a)), float(_forward(br, b))
        a, b = min(fa, fb), max(fa, fb)
    return Interval(a, b)


def _pull_point(m: PiecewiseMap, itinerary, y: float) -> float:
    for k in reversed(itinerary):
        y = float(_inverse(m.branches[k], y))
    return y


# -- refinement ------------------------------------------------------------


def _level_one(m: PiecewiseMap):
    out = []
    for k, br in enumerate(m.branches):
        if m.is_affine:
            out.append(Cylinder((k,), br.domain, br.matrix.copy(), br.offset.copy()))
        else:
            iv = _interval_of(br)
            out.append(Cylinder((k,), iv.to_polytope(), image_interval=_push_interval(m, (k,), iv)))
    return out


def _children(m: PiecewiseMap, cyl: Cylinder, min_vol: float):
    kids = []
    if m.is_affine:
        M, c = cyl.composed_matrix, cyl.composed_offset
        for k, br in enumerate(m.branches):
            region = intersect(cyl.region, affine_preimage(br.domain, M, c))
            if region.empty or volume(region) < min_vol:
                continue
            kids.append(Cylinder(cyl.itinerary + (k,), region, br.matrix @ M, br.matrix @ c + br.offset))
        return kids
    img = cyl.image_interval
    for k, br in enumerate(m.branches):
        dom = _interval_of(br)
        lo, hi = max(img.lo, dom.lo), min(img.hi, dom.hi)
        if not hi > lo:
            continue
        a = _pull_point(m, cyl.itinerary, lo)
        b = _pull_point(m, cyl.itinerary, hi)
        a, b = min(a, b), max(a, b)
        if b - a < min_vol:
            continue
        iv = Interval(a, b)
        word = cyl.itinerary + (k,)
        kids.append(Cylinder(word, iv.to_polytope(), image_interval=_push_interval(m, word, iv)))
    return kids


def iter_refine(m: PiecewiseMap, n_max: int, cap: int = DEFAULT_CAP):
    """Yield the cylinder lists of levels ``1..n_max`` in itinerary order."""
    if n_max < 1:
        raise ValueError("n must be >= 1")
    min_vol = PRUNE_REL * m.ambient_volume()
    level = _level_one(m)
    if len(level) > cap:
        raise RefinementCapError(1, len(level), cap)
    yield level
    for n in range(2, n_max + 1):
        nxt = []
        for cyl in level:
            nxt.extend(_children(m, cyl, min_vol))
            if len(nxt) > cap:
                raise RefinementCapError(n, len(nxt), cap)
        level = nxt
        yield level


def refine(m: PiecewiseMap, n: int, cap: int = DEFAULT_CAP) -> list[Cylinder]:
    """All nonempty level-``n`` cylinders, ordered by itinerary."""
    level = None
    for level in iter_refine(m, n, cap):
        pass
    return level


# -- incidence counting ----------------------------------------------------


def _max_incidence_1d(intervals, ambient, tol):
    lo = np.array([iv[0] for iv in intervals])
    hi = np.array([iv[1] for iv in intervals])
    cand = np.concatenate([lo, hi] + [np.asarray(p.vertices[:, 0]) for p in ambient])
    inside = np.zeros(cand.shape[0], dtype=bool)
    for p in ambient:
        inside |= p.slack(cand[:, None]) <= tol
    cand = cand[inside]
    if cand.size == 0:
        return 0
    slo, shi = np.sort(lo), np.sort(hi)
    # closures [lo, hi] containing x within tol: lo <= x + tol and hi >= x - tol
    count = np.searchsorted(slo, cand + tol, side="right") - np.searchsorted(shi, cand - tol, side="left")
    return int(count.max())


def _ambient_sample(ambient, n_points, rng):
    vols = np.array([volume(p) for p in ambient])
    which = rng.choice(len(ambient), size=n_points, p=vols / vols.sum())
    out = np.empty((n_points, ambient[0].dim))
    for j, p in enumerate(ambient):
        sel = which == j
        lo, hi = p.bbox()
        pts = lo + (hi - lo) * rng.random((int(sel.sum()), p.dim))
        out[sel] = pts
    keep = np.zeros(n_points, dtype=bool)
    for p in ambient:
        keep |= p.slack(out) <= 0.0
    return out[keep]


def _max_incidence_nd(regions, ambient, tol, seed):
    """Max incidence over region vertices plus seeded random points."""
    rng = np.random.default_rng(seed)
    verts = [r.vertices for r in regions if r.vertices is not None]
    parts = [_ambient_sample(ambient, RANDOM_CANDIDATES, rng)]
    if verts:
        V = np.vstack(verts)
        parts.insert(0, np.unique(np.round(V, 12), axis=0))
    cand = np.vstack(parts)
    inside = np.zeros(cand.shape[0], dtype=bool)
    for p in ambient:
        inside |= p.slack(cand) <= tol
    cand = cand[inside]
    if cand.shape[0] == 0:
        return 0
    tree = cKDTree(cand)
    counts = np.zeros(cand.shape[0], dtype=np.int64)
    # identical closures (common for cylinder images) are tested once, with multiplicity
    groups = {}
    for r in regions:
        if r.empty:
            continue
        key = r.vertices.round(12).tobytes() if r.vertices is not None else id(r)
        if key in groups:
            groups[key][1] += 1
        else:
            groups[key] = [r, 1]
    for r, mult in groups.values():
        if r.vertices is not None:
            ctr = r.vertices.mean(axis=0)
            rad = float(np.max(np.linalg.norm(r.vertices - ctr, axis=1)))
        else:
            lo, hi = r.bbox()
            ctr, rad = 0.5 * (lo + hi), 0.5 * float(np.linalg.norm(hi - lo))
        idx = tree.query_ball_point(ctr, rad + 2 * tol)
        if not idx:
            continue
        idx = np.asarray(idx, dtype=np.int64)
        hit = r.slack(cand[idx]) <= tol
        counts[idx[hit]] += mult
    return int(counts.max())


@dataclass(frozen=True)
class Count:
    """An incidence count and whether it is exact (else a lower bound)."""

    value: int
    certified: bool

    def __int__(self):
        return self.value


def complexity_begin(cylinders, m: PiecewiseMap, tol: float | None = None, seed: int = DEFAULT_SEED) -> Count:
    """``D_n^b``: exact in 1D, a certified lower bound in higher dimensions."""
    tol = get_tolerance() if tol is None else tol
    if m.dim == 1:
        ivs = [(c.region.vertices[0, 0], c.region.vertices[1, 0]) for c in cylinders]
        return Count(max(1, _max_incidence_1d(ivs, m.ambient, tol)), True)
    regions = [c.region for c in cylinders]
    return Count(max(1, _max_incidence_nd(regions, m.ambient, tol, seed)), False)


def complexity_end(cylinders, m: PiecewiseMap, tol: float | None = None, seed: int = DEFAULT_SEED) -> Count:
    """``D_n^e``: same procedure on the cylinder images ``T^n O``."""
    tol = get_tolerance() if tol is None else tol
    if m.dim == 1:
        ivs = []
        for c in cylinders:
            if c.image_interval is not None:
                ivs.append((c.image_interval.lo, c.image_interval.hi))
            else:
                img = c.image()
                ivs.append((img.vertices[0, 0], img.vertices[1, 0]))
        return Count(max(1, _max_incidence_1d(ivs, m.ambient, tol)), True)
    images = [c.image() for c in cylinders]
    return Count(max(1, _max_incidence_nd(images, m.ambient, tol, seed + 1)), False)


# -- expansion -------------------------------------------------------------


def _smooth_orbit_logs(m: PiecewiseMap, cyl: Cylinder, n_grid: int = SMOOTH_GRID):
    """Per-step log|T'| and log g along the cylinder word, on a point grid.

    Returns arrays of shape (n_steps, n_grid).
    """
    lo, hi = cyl.region.vertices[0, 0], cyl.region.vertices[1, 0]
    x = lo + (hi - lo) * np.linspace(0.0, 1.0, n_grid)
    ld = np.empty((cyl.n, n_grid))
    lg = np.empty((cyl.n, n_grid))
    for s, k in enumerate(cyl.itinerary):
        br = m.branches[k]
        der = np.abs(_derivative(br, x))
        ld[s] = np.log(der)
        if m.weight_kind == CUSTOM:
            lg[s] = np.log(np.abs(np.broadcast_to(np.asarray(br.weight(x), dtype=float), x.shape)))
        else:
            lg[s] = -ld[s]
        x = _forward(br, x)
    return ld, lg


def _affine_custom_log_weight(m: PiecewiseMap, cyl: Cylinder) -> np.ndarray:
    """log g^(n) at the cylinder's vertices and centroid (sampled)."""
    pts = np.vstack([cyl.region.vertices, cyl.region.centroid()[None, :]]) if cyl.region.vertices is not None \
        else cyl.region.chebyshev_center()[0][None, :]
    # pull vertices slightly inward so each point stays on its branch
    ctr = pts[-1]
    pts = ctr + (1.0 - 1e-9) * (pts - ctr)
    acc = np.zeros(pts.shape[0])
    for k in cyl.itinerary:
        br = m.branches[k]
        arg = pts[:, 0] if m.dim == 1 else pts
        acc += np.log(np.abs(np.broadcast_to(np.asarray(br.weight(arg), dtype=float), (pts.shape[0],))))
        pts = br.forward(pts)
    return acc


def expansion_min(cylinders, m: PiecewiseMap | None = None):
    """``lambda_n``: min over cylinders of the smallest singular value of ``DT^n``.

    Returns ``(value, certified)``.  Smooth 1D cylinders use products of
    per-step minima of ``|T'|`` on a grid (sampled, hence not certified).
    """
    if not cylinders:
        raise ValueError("empty cylinder list")
    if cylinders[0].composed_matrix is not None:
        sig = min(float(np.linalg.svd(c.composed_matrix, compute_uv=False).min()) for c in cylinders)
        return sig, True
    if m is None:
        raise ValueError("smooth cylinders need the map")
    best = math.inf
    for c in cylinders:
        ld, _ = _smooth_orbit_logs(m, c)
        best = min(best, float(np.sum(ld.min(axis=1))))
    return math.exp(best), False


# -- reports ---------------------------------------------------------------


@dataclass
class ComplexityReport:
    """Complexities at one level plus the per-cylinder data the bounds consume.

    ``log_g``, ``log_det`` and ``log_sigma`` are aligned sample arrays of
    ``log g^(n)``, ``log |det DT^n|`` and ``log lambda_n(x)``; for affine maps
    with the Perron-Frobenius weight there is one sample per cylinder.
    """

    n: int
    d_begin: int
    d_end: int
    lambda_n: float
    cylinder_count: int
    certified: dict
    dim: int = 1
    lambda_eig: float | None = None
    log_g: np.ndarray = field(default=None, repr=False)
    log_det: np.ndarray = field(default=None, repr=False)
    log_sigma: np.ndarray = field(default=None, repr=False)
    weight_sampled: bool = False

    def log_sup(self, det_power: float, t: float, pf_weight: bool = False) -> float:
        """``log sup g^(n) |det DT^n|^det_power lambda_n^(-t)``.

        With ``pf_weight`` the map's weight is replaced by ``1/|det DT|``.
        """
        lg = -self.log_det if pf_weight else self.log_g
        return float(np.max(lg + det_power * self.log_det - t * self.log_sigma))

    @classmethod
    def synthetic(cls, n: int, d_begin: int, d_end: int, lambda_n: float, det_n: float | None = None,
                  dim: int = 1) -> "ComplexityReport":
        """Report from given numbers (conformal case ``|det| = lambda_n^dim`` by default)."""
        det_n = lambda_n**dim if det_n is None else det_n
        ld = np.array([math.log(det_n)])
        return cls(
            n=n, d_begin=int(d_begin), d_end=int(d_end), lambda_n=float(lambda_n), cylinder_count=0,
            certified={"d_begin": True, "d_end": True, "lambda_n": True}, dim=dim,
            log_g=-ld, log_det=ld, log_sigma=np.array([math.log(lambda_n)]),
        )

    def row(self) -> dict:
        return {
            "n": self.n,
            "cylinders": self.cylinder_count,
            "d_begin": self.d_begin,
            "d_end": self.d_end,
            "lambda_n": self.lambda_n,
            "lambda_eig": self.lambda_eig,
            "d_begin_certified": self.certified["d_begin"],
            "d_end_certified": self.certified["d_end"],
            "lambda_certified": self.certified["lambda_n"],
        }


def complexity_report(m: PiecewiseMap, cylinders, seed: int = DEFAULT_SEED) -> ComplexityReport:
    n = cylinders[0].n
    db = complexity_begin(cylinders, m, seed=seed)
    de = complexity_end(cylinders, m, seed=seed)
    lam, lam_cert = expansion_min(cylinders, m)
    weight_sampled = False
    if cylinders[0].composed_matrix is not None:
        dets = np.array([abs(np.linalg.det(c.composed_matrix)) for c in cylinders])
        sig = np.array([np.linalg.svd(c.composed_matrix, compute_uv=False).min() for c in cylinders])
        lam_eig = min(float(np.abs(np.linalg.eigvals(c.composed_matrix)).min()) for c in cylinders)
        if m.weight_kind == CUSTOM:
            parts = [_affine_custom_log_weight(m, c) for c in cylinders]
            sizes = [p.shape[0] for p in parts]
            log_g = np.concatenate(parts)
            log_det = np.repeat(np.log(dets), sizes)
            log_sigma = np.repeat(np.log(sig), sizes)
            weight_sampled = True
        else:
            log_det = np.log(dets)
            log_g = -log_det
            log_sigma = np.log(sig)
    else:
        lds, lgs = [], []
        for c in cylinders:
            ld, lg = _smooth_orbit_logs(m, c)
            lds.append(ld.sum(axis=0))
            lgs.append(lg.sum(axis=0))
        log_det = np.concatenate(lds)
        log_g = np.concatenate(lgs)
        log_sigma = log_det
        lam_eig = None
        weight_sampled = True
    return ComplexityReport(
        n=n,
        d_begin=db.value,
        d_end=de.value,
        lambda_n=lam,
        cylinder_count=len(cylinders),
        certified={"d_begin": db.certified, "d_end": de.certified, "lambda_n": lam_cert},
        dim=m.dim,
        lambda_eig=lam_eig,
        log_g=log_g,
        log_det=log_det,
        log_sigma=log_sigma,
        weight_sampled=weight_sampled,
    )


def reports(m: PiecewiseMap, n_max: int, cap: int = DEFAULT_CAP, seed: int = DEFAULT_SEED):
    """Complexity reports for ``n = 1..n_max``."""
    return [complexity_report(m, level, seed) for level in iter_refine(m, n_max, cap)]


@dataclass
class GrowthRow:
    n: int
    d_begin_root: float
    d_end_root: float
    lambda_root: float
    d_begin_inf: float
    lambda_sup: float


def growth_table(reps) -> list[GrowthRow]:
    """n-th roots plus the Fekete running inf / sup from a list of reports."""
    rows = []
    inf_db, sup_lam = math.inf, 0.0
    for r in reps:
        db = r.d_begin ** (1.0 / r.n)
        lam = r.lambda_n ** (1.0 / r.n)
        inf_db = min(inf_db, db)
        sup_lam = max(sup_lam, lam)
        rows.append(GrowthRow(r.n, db, r.d_end ** (1.0 / r.n), lam, inf_db, sup_lam))
    return rows


def growth_rates(m: PiecewiseMap, n_max: int, cap: int = DEFAULT_CAP, seed: int = DEFAULT_SEED):
    """Growth table for ``n <= n_max`` (the running inf/sup estimate the limits)."""
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    return growth_table(reports(m, n_max, cap, seed))
