"""Piecewise uniformly expanding maps.

Two branch kinds are supported: affine branches ``x -> A x + c`` on polytope
domains (any dimension) and monotone smooth branches on intervals (1D only).
A :class:`PiecewiseMap` bundles the branches with its ambient space, which is
a box or a finite union of boxes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from . import kernels
from .geometry import (
    Interval,
    Polytope,
    affine_image,
    get_tolerance,
    intersect,
    volume,
)

PERRON_FROBENIUS = "perron_frobenius"
CUSTOM = "custom"

VALIDATION_POINTS = 1024


class MapError(ValueError):
    pass


class OutsideDomainError(MapError):
    pass


class _Boundary:
    """Returned by :func:`apply` for points on a piece boundary."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "BOUNDARY"

    def __bool__(self):
        return False


BOUNDARY = _Boundary()


@dataclass(frozen=True, eq=False)
class AffineBranch:
    domain: Polytope
    matrix: np.ndarray
    offset: np.ndarray
    weight: Callable | None = None

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        c = np.atleast_1d(np.asarray(self.offset, dtype=float))
        d = self.domain.dim
        if m.shape != (d, d) or c.shape != (d,):
            raise MapError(f"affine branch shapes do not match dimension {d}")
        if abs(np.linalg.det(m)) <= 1e-12:
            raise MapError("affine branch matrix is singular")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "offset", c)

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.matrix))

    @property
    def sigma_min(self) -> float:
        """Smallest singular value: the pointwise expansion ``inf |DT v|/|v|``."""
        return float(np.linalg.svd(self.matrix, compute_uv=False).min())

    @property
    def eig_min(self) -> float:
        return float(np.abs(np.linalg.eigvals(self.matrix)).min())

    def forward(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.matrix.T + self.offset

    def image(self) -> Polytope:
        return affine_image(self.domain, self.matrix, self.offset)


@dataclass(frozen=True, eq=False)
class SmoothBranch1D:
    """Monotone ``C^{1+alpha}`` branch on an interval.

    ``hoelder_constant`` bounds ``|T'(x) - T'(y)| / |x - y|^alpha``; when given,
    the expansion infimum found on the validation grid is certified.
    ``alpha == 1`` declares a Lipschitz derivative.
    """

    domain: Interval
    forward: Callable
    derivative: Callable
    hoelder_alpha: float = 1.0
    hoelder_constant: float | None = None
    weight: Callable | None = None
    source: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.domain.empty:
            raise MapError("smooth branch on an empty interval")
        if not 0 < self.hoelder_alpha <= 1:
            raise MapError("hoelder_alpha must lie in (0, 1]")

    @property
    def domain_polytope(self) -> Polytope:
        return self.domain.to_polytope()

    def validation_grid(self, n: int = VALIDATION_POINTS) -> np.ndarray:
        lo, hi = self.domain.lo, self.domain.hi
        return lo + (hi - lo) * (np.arange(n) + 0.5) / n

    def expansion_check(self):
        """(grid minimum of |T'|, certified lower bound or None, monotone)."""
        xs = self.validation_grid()
        der = np.abs(np.asarray(self.derivative(xs), dtype=float))
        fx = np.asarray(self.forward(xs), dtype=float)
        steps = np.diff(fx)
        monotone = bool(np.all(steps > 0) or np.all(steps < 0))
        gmin = float(np.min(der)) if np.all(np.isfinite(der)) else float(np.nanmin(der[np.isfinite(der)]))
        certified = None
        if self.hoelder_constant is not None:
            h = (self.domain.hi - self.domain.lo) / VALIDATION_POINTS
            certified = gmin - self.hoelder_constant * (h / 2.0) ** self.hoelder_alpha
        return gmin, certified, monotone

    @property
    def increasing(self) -> bool:
        lo, hi = self.domain.lo, self.domain.hi
        return float(self.forward(hi)) > float(self.forward(lo))

    def image(self) -> Interval:
        a = float(self.forward(self.domain.lo))
        b = float(self.forward(self.domain.hi))
        return Interval(min(a, b), max(a, b))

    def inverse(self, y: float) -> float:
        """Preimage of ``y`` inside the domain (clamped to the endpoints)."""
        lo, hi = self.domain.lo, self.domain.hi
        flo = float(self.forward(lo)) - y
        fhi = float(self.forward(hi)) - y
        if flo == 0.0:
            return lo
        if fhi == 0.0:
            return hi
        if flo * fhi > 0:
            return lo if abs(flo) < abs(fhi) else hi
        return brentq(lambda s: float(self.forward(s)) - y, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


Branch = AffineBranch | SmoothBranch1D


def branch_domain(branch) -> Polytope:
    if isinstance(branch, AffineBranch):
        return branch.domain
    return branch.domain_polytope


class PiecewiseMap:
    """A piecewise expanding map on a union of ambient boxes."""

    def __init__(self, branches: Sequence, ambient, weight_kind: str = PERRON_FROBENIUS, name: str = ""):
        if isinstance(ambient, Polytope):
            ambient = (ambient,)
        self.ambient = tuple(ambient)
        self.branches = tuple(branches)
        self.weight_kind = weight_kind
        self.name = name
        if not self.branches:
            raise MapError("a map needs at least one branch")
        dims = {branch_domain(b).dim for b in self.branches} | {p.dim for p in self.ambient}
        if len(dims) != 1:
            raise MapError(f"inconsistent dimensions {sorted(dims)}")
        self.dim = dims.pop()
        if self.dim > 1 and not self.is_affine:
            raise MapError("smooth branches are only supported in dimension 1")
        if weight_kind not in (PERRON_FROBENIUS, CUSTOM):
            raise MapError(f"unknown weight kind {weight_kind!r}")
        if weight_kind == CUSTOM and any(b.weight is None for b in self.branches):
            raise MapError("custom weight requires a weight on every branch")
        self._packed = None

    def __repr__(self):
        return f"PiecewiseMap({self.name or '?'}, dim={self.dim}, branches={len(self.branches)})"

    @property
    def is_affine(self) -> bool:
        return all(isinstance(b, AffineBranch) for b in self.branches)

    @property
    def alpha(self) -> float:
        """Hoelder exponent of the derivative (1 for affine maps)."""
        return min((b.hoelder_alpha for b in self.branches if isinstance(b, SmoothBranch1D)), default=1.0)

    @property
    def domains(self) -> list[Polytope]:
        return [branch_domain(b) for b in self.branches]

    def ambient_volume(self) -> float:
        return sum(volume(p) for p in self.ambient)

    def packed(self):
        """Flat arrays describing an affine map, as consumed by the kernels."""
        if not self.is_affine:
            raise MapError("packed form exists only for affine maps")
        if self._packed is None:
            As, bs, start = [], [], [0]
            for br in self.branches:
                As.append(br.domain.A)
                bs.append(br.domain.b)
                start.append(start[-1] + br.domain.A.shape[0])
            self._packed = (
                np.ascontiguousarray(np.vstack(As)),
                np.ascontiguousarray(np.concatenate(bs)),
                np.asarray(start, dtype=np.int64),
                np.ascontiguousarray(np.stack([br.matrix for br in self.branches])),
                np.ascontiguousarray(np.stack([br.offset for br in self.branches])),
            )
        return self._packed

    def locate(self, X, tol: float | None = None):
        """Per point: (number of branch closures containing it, last such branch)."""
        tol = get_tolerance() if tol is None else tol
        X = np.atleast_2d(np.asarray(X, dtype=float))
        count = np.zeros(X.shape[0], dtype=np.int64)
        found = np.full(X.shape[0], -1, dtype=np.int64)
        for k, dom in enumerate(self.domains):
            hit = dom.slack(X) <= tol
            count += hit
            found[hit] = k
        return count, found

    def step(self, X, tol: float | None = None):
        """One step on many points: ``(Y, flags)`` with kernel status flags."""
        tol = get_tolerance() if tol is None else tol
        X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=float)))
        if self.is_affine:
            return kernels.step_points(X, *self.packed(), tol)
        count, found = self.locate(X, tol)
        Y = X.copy()
        ok = count == 1
        for k, br in enumerate(self.branches):
            sel = ok & (found == k)
            if sel.any():
                if isinstance(br, AffineBranch):
                    Y[sel] = br.forward(X[sel])
                else:
                    Y[sel, 0] = np.asarray(br.forward(X[sel, 0]), dtype=float)
        flags = np.zeros(X.shape[0], dtype=np.int8)
        flags[count > 1] = kernels.STATUS_BOUNDARY
        flags[count == 0] = kernels.STATUS_ESCAPE
        return Y, flags

    def jacobian_abs(self, k: int, X) -> np.ndarray:
        """``|det DT|`` of branch ``k`` at the points ``X``."""
        br = self.branches[k]
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if isinstance(br, AffineBranch):
            return np.full(X.shape[0], abs(br.det))
        return np.abs(np.asarray(br.derivative(X[:, 0]), dtype=float))


# -- validation -------------------------------------------------------------


@dataclass
class ValidationReport:
    disjointness_defect: float
    covering_defect: float
    image_defect: float
    branch_expansion: list[float]
    branch_eigen_expansion: list[float | None]
    expansion_certified: list[bool]
    monotone: list[bool]
    commuting: bool
    eventually_expanding: bool
    failures: list[str]

    @property
    def accepted(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "disjointness_defect": self.disjointness_defect,
            "covering_defect": self.covering_defect,
            "image_defect": self.image_defect,
            "branch_expansion": self.branch_expansion,
            "branch_eigen_expansion": self.branch_eigen_expansion,
            "expansion_certified": self.expansion_certified,
            "monotone": self.monotone,
            "commuting": self.commuting,
            "eventually_expanding": self.eventually_expanding,
            "failures": self.failures,
        }


DISJOINT_TOL = 1e-9
COVER_TOL = 1e-6
IMAGE_TOL = 1e-9


def matrices_commute(mats, tol: float = 1e-9) -> bool:
    for a, b in itertools.combinations(mats, 2):
        if np.max(np.abs(a @ b - b @ a)) > tol * max(1.0, np.max(np.abs(a)) * np.max(np.abs(b))):
            return False
    return True


def _volume_inside(p: Polytope, ambient) -> float:
    return sum(volume(intersect(p, box)) for box in ambient)


def validate(m: PiecewiseMap) -> ValidationReport:
    """Check the piecewise-expanding hypotheses; never raises on failure."""
    failures: list[str] = []
    vol_x = m.ambient_volume()
    doms = m.domains

    overlap = 0.0
    for (i, p), (j, q) in itertools.combinations(enumerate(doms), 2):
        v = volume(intersect(p, q))
        if v > overlap:
            overlap = v
        if v > DISJOINT_TOL * vol_x:
            failures.append(f"branches {i} and {j} overlap (volume {v:.6g})")

    inside = [_volume_inside(p, m.ambient) for p in doms]
    outside = sum(volume(p) - v for p, v in zip(doms, inside))
    cover = (abs(sum(inside) - vol_x) + outside) / vol_x
    if cover > COVER_TOL:
        failures.append(f"domains do not cover the ambient space (defect {cover:.6g})")

    image_defect = 0.0
    expansion, eig_exp, certified, monotone = [], [], [], []
    for k, br in enumerate(m.branches):
        if isinstance(br, AffineBranch):
            img = br.image()
            expansion.append(br.sigma_min)
            eig_exp.append(br.eig_min)
            certified.append(True)
            monotone.append(True)
        else:
            iv = br.image()
            img = iv.to_polytope()
            gmin, cert, mono = br.expansion_check()
            expansion.append(cert if cert is not None else gmin)
            eig_exp.append(None)
            certified.append(cert is not None)
            monotone.append(mono)
            if not mono:
                failures.append(f"branch {k} is not monotone on its domain")
        if not img.empty:
            out = volume(img) - _volume_inside(img, m.ambient)
            image_defect = max(image_defect, out / vol_x)
            if out > IMAGE_TOL * vol_x:
                failures.append(f"branch {k} image leaves the ambient space (volume {out:.6g})")

    commuting = m.is_affine and matrices_commute([b.matrix for b in m.branches])
    eventually = False
    weak = [k for k, lam in enumerate(expansion) if not lam > 1.0]
    if weak:
        if m.is_affine and commuting and all(e is not None and e > 1.0 for e in eig_exp):
            eventually = True
        else:
            for k in weak:
                failures.append(f"branch {k} is not expanding (lambda = {expansion[k]:.6g} <= 1)")

    return ValidationReport(
        disjointness_defect=overlap,
        covering_defect=cover,
        image_defect=image_defect,
        branch_expansion=expansion,
        branch_eigen_expansion=eig_exp,
        expansion_certified=certified,
        monotone=monotone,
        commuting=bool(commuting),
        eventually_expanding=eventually,
        failures=failures,
    )


# -- pointwise evaluation ---------------------------------------------------


def apply(m: PiecewiseMap, x, tol: float | None = None):
    """``T(x)``, or :data:`BOUNDARY` when ``x`` sits on a piece boundary."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    count, found = m.locate(x[None, :], tol)
    if count[0] == 0:
        raise OutsideDomainError(f"{x.tolist()} lies outside every branch domain")
    if count[0] > 1:
        return BOUNDARY
    br = m.branches[int(found[0])]
    if isinstance(br, AffineBranch):
        return br.forward(x)
    return np.array([float(br.forward(x[0]))])


def branch_weight(m: PiecewiseMap, branch_id: int, x) -> float:
    """Weight ``g`` of the transfer operator on one branch."""
    br = m.branches[branch_id]
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if m.weight_kind == CUSTOM:
        if m.dim == 1:
            return float(br.weight(x[0]))
        return float(br.weight(x))
    if isinstance(br, AffineBranch):
        return 1.0 / abs(br.det)
    return 1.0 / abs(float(br.derivative(x[0])))


def branch_weights(m: PiecewiseMap, branch_id: int, X) -> np.ndarray:
    """Vectorised :func:`branch_weight`."""
    br = m.branches[branch_id]
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if m.weight_kind == CUSTOM:
        arg = X[:, 0] if m.dim == 1 else X
        return np.broadcast_to(np.asarray(br.weight(arg), dtype=float), (X.shape[0],)).copy()
    return 1.0 / m.jacobian_abs(branch_id, X)
