"""Upper bounds on the essential spectral radius of the transfer operator.

All bounds are n-th roots evaluated at the level of a
:class:`~pwexpand.complexity.ComplexityReport`.  The quantities under the
roots are submultiplicative in ``n``, so the smallest value seen over
``n = 1..n_max`` is also an upper estimate of the limit; :func:`running_min`
reports it.

The Sobolev and BV bounds use the singular-value expansion ``lambda_n``; the
commuting-affine bound uses eigenvalue moduli.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .complexity import ComplexityReport
from .maps import AffineBranch, PiecewiseMap, matrices_commute


class BoundError(ValueError):
    pass


class ParameterDomainError(BoundError):
    """Raised with the name of the violated parameter inequality."""


class NonCommutingError(BoundError):
    pass


@dataclass(frozen=True)
class BoundInputs:
    """Parameters of the Sobolev-space bound; checks ``0 < t < min(1/p, alpha)``."""

    p: float
    t: float
    alpha: float = 1.0

    def __post_init__(self):
        if not self.p > 1:
            raise ParameterDomainError(f"p > 1 violated (p = {self.p})")
        if not math.isfinite(self.p):
            raise ParameterDomainError("p < infinity violated")
        if not self.t > 0:
            raise ParameterDomainError(f"0 < t violated (t = {self.t})")
        if not self.t < 1.0 / self.p:
            raise ParameterDomainError(f"t < 1/p violated (t = {self.t}, 1/p = {1.0 / self.p:.6g})")
        if not 0 < self.alpha <= 1:
            raise ParameterDomainError(f"0 < alpha <= 1 violated (alpha = {self.alpha})")
        if not self.t < self.alpha:
            raise ParameterDomainError(f"t < alpha violated (t = {self.t}, alpha = {self.alpha})")


def _sobolev_log(report: ComplexityReport, p: float, t: float, pf_weight: bool) -> float:
    n = report.n
    return (
        math.log(report.d_begin) / (p * n)
        + (1.0 - 1.0 / p) * math.log(report.d_end) / n
        + report.log_sup(1.0 / p, t, pf_weight=pf_weight) / n
    )


def sobolev_radius_bound(m: PiecewiseMap | None, report: ComplexityReport, p: float, t: float) -> float:
    """``(D^b)^{1/(pn)} (D^e)^{(1-1/p)/n} ||g^(n) |det DT^n|^{1/p} lambda_n^{-t}||^{1/n}``.

    The sup is taken per cylinder of the pointwise product.
    """
    alpha = 1.0 if m is None else m.alpha
    BoundInputs(p, t, alpha)
    return math.exp(_sobolev_log(report, p, t, pf_weight=False))


@dataclass(frozen=True)
class ConditionResult:
    value: float
    passed: bool


def physical_condition(m: PiecewiseMap | None, report: ComplexityReport, p: float, t: float) -> ConditionResult:
    """Sobolev bound with ``g = 1/|det DT|``; passes iff the value is < 1."""
    alpha = 1.0 if m is None else m.alpha
    BoundInputs(p, t, alpha)
    v = math.exp(_sobolev_log(report, p, t, pf_weight=True))
    return ConditionResult(v, v < 1.0)


def bv_radius_bound(m: PiecewiseMap | None, report: ComplexityReport) -> float:
    """``(D_n^b)^{1/n} ||g^(n) |det DT^n| lambda_n^{-1}||^{1/n}``; needs Lipschitz derivatives."""
    if m is not None and m.alpha < 1.0:
        raise BoundError(f"BV bound needs Lipschitz derivatives (alpha = 1), map has alpha = {m.alpha}")
    n = report.n
    return math.exp(math.log(report.d_begin) / n + report.log_sup(1.0, 1.0) / n)


def running_min(values):
    """Running minimum (the Fekete estimate of a submultiplicative root)."""
    out, best = [], math.inf
    for v in values:
        best = min(best, v)
        out.append(best)
    return out


# -- commuting affine maps --------------------------------------------------


@dataclass
class CommutingBound:
    bound: float
    lam: float
    sides: int
    distinct_products: list[int]
    j_table: list[int]
    d_begin_upper: list[float]
    dim: int

    def to_dict(self) -> dict:
        return {
            "bound": self.bound,
            "lambda_eig": self.lam,
            "sides": self.sides,
            "distinct_products": self.distinct_products,
            "J": self.j_table,
            "d_begin_upper": self.d_begin_upper,
        }


def _distinct_products(mats, k: int) -> int:
    """Number of distinct products of length ``k`` (commuting matrices)."""
    uniq = []
    for mi in _unique_matrices(mats):
        uniq.append(mi)
    seen = set()
    for combo in itertools.combinations_with_replacement(range(len(uniq)), k):
        prod = np.eye(uniq[0].shape[0])
        for i in combo:
            prod = prod @ uniq[i]
        scale = max(1.0, float(np.max(np.abs(prod))))
        seen.add(tuple(np.round(prod / scale, 10).ravel()) + (round(math.log(scale), 10),))
    return len(seen)


def _unique_matrices(mats):
    out = []
    for a in mats:
        if not any(np.allclose(a, b, rtol=0, atol=1e-12) for b in out):
            out.append(a)
    return out


def count_sides(m: PiecewiseMap) -> int:
    """Total number of facets over all branch domains."""
    return sum(int(br.domain.A.shape[0]) for br in m.branches)


def affine_commuting_bound(m: PiecewiseMap, n_max: int = 6) -> CommutingBound:
    """``lambda^{-1}`` with ``lambda`` the least eigenvalue modulus, plus ``J(n)`` and ``2 J(n)^d``."""
    if not m.is_affine:
        raise NonCommutingError("commuting bound needs an affine map")
    mats = [br.matrix for br in m.branches]
    if not matrices_commute(mats):
        raise NonCommutingError("branch matrices do not pairwise commute")
    lam = min(float(np.abs(np.linalg.eigvals(a)).min()) for a in mats)
    if not lam > 1:
        raise BoundError(f"least eigenvalue modulus {lam:g} is not > 1")
    K = count_sides(m)
    distinct, J, upper = [], [], []
    total = 0
    for k in range(1, n_max + 1):
        c = _distinct_products(mats, k)
        distinct.append(c)
        total += c
        J.append(K * total)
        upper.append(2.0 * float(K * total) ** m.dim)
    return CommutingBound(1.0 / lam, lam, K, distinct, J, upper, m.dim)


def loglog_slope(ns, values) -> float:
    """Least-squares slope of log(value) against log(n)."""
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


# -- Saussol-type bounds -----------------------------------------------------


def unit_ball_volume(d: int) -> float:
    """``pi^{d/2} / Gamma(d/2 + 1)``; 1 for ``d = 0``."""
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


def saussol_bound(lambda_1: float, d1b: int, dim: int, alpha: float) -> float:
    """``lambda^{-alpha} + 4 gamma_d D_1^b / ((lambda - 1) gamma_{d-1})``."""
    if not lambda_1 > 1:
        raise BoundError(f"lambda_1 must exceed 1 (got {lambda_1:g})")
    if dim < 1:
        raise BoundError("dim must be >= 1")
    if not 0 < alpha <= 1:
        raise ParameterDomainError(f"0 < alpha <= 1 violated (alpha = {alpha})")
    return lambda_1 ** (-alpha) + 4.0 * unit_ball_volume(dim) * d1b / ((lambda_1 - 1.0) * unit_ball_volume(dim - 1))


@dataclass
class IteratedBound:
    value: float
    complexity_term: float
    expansion_term: float
    complexity_roots: list[float] = field(default_factory=list)
    expansion_roots: list[float] = field(default_factory=list)


def saussol_iterated_bound(reports, alpha: float) -> IteratedBound:
    """``sup{lim lambda_n^{-1/n} (D_n^b)^{1/n}, lim lambda_n^{-alpha/n}}`` via running minima."""
    if not reports:
        raise BoundError("no reports")
    if not 0 < alpha <= 1:
        raise ParameterDomainError(f"0 < alpha <= 1 violated (alpha = {alpha})")
    comp = [(r.d_begin / r.lambda_n) ** (1.0 / r.n) for r in reports]
    expn = [r.lambda_n ** (-alpha / r.n) for r in reports]
    c = running_min(comp)[-1]
    e = running_min(expn)[-1]
    return IteratedBound(max(c, e), c, e, comp, expn)


# -- parameter search ---------------------------------------------------------

T_GRID = tuple(round(0.05 * i, 2) for i in range(1, 20))
P_GRID = (1.05, 1.1, 1.15, 1.2, 1.25, 1.3, 1.4, 1.5, 1.6, 1.8, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0, 16.0)


@dataclass(frozen=True)
class SearchResult:
    p: float
    t: float
    value: float
    passing_pairs: int
    tried_pairs: int


def search_parameters(m: PiecewiseMap | None, report: ComplexityReport, alpha: float | None = None):
    """Grid search for ``(p, t)`` minimising the physical condition; ``None`` if none passes."""
    alpha = (1.0 if m is None else m.alpha) if alpha is None else alpha
    best = None
    tried = passing = 0
    for p in P_GRID:
        for t in T_GRID:
            if not (t < 1.0 / p and t < alpha):
                continue
            tried += 1
            v = math.exp(_sobolev_log(report, p, t, pf_weight=True))
            if v < 1.0:
                passing += 1
                if best is None or v < best[2]:
                    best = (p, t, v)
    if best is None:
        return None
    return SearchResult(best[0], best[1], best[2], passing, tried)


def hypothesis_value(report: ComplexityReport) -> float:
    """``(D_n^b)^{1/n} lambda_n^{-1/n}`` (must be < 1 for the search to make sense)."""
    return (report.d_begin / report.lambda_n) ** (1.0 / report.n)
