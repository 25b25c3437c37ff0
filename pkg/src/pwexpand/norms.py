"""Grid surrogates of the BV, Sobolev and oscillation (semi)norms.

All functions take a :class:`~pwexpand.grid.GridFunction` on a single-box
grid and treat it as the piecewise-constant function it represents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .grid import GridError, GridFunction


class NormError(ValueError):
    pass


def _box_array(u: GridFunction) -> np.ndarray:
    if not u.grid.is_box:
        raise GridError("norms need a single-box grid")
    return u.as_array()


@dataclass(frozen=True)
class BVNorm:
    l1: float
    variation: float

    @property
    def total(self) -> float:
        return self.l1 + self.variation


def _axis_jumps(arr: np.ndarray, axis: int) -> np.ndarray:
    return np.abs(np.diff(arr, axis=axis))


def bv_norm(u: GridFunction) -> BVNorm:
    """``(||u||_L1, V(u))`` with ``V(u) = d^{-1} sum_axes sum |jumps| * face area``.

    Only faces between two cells count: the variation is that of the
    piecewise-constant function on the open box.
    """
    arr = _box_array(u)
    g = u.grid
    d = g.dim
    h = g.widths[0]
    l1 = float(np.sum(np.abs(arr)) * g.cell_volume)
    var = 0.0
    for a in range(d):
        face = g.cell_volume / h[a]
        var += float(np.sum(_axis_jumps(arr, a))) * face
    return BVNorm(l1, float(var / d))


@dataclass
class FubiniTable:
    """Per-axis line norms: ``line_norms[a]`` has one entry per grid line along axis ``a``."""

    line_norms: list
    transverse_measure: list
    axis_totals: list

    @property
    def total(self) -> float:
        return sum(self.axis_totals) / len(self.axis_totals)


def fubini_decompose(u: GridFunction) -> FubiniTable:
    """Split the BV norm into 1D BV norms of the lines along each axis.

    Each line norm is ``sum |u| h_a + sum |jumps|``; weighting by the
    transverse cell measure and averaging over axes gives back ``bv_norm``.
    """
    arr = _box_array(u)
    g = u.grid
    h = g.widths[0]
    norms, trans, totals = [], [], []
    for a in range(g.dim):
        lines = np.moveaxis(arr, a, -1).reshape(-1, arr.shape[a])
        line_l1 = np.sum(np.abs(lines), axis=1) * h[a]
        line_var = np.sum(np.abs(np.diff(lines, axis=1)), axis=1)
        ln = line_l1 + line_var
        tm = g.cell_volume / h[a]
        norms.append(ln)
        trans.append(tm)
        totals.append(float(np.sum(ln) * tm))
    return FubiniTable(norms, trans, totals)


def discrete_lipschitz(gf: GridFunction) -> float:
    """Largest ``|g(c') - g(c)| / h`` over axis-adjacent cells."""
    arr = _box_array(gf)
    h = gf.grid.widths[0]
    best = 0.0
    for a in range(gf.grid.dim):
        if arr.shape[a] > 1:
            best = max(best, float(np.max(_axis_jumps(arr, a))) / h[a])
    return best


def sobolev_norm(u: GridFunction, p: float, t: float) -> float:
    """Discrete ``||F^{-1}((1 + |xi|^2)^{t/2} F u)||_{L^p}`` with a periodic extension.

    ``xi = 2 pi k / L`` for integer mode ``k`` on an axis of length ``L``.
    """
    if not p > 1 or not math.isfinite(p):
        raise NormError("p must lie in (1, inf)")
    if t < 0:
        raise NormError("t must be >= 0")
    arr = _box_array(u)
    g = u.grid
    if t == 0:
        v = arr
    else:
        F = np.fft.fftn(arr)
        xi2 = np.zeros(arr.shape)
        for a in range(g.dim):
            k = np.fft.fftfreq(arr.shape[a], d=g.widths[0][a])
            shape = [1] * g.dim
            shape[a] = -1
            xi2 = xi2 + (2.0 * math.pi * k.reshape(shape)) ** 2
        v = np.fft.ifftn(F * (1.0 + xi2) ** (t / 2.0))
        if not np.iscomplexobj(arr):
            v = v.real
    return float((np.sum(np.abs(v) ** p) * g.cell_volume) ** (1.0 / p))


def _ball_footprint(widths, eps):
    r = [int(math.floor(eps / w + 1e-12)) for w in widths]
    grids = np.meshgrid(*[np.arange(-k, k + 1) * w for k, w in zip(r, widths)], indexing="ij")
    dist2 = sum(x**2 for x in grids)
    return dist2 <= eps * eps * (1 + 1e-12)


def oscillation_seminorm(u: GridFunction, alpha: float, eps0: float, return_ladder: bool = False):
    """``sup_eps eps^{-alpha} sum_c vol(c) osc(u, window_eps(c))`` on a dyadic ladder.

    ``window_eps(c)`` holds the cells of the box whose centers are within
    ``eps`` of the center of ``c``; the integral runs over the box.  The ladder
    is ``eps0, eps0/2, ...`` down to two cell widths.
    """
    if not 0 < alpha <= 1:
        raise NormError("alpha must lie in (0, 1]")
    arr = _box_array(u)
    if np.iscomplexobj(arr):
        raise NormError("oscillation needs a real function")
    g = u.grid
    widths = g.widths[0]
    hmax = float(np.max(widths))
    if eps0 < 2 * hmax * (1 - 1e-12):
        raise NormError(f"eps0 = {eps0:g} is below two cell widths ({2 * hmax:g})")
    ladder = []
    eps = eps0
    while eps >= 2 * hmax * (1 - 1e-12):
        fp = _ball_footprint(widths, eps)
        hi = ndimage.maximum_filter(arr, footprint=fp, mode="constant", cval=-np.inf)
        lo = ndimage.minimum_filter(arr, footprint=fp, mode="constant", cval=np.inf)
        val = float(np.sum(hi - lo) * g.cell_volume) * eps ** (-alpha)
        ladder.append((eps, val))
        eps /= 2.0
    best = max(v for _, v in ladder)
    return (best, ladder) if return_ladder else best


def hoelder_seminorm(values: np.ndarray, points: np.ndarray, alpha: float) -> float:
    """``sup |f(x) - f(y)| / |x - y|^alpha`` over all sample pairs."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if P.shape[0] == 1 and P.shape[1] > 1:
        P = P.T
    f = np.asarray(values, dtype=float)
    best = 0.0
    for i in range(f.shape[0] - 1):
        d = np.linalg.norm(P[i + 1:] - P[i], axis=1)
        ok = d > 0
        if ok.any():
            best = max(best, float(np.max(np.abs(f[i + 1:][ok] - f[i]) / d[ok] ** alpha)))
    return best
