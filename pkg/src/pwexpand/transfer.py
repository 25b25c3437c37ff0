"""Ulam discretisation of the transfer operator and its spectrum.

Orientation: densities are column vectors and ``M[j, i]`` is the weighted
fraction of source cell ``i`` that lands in target cell ``j``::

    M[j, i] = (1 / vol(cell_i)) * integral over cell_i ∩ T^{-1} cell_j of g |det DT|

With the Perron-Frobenius weight every column sums to one (mass balance).
All cells have equal volume, so mass vectors and density vectors are
interchangeable up to one factor.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigs

from . import kernels
from .geometry import affine_preimage, intersect, volume
from .grid import Grid, GridFunction
from .maps import CUSTOM, PERRON_FROBENIUS, AffineBranch, PiecewiseMap, branch_weights
from .output import csv_text, json_text

EXACT_AFFINE = "exact_affine"
EXACT_SMOOTH1D = "exact_smooth1d"
MONTE_CARLO = "monte_carlo"

DENSE_LIMIT = 2048
PERIPHERAL_TOL = 1e-6
ROOT_ORDER_CAP = 64
DEFAULT_MC_SAMPLES = 256


class TransferError(RuntimeError):
    pass


class SpectralError(TransferError):
    def __init__(self, message: str, residual: float | None = None):
        self.residual = residual
        super().__init__(message)


@dataclass
class UlamOperator:
    grid: Grid
    matrix: sp.csr_matrix = field(repr=False)
    weight_kind: str
    assembly: str
    samples: int | None = None
    seed: int | None = None
    map_name: str = ""

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def apply(self, u):
        vals = u.values if isinstance(u, GridFunction) else np.asarray(u)
        return self.matrix @ vals

    def column_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=0)).ravel()

    def metadata(self) -> dict:
        return {
            "map": self.map_name,
            "grid": self.grid.metadata(),
            "assembly": self.assembly,
            "weight_kind": self.weight_kind,
            "samples": self.samples,
            "seed": self.seed,
            "shape": list(self.matrix.shape),
            "nnz": int(self.matrix.nnz),
            "orientation": "columns are source cells",
        }


# -- assembly ---------------------------------------------------------------


def _finish(rows, cols, vals, n):
    M = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    M.sum_duplicates()
    M.sort_indices()
    return M


def _assemble_1d(m: PiecewiseMap, grid: Grid):
    """Exact 1D assembly on the common refinement of source and pulled-back target edges."""
    from .complexity import _derivative, _forward, _interval_of, _inverse

    edges = np.unique(np.concatenate([grid.cell_lo[:, 0], grid.cell_hi[:, 0]]))
    rows, cols, vals = [], [], []
    for k, br in enumerate(m.branches):
        dom = _interval_of(br)
        fa, fb = float(_forward(br, dom.lo)), float(_forward(br, dom.hi))
        ilo, ihi = min(fa, fb), max(fa, fb)
        src = edges[(edges > dom.lo) & (edges < dom.hi)]
        tgt = edges[(edges > ilo) & (edges < ihi)]
        if isinstance(br, AffineBranch):
            pulled = (tgt - br.offset[0]) / br.matrix[0, 0]
        else:
            pulled = np.array([_inverse(br, y) for y in tgt])
        pts = np.unique(np.concatenate([[dom.lo, dom.hi], src, pulled]))
        pts = pts[(pts >= dom.lo) & (pts <= dom.hi)]
        a, b = pts[:-1], pts[1:]
        keep = b - a > 0
        a, b = a[keep], b[keep]
        mid = 0.5 * (a + b)
        length = b - a
        if m.weight_kind == CUSTOM:
            w = branch_weights(m, k, mid[:, None]) * np.abs(_derivative(br, mid))
        else:
            w = np.ones_like(mid)
        i = grid.cell_of(mid[:, None])
        j = grid.cell_of(np.asarray(_forward(br, mid), dtype=float)[:, None])
        ok = (i >= 0) & (j >= 0)
        rows.append(j[ok])
        cols.append(i[ok])
        vals.append(w[ok] * length[ok] / grid.cell_volume)
    return _finish(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), grid.size)


def _cells_in_bbox(grid: Grid, lo, hi):
    sel = np.all((grid.cell_hi > lo) & (grid.cell_lo < hi), axis=1)
    return np.nonzero(sel)[0]


def _assemble_2d(m: PiecewiseMap, grid: Grid):
    rows, cols, vals = [], [], []
    for k, br in enumerate(m.branches):
        A, c = br.matrix, br.offset
        det = abs(br.det)
        dlo, dhi = br.domain.bbox()
        for i in _cells_in_bbox(grid, dlo, dhi):
            lo, hi = grid.cell_lo[i], grid.cell_hi[i]
            square = np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])
            piece = kernels.clip_polygon(square, br.domain.A, br.domain.b)
            if piece.shape[0] < 3 or abs(kernels.polygon_area(piece)) <= 0.0:
                continue
            img = piece @ A.T + c
            if np.linalg.det(A) < 0:
                img = img[::-1].copy()
            targets = _cells_in_bbox(grid, img.min(axis=0), img.max(axis=0))
            if targets.size == 0:
                continue
            areas = kernels.clip_area_boxes(img, grid.cell_lo[targets], grid.cell_hi[targets]) / det
            nz = areas > 0
            w = 1.0
            if m.weight_kind == CUSTOM:
                ctr = piece.mean(axis=0)
                w = float(branch_weights(m, k, ctr[None, :])[0]) * det
            rows.append(targets[nz])
            cols.append(np.full(int(nz.sum()), i))
            vals.append(w * areas[nz] / grid.cell_volume)
    return _finish(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), grid.size)


def _assemble_nd(m: PiecewiseMap, grid: Grid):
    """Generic exact path through polytope operations (used for dim 3)."""
    rows, cols, vals = [], [], []
    for k, br in enumerate(m.branches):
        det = abs(br.det)
        dlo, dhi = br.domain.bbox()
        for i in _cells_in_bbox(grid, dlo, dhi):
            piece = intersect(grid.cell_polytope(i), br.domain)
            if piece.empty:
                continue
            V = piece.vertices @ br.matrix.T + br.offset
            targets = _cells_in_bbox(grid, V.min(axis=0), V.max(axis=0))
            w = 1.0
            if m.weight_kind == CUSTOM:
                w = float(branch_weights(m, k, piece.centroid()[None, :])[0]) * det
            for j in targets:
                pre = intersect(piece, affine_preimage(grid.cell_polytope(j), br.matrix, br.offset))
                v = volume(pre)
                if v > 0:
                    rows.append(j)
                    cols.append(i)
                    vals.append(w * v / grid.cell_volume)
    return _finish(np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64), np.array(vals), grid.size)


def _assemble_mc(m: PiecewiseMap, grid: Grid, samples: int, seed: int):
    rng = np.random.default_rng(seed)
    n = grid.size
    src = np.repeat(np.arange(n), samples)
    X = grid.sample_uniform(src, rng)
    Y, flags = m.step(X)
    count, found = m.locate(X)
    ok = flags == kernels.STATUS_OK
    j = grid.cell_of(Y)
    ok &= j >= 0
    w = np.ones(X.shape[0])
    if m.weight_kind == CUSTOM:
        for k in range(len(m.branches)):
            sel = ok & (found == k)
            if sel.any():
                w[sel] = branch_weights(m, k, X[sel]) * m.jacobian_abs(k, X[sel])
    valid = np.bincount(src[ok], minlength=n).astype(float)
    denom = np.where(valid > 0, valid, 1.0)
    return _finish(j[ok], src[ok], w[ok] / denom[src[ok]], n)


def assemble(m: PiecewiseMap, grid: Grid, kind: str | None = None, samples: int = DEFAULT_MC_SAMPLES,
             seed: int = 0) -> UlamOperator:
    """Ulam matrix of the map's weighted transfer operator on ``grid``."""
    if kind is None:
        if m.dim == 1:
            kind = EXACT_AFFINE if m.is_affine else EXACT_SMOOTH1D
        elif m.dim <= 3 and m.is_affine:
            kind = EXACT_AFFINE
        else:
            kind = MONTE_CARLO
    if grid.dim != m.dim:
        raise TransferError("grid and map dimensions differ")
    if kind == MONTE_CARLO:
        M = _assemble_mc(m, grid, samples, seed)
        return UlamOperator(grid, M, m.weight_kind, kind, samples, seed, m.name)
    if kind == EXACT_SMOOTH1D or (kind == EXACT_AFFINE and m.dim == 1):
        if m.dim != 1:
            raise TransferError("exact smooth assembly is one-dimensional")
        if kind == EXACT_AFFINE and not m.is_affine:
            raise TransferError("map has smooth branches; use exact_smooth1d")
        M = _assemble_1d(m, grid)
    elif kind == EXACT_AFFINE:
        if not m.is_affine:
            raise TransferError("exact affine assembly needs an affine map")
        if m.dim == 2:
            M = _assemble_2d(m, grid)
        elif m.dim == 3:
            M = _assemble_nd(m, grid)
        else:
            raise TransferError("exact assembly is limited to dimension <= 3")
    else:
        raise TransferError(f"unknown assembly kind {kind!r}")
    return UlamOperator(grid, M, m.weight_kind, kind, None, None, m.name)


# -- spectrum ---------------------------------------------------------------


@dataclass
class SpectralReport:
    eigenvalues: np.ndarray
    gap: float | None
    second_modulus: float | None
    peripheral: list
    root_of_unity_order: int | None
    lambda_max_defect: float
    norm1: float
    method: str
    essential_bound_comparison: tuple | None = None

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [{"re": float(z.real), "im": float(z.imag), "modulus": float(abs(z))} for z in self.eigenvalues],
            "gap": self.gap,
            "second_modulus": self.second_modulus,
            "peripheral": [{"re": float(z.real), "im": float(z.imag), "multiplicity": k} for z, k in self.peripheral],
            "root_of_unity_order": self.root_of_unity_order,
            "lambda_max_defect": self.lambda_max_defect,
            "norm1": self.norm1,
            "method": self.method,
            "essential_bound_comparison": self.essential_bound_comparison,
        }


def _sort_eigs(z):
    z = np.asarray(z, dtype=complex)
    # clean signed zeros and tiny imaginary parts so the order is stable
    z = np.where(np.abs(z.imag) < 1e-14, z.real + 0j, z)
    key = np.lexsort((np.round(np.angle(z), 9), -np.round(np.abs(z), 12)))
    return z[key]


def _cluster(z, tol):
    groups = []
    for w in z:
        for g in groups:
            if abs(g[0] - w) < tol:
                g[1] += 1
                break
        else:
            groups.append([w, 1])
    return [(complex(g[0]), g[1]) for g in groups]


def root_of_unity_order(values, tol: float = PERIPHERAL_TOL, cap: int = ROOT_ORDER_CAP):
    """Least ``N <= cap`` with ``|z^N - 1| < tol`` for all ``z``; ``None`` if none."""
    values = list(values)
    if not values:
        return None
    for N in range(1, cap + 1):
        if all(abs(z**N - 1) < tol for z in values):
            return N
    return None


def spectrum(op: UlamOperator, k: int = 8) -> SpectralReport:
    """Leading eigenvalues, gap and peripheral structure of the Ulam matrix."""
    if k < 2:
        raise ValueError("k must be >= 2")
    n = op.size
    if n <= DENSE_LIMIT:
        z = _sort_eigs(np.linalg.eigvals(op.matrix.toarray()))
        method = "dense"
        full = True
    else:
        kk = min(k, n - 2)
        v0 = np.full(n, 1.0 / n) + 1e-3 * np.cos(np.arange(n))
        try:
            z = eigs(op.matrix.astype(float), k=kk, which="LM", v0=v0, tol=1e-12, maxiter=50 * n,
                     return_eigenvectors=False)
        except ArpackNoConvergence as exc:
            vals = np.asarray(exc.eigenvalues)
            vecs = np.asarray(exc.eigenvectors)
            res = float(np.max(np.linalg.norm(op.matrix @ vecs - vecs * vals, axis=0))) if vals.size else math.inf
            raise SpectralError(f"eigensolver did not converge (residual {res:.3g})", res) from None
        z = _sort_eigs(z)
        method = "arnoldi"
        full = False
    per = z[np.abs(z) > 1.0 - PERIPHERAL_TOL]
    rest = z[np.abs(z) <= 1.0 - PERIPHERAL_TOL]
    second = float(np.abs(rest).max()) if rest.size else (0.0 if full else None)
    gap = None if second is None else 1.0 - second
    lam_max = float(np.abs(z[0])) if z.size else 0.0
    norm1 = float(op.column_sums().max()) if op.matrix.nnz else 0.0
    return SpectralReport(
        eigenvalues=z[:k],
        gap=gap,
        second_modulus=second,
        peripheral=_cluster(per, PERIPHERAL_TOL),
        root_of_unity_order=root_of_unity_order(per),
        lambda_max_defect=abs(lam_max - 1.0),
        norm1=norm1,
        method=method,
    )


# -- projectors -----------------------------------------------------------------


def cesaro_project(op: UlamOperator, u: GridFunction, gamma: complex = 1.0, n_terms: int = 100) -> GridFunction:
    """``(1/n) sum_{i<n} gamma^{-i} M^i u``."""
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    if abs(abs(gamma) - 1.0) > 1e-12:
        raise ValueError("|gamma| must be 1")
    real = abs(complex(gamma).imag) < 1e-15
    x = u.values.astype(float if real and not np.iscomplexobj(u.values) else complex)
    g_inv = 1.0 / gamma
    if real:
        g_inv = float(np.real(g_inv))
    acc = np.zeros_like(x)
    coef = 1.0 + 0j if not real else 1.0
    for _ in range(n_terms):
        acc = acc + coef * x
        x = op.matrix @ x
        coef = coef * g_inv
    return GridFunction(op.grid, acc / n_terms)


INVARIANT_TOL = 1e-10
INVARIANT_MAX_TERMS = 1 << 20
_WINDOW0 = 840  # lcm(1..8): windows of this length average out short peripheral cycles


def invariant_density(op: UlamOperator, tol: float = INVARIANT_TOL) -> GridFunction:
    """Normalised nonnegative fixed density.

    Averages ``M^i 1`` over windows ``[n, 2n)`` with ``n = 840 * 2^k`` until
    successive window averages differ by less than ``tol`` in L1.  Starting
    the window at ``n`` lets the non-peripheral part decay geometrically, and
    window lengths divisible by small cycle lengths cancel peripheral
    rotations.
    """
    if op.weight_kind != PERRON_FROBENIUS:
        raise TransferError("invariant density needs the Perron-Frobenius weight")
    vol = op.grid.cell_volume
    x = np.ones(op.size)
    x = x / (x.sum() * vol)
    i = 0
    used = 0
    prev = None
    n = _WINDOW0
    while True:
        while i < n:
            x = op.matrix @ x
            i += 1
            used += 1
        acc = np.zeros(op.size)
        for _ in range(n):
            acc += x
            x = op.matrix @ x
            i += 1
            used += 1
        avg = acc / n
        if prev is not None and np.sum(np.abs(avg - prev)) * vol < tol:
            break
        if used >= INVARIANT_MAX_TERMS:
            raise TransferError(f"invariant density did not converge within {INVARIANT_MAX_TERMS} terms")
        prev = avg
        n *= 2
    neg = avg < 0
    neg_mass = float(-avg[neg].sum() * vol)
    if neg_mass > 1e-12:
        raise TransferError(f"invariant density has negative mass {neg_mass:.3g}")
    avg = np.where(neg, 0.0, avg)
    avg = avg / (avg.sum() * vol)
    return GridFunction(op.grid, avg)


# -- export ---------------------------------------------------------------------


def export_operator(op: UlamOperator, stem: str) -> tuple[str, str]:
    """Write ``stem.csv`` (row, col, value triplets) and ``stem.json`` (metadata)."""
    coo = op.matrix.tocoo()
    order = np.lexsort((coo.row, coo.col))
    rows = zip(coo.row[order], coo.col[order], coo.data[order])
    csv_path, json_path = stem + ".csv", stem + ".json"
    d = os.path.dirname(csv_path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(csv_path, "w", newline="") as fh:
        fh.write(csv_text(["row", "col", "value"], rows))
    with open(json_path, "w") as fh:
        fh.write(json_text(op.metadata()))
    return csv_path, json_path


def load_triplets(csv_path: str, json_path: str):
    """Read an exported operator back as ``(matrix, metadata)``."""
    with open(json_path) as fh:
        meta = json.load(fh)
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    n = meta["shape"][0]
    if data.size == 0:
        return sp.csr_matrix((n, n)), meta
    M = sp.coo_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(n, n)).tocsr()
    return M, meta
