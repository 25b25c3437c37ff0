"""Uniform cell grids over unions of boxes, and functions sampled on them."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Polytope


class GridError(ValueError):
    pass


class Grid:
    """``N`` cells per axis on each ambient box; cells are ordered box by box,
    C-order within a box (axis 0 slowest).

    All cells must have the same volume, so cell masses and cell densities
    differ by one global factor.
    """

    def __init__(self, boxes, cells_per_axis: int):
        if cells_per_axis < 1:
            raise GridError("cells_per_axis must be >= 1")
        los, his = [], []
        for lo, hi in boxes:
            lo = np.atleast_1d(np.asarray(lo, dtype=float))
            hi = np.atleast_1d(np.asarray(hi, dtype=float))
            if np.any(hi <= lo):
                raise GridError("degenerate box")
            los.append(lo)
            his.append(hi)
        if not los:
            raise GridError("grid needs at least one box")
        self.box_lo = np.array(los)
        self.box_hi = np.array(his)
        self.dim = self.box_lo.shape[1]
        self.n = int(cells_per_axis)
        widths = (self.box_hi - self.box_lo) / self.n
        vols = np.prod(widths, axis=1)
        if np.max(np.abs(vols - vols[0])) > 1e-12 * vols[0]:
            raise GridError("ambient boxes must give equal cell volumes")
        self.widths = widths
        self.cell_volume = float(vols[0])
        self.cells_per_box = self.n ** self.dim

        idx = np.indices((self.n,) * self.dim).reshape(self.dim, -1).T
        lo_list, hi_list = [], []
        for b in range(len(los)):
            lo_list.append(self.box_lo[b] + idx * widths[b])
            hi_list.append(self.box_lo[b] + (idx + 1) * widths[b])
        self.cell_lo = np.vstack(lo_list)
        self.cell_hi = np.vstack(hi_list)
        # exact right edges (avoid lo + N*h rounding)
        for b in range(len(los)):
            sl = slice(b * self.cells_per_box, (b + 1) * self.cells_per_box)
            edge = idx == self.n - 1
            self.cell_hi[sl][edge] = np.broadcast_to(self.box_hi[b], idx.shape)[edge]
        self.centers = 0.5 * (self.cell_lo + self.cell_hi)

    @classmethod
    def over(cls, ambient, cells_per_axis: int) -> "Grid":
        """Grid over an ambient box or tuple of boxes (as polytopes)."""
        if isinstance(ambient, Polytope):
            ambient = (ambient,)
        boxes = []
        for p in ambient:
            lo, hi = p.bbox()
            boxes.append((lo, hi))
        return cls(boxes, cells_per_axis)

    @property
    def size(self) -> int:
        return self.cell_lo.shape[0]

    @property
    def n_boxes(self) -> int:
        return self.box_lo.shape[0]

    @property
    def is_box(self) -> bool:
        return self.n_boxes == 1

    @property
    def shape(self):
        if not self.is_box:
            raise GridError("multi-box grid has no array shape")
        return (self.n,) * self.dim

    @property
    def total_volume(self) -> float:
        return self.cell_volume * self.size

    def cell_polytope(self, i: int) -> Polytope:
        return Polytope.box(self.cell_lo[i], self.cell_hi[i])

    def cell_of(self, points, tol: float = 1e-9) -> np.ndarray:
        """Cell index per point, -1 outside every box (same rule as the kernels)."""
        P = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.full(P.shape[0], -1, dtype=np.int64)
        todo = np.ones(P.shape[0], dtype=bool)
        for b in range(self.n_boxes):
            lo, hi = self.box_lo[b], self.box_hi[b]
            inside = todo & np.all((P >= lo - tol) & (P <= hi + tol), axis=1)
            if not inside.any():
                continue
            t = (P[inside] - lo) / (hi - lo)
            t = np.maximum(t, 0.0)
            idx = np.minimum((t * self.n).astype(np.int64), self.n - 1)
            flat = np.zeros(idx.shape[0], dtype=np.int64)
            for a in range(self.dim):
                flat = flat * self.n + idx[:, a]
            out[inside] = b * self.cells_per_box + flat
            todo &= ~inside
        return out

    def sample_uniform(self, cells, rng) -> np.ndarray:
        """One uniform point inside each listed cell."""
        cells = np.asarray(cells)
        u = rng.random((cells.shape[0], self.dim))
        return self.cell_lo[cells] + u * (self.cell_hi[cells] - self.cell_lo[cells])

    def metadata(self) -> dict:
        return {
            "dim": self.dim,
            "cells_per_axis": self.n,
            "boxes": [[lo.tolist(), hi.tolist()] for lo, hi in zip(self.box_lo, self.box_hi)],
            "cell_volume": self.cell_volume,
            "size": self.size,
        }


@dataclass
class GridFunction:
    """Values (one per cell) of a piecewise-constant function on a grid."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values)
        if not np.iscomplexobj(v):
            v = v.astype(float)
        v = v.reshape(-1)
        if v.shape[0] != self.grid.size:
            raise GridError(f"expected {self.grid.size} values, got {v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise GridError("grid function values must be finite")
        self.values = v

    @classmethod
    def from_callable(cls, grid: Grid, f) -> "GridFunction":
        """Sample ``f`` at cell centers; ``f`` takes an (n, d) array."""
        C = grid.centers
        vals = f(C[:, 0]) if grid.dim == 1 else f(C)
        return cls(grid, np.asarray(vals, dtype=float))

    def as_array(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    def integral(self) -> float:
        return float(np.sum(self.values) * self.grid.cell_volume)

    def l1(self) -> float:
        return float(np.sum(np.abs(self.values)) * self.grid.cell_volume)

    def __add__(self, other):
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - other.values)

    def __mul__(self, other):
        if isinstance(other, GridFunction):
            return GridFunction(self.grid, self.values * other.values)
        return GridFunction(self.grid, self.values * other)

    __rmul__ = __mul__
