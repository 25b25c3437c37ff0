"""Orbits, empirical measures, ergodic decomposition and correlation decay.

Floating-point orbits of maps such as ``2x mod 1`` collapse onto a fixed
point after ~53 steps because every step discards a mantissa bit.  Orbits are
therefore simulated as pseudo-orbits: after each step a tiny seeded
perturbation (default ``1e-12`` times the ambient extent) is added, and is
kept only when the perturbed point still lies in a branch closure.  By
shadowing, such pseudo-orbits stay close to genuine orbits.  Pass
``noise=0`` for exact floating-point iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import breadth_first_order, connected_components

from . import kernels
from .grid import Grid, GridFunction
from .maps import BOUNDARY, PERRON_FROBENIUS, AffineBranch, PiecewiseMap, apply
from .output import csv_text
from .transfer import TransferError, UlamOperator

DEFAULT_NOISE = 1e-12
CHUNK = 1 << 20
MAX_RETRIES = 5
JITTER = 1e-12
SUPPORT_TOL = 1e-9
EIGEN_RESIDUAL_TOL = 1e-6


class MeasureError(RuntimeError):
    pass


class OrbitEscapeError(MeasureError):
    pass


class BoundaryRetryError(MeasureError):
    pass


# -- empirical measures -------------------------------------------------------


@dataclass
class EmpiricalMeasure:
    grid: Grid
    histogram: np.ndarray = field(repr=False)
    origin: np.ndarray
    orbit_length: int
    burn_in: int
    retries: int = 0
    noise: float = 0.0

    def density(self) -> GridFunction:
        return GridFunction(self.grid, self.histogram / self.grid.cell_volume)

    def l1_distance(self, density: GridFunction) -> float:
        """L1 distance between the empirical measure and ``density dx`` (both as cell masses)."""
        return float(np.sum(np.abs(self.histogram - density.values * self.grid.cell_volume)))


def _extent(m: PiecewiseMap) -> float:
    ext = 0.0
    for box in m.ambient:
        lo, hi = box.bbox()
        ext = max(ext, float(np.max(hi - lo)))
    return ext


def _orbit_counts_affine(m, grid, x, n_steps, burn_in, noise_scale, rng):
    hs_A, hs_b, hs_start, mats, offs = m.packed()
    hist = np.zeros(grid.size, dtype=np.int64)
    tol = 1e-9
    done_total = 0
    x = np.array(x, dtype=float)
    while done_total < n_steps:
        L = min(CHUNK, n_steps - done_total)
        if noise_scale > 0:
            nz = np.ascontiguousarray(rng.normal(0.0, noise_scale, (L, m.dim)))
        else:
            nz = np.zeros((0, m.dim))
        b_in = max(0, burn_in - done_total)
        status, done, x = kernels.orbit_hist(
            x, L, b_in, hs_A, hs_b, hs_start, mats, offs, tol, nz,
            grid.box_lo, grid.box_hi, grid.n, hist,
        )
        if status != kernels.STATUS_OK:
            return status, hist
        done_total += L
    return kernels.STATUS_OK, hist


def _scalar_forward(br):
    if isinstance(br, AffineBranch):
        a, c = float(br.matrix[0, 0]), float(br.offset[0])
        return lambda x: a * x + c
    fwd = br.forward
    if hasattr(fwd, "scalar"):
        return fwd.scalar
    return lambda x: float(fwd(x))


def _orbit_counts_1d(m, grid, x, n_steps, burn_in, noise_scale, rng):
    """Scalar loop for 1D maps with smooth branches (same semantics as the kernel)."""
    hist = np.zeros(grid.size, dtype=np.int64)
    ivs = [(float(d.vertices[0, 0]), float(d.vertices[1, 0])) for d in m.domains]
    fwds = [_scalar_forward(br) for br in m.branches]
    boxes = [(float(lo[0]), float(hi[0])) for lo, hi in zip(grid.box_lo, grid.box_hi)]
    ncell, per_box = grid.n, grid.cells_per_box
    tol = 1e-9
    x = float(np.asarray(x).ravel()[0])
    done_total = 0
    while done_total < n_steps:
        L = min(CHUNK, n_steps - done_total)
        nz = rng.normal(0.0, noise_scale, L).tolist() if noise_scale > 0 else None
        for s in range(L):
            if done_total + s >= burn_in:
                cell = -1
                for bi, (lo, hi) in enumerate(boxes):
                    if lo - tol <= x <= hi + tol:
                        idx = min(int(max((x - lo) / (hi - lo), 0.0) * ncell), ncell - 1)
                        cell = bi * per_box + idx
                        break
                if cell < 0:
                    return kernels.STATUS_ESCAPE, hist
                hist[cell] += 1
            count, k = 0, -1
            for j, (lo, hi) in enumerate(ivs):
                if lo - tol <= x <= hi + tol:
                    count += 1
                    k = j
            if count != 1:
                return (kernels.STATUS_ESCAPE if count == 0 else kernels.STATUS_BOUNDARY), hist
            y = fwds[k](x)
            if nz is not None:
                z = y + nz[s]
                if any(lo <= z <= hi for lo, hi in ivs):
                    y = z
            x = y
        done_total += L
    return kernels.STATUS_OK, hist


def birkhoff(m: PiecewiseMap, x0, n: int, burn_in: int, grid: Grid, seed: int = 0,
             noise: float | None = None) -> EmpiricalMeasure:
    """Histogram of ``n`` orbit points after ``burn_in`` steps.

    A boundary hit restarts the orbit from ``x0`` plus a seeded jitter of
    size ``1e-12`` (at most 5 retries).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    noise_scale = (DEFAULT_NOISE if noise is None else noise) * _extent(m)
    rng = np.random.default_rng(seed)
    start = x0.copy()
    # smooth branches only exist in 1D
    runner = _orbit_counts_affine if m.is_affine else _orbit_counts_1d
    for attempt in range(MAX_RETRIES + 1):
        status, hist = runner(m, grid, start, burn_in + n, burn_in, noise_scale, rng)
        if status == kernels.STATUS_OK:
            mass = hist.astype(float) / n
            return EmpiricalMeasure(grid, mass, x0, n, burn_in, attempt, noise_scale)
        if status == kernels.STATUS_ESCAPE:
            raise OrbitEscapeError(f"orbit from {x0.tolist()} left the ambient space")
        start = x0 + JITTER * rng.uniform(-1.0, 1.0, x0.shape[0])
    raise BoundaryRetryError(f"orbit from {x0.tolist()} kept hitting piece boundaries")


def histogram_csv(em: EmpiricalMeasure) -> str:
    g = em.grid
    header = ["cell"] + [f"center_{a}" for a in range(g.dim)] + ["mass"]
    rows = ([i] + list(g.centers[i]) + [em.histogram[i]] for i in range(g.size))
    return csv_text(header, rows)


# -- physical measures -------------------------------------------------------


@dataclass
class PhysicalComponent:
    density: GridFunction
    support_cells: np.ndarray
    mass_weight: float
    cycle_length: int
    cyclic_parts: list = field(default_factory=list, repr=False)
    residual: float = 0.0


@dataclass
class PhysicalMeasureSet:
    components: list
    cycle_structure: list
    eigenvalue_one_multiplicity: int

    def to_dict(self) -> dict:
        return {
            "components": [
                {
                    "index": k,
                    "mass_weight": c.mass_weight,
                    "cycle_length": c.cycle_length,
                    "support_size": int(c.support_cells.size),
                    "residual": c.residual,
                }
                for k, c in enumerate(self.components)
            ],
            "cycle_structure": self.cycle_structure,
            "eigenvalue_one_multiplicity": self.eigenvalue_one_multiplicity,
        }


def _stationary(P, tol=1e-13, max_iter=1 << 20):
    """Fixed density of an irreducible column-stochastic block (windowed averages)."""
    n = P.shape[0]
    x = np.full(n, 1.0 / n)
    prev = None
    i, w = 0, 840
    while True:
        while i < w:
            x = P @ x
            i += 1
        acc = np.zeros(n)
        for _ in range(w):
            acc += x
            x = P @ x
            i += 1
        avg = acc / w
        avg = avg / avg.sum()
        if prev is not None and np.abs(avg - prev).sum() < tol:
            return avg
        if i >= max_iter:
            return avg
        prev = avg
        w *= 2


def _period(adj, nodes):
    """Period of a strongly connected subgraph and the cyclic class of each node."""
    sub = adj[nodes][:, nodes].tocsr()
    order, pred = breadth_first_order(sub, 0, directed=True, return_predecessors=True)
    level = np.full(len(nodes), -1, dtype=np.int64)
    level[0] = 0
    for v in order[1:]:
        level[v] = level[pred[v]] + 1
    coo = sub.tocoo()
    g = 0
    for u, v in zip(coo.row, coo.col):
        g = math.gcd(g, int(abs(level[u] + 1 - level[v])))
    g = max(g, 1)
    return g, level % g


def decompose_physical(op: UlamOperator, threshold: float = SUPPORT_TOL) -> PhysicalMeasureSet:
    """Ergodic components of the Ulam chain and their cyclic structure.

    Components are the closed communicating classes of the cell graph
    (edge ``i -> j`` when ``M[j, i] > threshold``).  Each carries one fixed
    density; its period splits it into cyclically permuted parts.
    """
    if op.weight_kind != PERRON_FROBENIUS:
        raise TransferError("decomposition needs the Perron-Frobenius weight")
    M = op.matrix.tocsr()
    vol = op.grid.cell_volume
    A = M.T.tocsr()  # A[i, j] = M[j, i]: edge i -> j
    A.data = np.where(A.data > threshold, 1.0, 0.0)
    A.eliminate_zeros()
    ncomp, labels = connected_components(A, directed=True, connection="strong")
    # a class is closed when no edge leaves it
    coo = A.tocoo()
    leaving = np.zeros(ncomp, dtype=bool)
    cross = labels[coo.row] != labels[coo.col]
    leaving[np.unique(labels[coo.row[cross]])] = True
    closed = [c for c in range(ncomp) if not leaving[c]]
    # deterministic order: by the smallest cell index
    closed.sort(key=lambda c: int(np.min(np.nonzero(labels == c)[0])))

    lebesgue = np.ones(op.size)
    lebesgue /= lebesgue.sum()
    # absorption weights of the Lebesgue start into each closed class
    x = lebesgue.copy()
    for _ in range(4096):
        y = M @ x
        if np.abs(y - x).sum() < 1e-14:
            break
        x = y
    comps = []
    for c in closed:
        nodes = np.nonzero(labels == c)[0]
        P = M[nodes][:, nodes]
        h = _stationary(P)
        full = np.zeros(op.size)
        full[nodes] = h / vol
        resid = float(np.abs(M @ full - full).sum() * vol)
        if resid > EIGEN_RESIDUAL_TOL:
            raise TransferError(f"fixed density residual {resid:.3g} exceeds {EIGEN_RESIDUAL_TOL}")
        support = nodes[h > threshold]
        period, cls = _period(A, nodes)
        parts = []
        for r in range(period):
            part = np.zeros(op.size)
            sel = nodes[cls == r]
            part[sel] = full[sel]
            mass = part.sum() * vol
            parts.append(GridFunction(op.grid, part / mass if mass > 0 else part))
        comps.append(PhysicalComponent(GridFunction(op.grid, full), support, 0.0, period, parts, resid))
    weights = np.array([x[comp.support_cells].sum() for comp in comps])
    if weights.sum() <= 0:
        weights = np.ones(len(comps))
    weights = weights / weights.sum()
    for comp, w in zip(comps, weights):
        comp.mass_weight = float(w)
    return PhysicalMeasureSet(comps, [c.cycle_length for c in comps], len(comps))


def pushforward_defects(op: UlamOperator, comp: PhysicalComponent) -> list[float]:
    """L1 distance between ``M mu_j`` and ``mu_{j+1}`` for each cyclic part."""
    vol = op.grid.cell_volume
    k = len(comp.cyclic_parts)
    out = []
    for j, part in enumerate(comp.cyclic_parts):
        nxt = comp.cyclic_parts[(j + 1) % k]
        out.append(float(np.abs(op.matrix @ part.values - nxt.values).sum() * vol))
    return out


# -- basins -------------------------------------------------------------------


@dataclass
class BasinReport:
    assignment: np.ndarray
    distances: np.ndarray = field(repr=False)
    coverage: float
    boundary_points: int
    ambiguous_points: int

    def to_dict(self) -> dict:
        return {
            "assignment": self.assignment.tolist(),
            "coverage": self.coverage,
            "boundary_points": self.boundary_points,
            "ambiguous_points": self.ambiguous_points,
        }


MARGIN = 2.0


def basin_map(m: PiecewiseMap, op: UlamOperator, components, points, n: int = 100_000,
              burn_in: int = 100, seed: int = 0, noise: float | None = None) -> BasinReport:
    """Assign each initial point to the nearest component density (L1, 2x margin).

    Assignment codes: component index, ``-1`` boundary start (excluded from
    coverage), ``-2`` no clear winner.
    """
    comps = components.components if isinstance(components, PhysicalMeasureSet) else list(components)
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if P.shape[1] != m.dim:
        P = P.reshape(-1, m.dim)
    seeds = np.random.SeedSequence(seed).spawn(P.shape[0])
    assign = np.full(P.shape[0], -1, dtype=np.int64)
    dist = np.full((P.shape[0], len(comps)), np.nan)
    n_boundary = n_amb = 0
    for i, x0 in enumerate(P):
        if apply(m, x0) is BOUNDARY:
            n_boundary += 1
            continue
        s = int(seeds[i].generate_state(1)[0])
        em = birkhoff(m, x0, n, burn_in, op.grid, seed=s, noise=noise)
        d = np.array([em.l1_distance(c.density) for c in comps])
        dist[i] = d
        order = np.argsort(d, kind="stable")
        best = d[order[0]]
        runner = d[order[1]] if len(d) > 1 else math.inf
        if runner >= MARGIN * best:
            assign[i] = order[0]
        else:
            assign[i] = -2
            n_amb += 1
    valid = P.shape[0] - n_boundary
    covered = int(np.sum(assign >= 0))
    coverage = covered / valid if valid else 0.0
    return BasinReport(assign, dist, coverage, n_boundary, n_amb)


# -- correlations ---------------------------------------------------------------


@dataclass
class CorrelationSeries:
    values: np.ndarray
    sigma: np.ndarray
    fitted_rate: float | None
    fit_residual: float | None
    fit_range: tuple | None
    test_pair: tuple
    samples: int

    @property
    def fit_available(self) -> bool:
        return self.fitted_rate is not None

    def to_csv(self) -> str:
        return csv_text(["n", "C", "sigma"], ((n, c, s) for n, (c, s) in enumerate(zip(self.values, self.sigma))))

    def to_dict(self) -> dict:
        return {
            "values": self.values.tolist(),
            "sigma": self.sigma.tolist(),
            "fitted_rate": self.fitted_rate,
            "fit_residual": self.fit_residual,
            "fit_range": None if self.fit_range is None else list(self.fit_range),
            "test_pair": list(self.test_pair),
            "samples": self.samples,
            "mc": True,
        }


def sample_density(density: GridFunction, size: int, rng) -> np.ndarray:
    """Seeded points distributed as the piecewise-constant density."""
    w = np.clip(density.values.real, 0.0, None)
    p = w / w.sum()
    cells = rng.choice(density.grid.size, size=size, p=p)
    cells.sort(kind="stable")
    return density.grid.sample_uniform(cells, rng)


def _eval(fn, X, dim):
    v = fn(X[:, 0]) if dim == 1 else fn(X)
    return np.broadcast_to(np.asarray(v, dtype=float), (X.shape[0],)).copy()


def _fit_rate(values, sigma, snr: float = 10.0):
    idx = [n for n in range(1, len(values)) if abs(values[n]) > snr * sigma[n] and values[n] != 0]
    if len(idx) < 2:
        return None, None, None
    ns = np.array(idx, dtype=float)
    y = np.log(np.abs(np.asarray(values)[idx]))
    slope, icpt = np.polyfit(ns, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * ns + icpt)) ** 2)))
    return float(math.exp(slope)), resid, (int(idx[0]), int(idx[-1]))


def correlation(m: PiecewiseMap, component, f, g, n_max: int = 10, mc_points: int = 10**6, seed: int = 0,
                power: int = 1, test_pair: tuple = ("f", "g", None)) -> CorrelationSeries:
    """``C(n) = <mu, f . g o T^{n*power}> - <mu, f><mu, g>`` by sampling from ``mu``.

    ``component`` is a :class:`PhysicalComponent` or a density.  ``f`` is
    centred on the sample, so a constant ``f`` gives exactly zero.
    """
    density = component.density if isinstance(component, PhysicalComponent) else component
    rng = np.random.default_rng(seed)
    X = sample_density(density, mc_points, rng)
    fv = _eval(f, X, m.dim)
    if np.ptp(fv) == 0:
        fc = np.zeros_like(fv)
    else:
        fc = fv - fv.mean()
    alive = np.ones(X.shape[0], dtype=bool)
    vals = np.zeros(n_max + 1)
    sig = np.zeros(n_max + 1)
    Y = X
    for n in range(n_max + 1):
        if n > 0:
            for _ in range(power):
                Y, flags = m.step(Y)
                alive &= flags == kernels.STATUS_OK
        gv = _eval(g, Y, m.dim)
        prod = np.where(alive, fc * gv, 0.0)
        cnt = int(alive.sum())
        vals[n] = prod.sum() / cnt
        sig[n] = float(np.std(prod[alive])) / math.sqrt(cnt) if cnt > 1 else math.inf
    rate, resid, rng_fit = _fit_rate(vals, sig)
    return CorrelationSeries(vals, sig, rate, resid, rng_fit, test_pair, mc_points)
