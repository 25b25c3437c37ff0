"""Acceptance criteria 1-8.

Each criterion runs at its stated tolerance and time limit and records one
PASS/FAIL line; the lines are printed in the pytest terminal summary (and by
running this file directly).  A failing criterion fails its test.
"""

from __future__ import annotations

import contextlib
import io
import math
import os
import tempfile
import time

import numpy as np
import pytest

from pwexpand import cli
from pwexpand.bounds import (
    affine_commuting_bound,
    bv_radius_bound,
    hypothesis_value,
    loglog_slope,
    search_parameters,
)
from pwexpand.complexity import ComplexityReport, complexity_begin, complexity_end, refine, reports
from pwexpand.config import BUNDLED, load_bundled
from pwexpand.expr import Expression
from pwexpand.grid import Grid, GridFunction
from pwexpand.measures import basin_map, correlation, decompose_physical, pushforward_defects
from pwexpand.norms import (
    bv_norm,
    discrete_lipschitz,
    fubini_decompose,
    hoelder_seminorm,
    oscillation_seminorm,
    sobolev_norm,
)
from pwexpand.transfer import assemble, invariant_density, spectrum

RESULTS: dict[int, str] = {}

_REPORTS: dict[str, list] = {}


def _reports(name, n_max=6):
    if name not in _REPORTS:
        _REPORTS[name] = reports(load_bundled(name).map, n_max)
    return _REPORTS[name]


class Checks:
    """Collects named sub-checks and the elapsed time of one criterion."""

    def __init__(self, number: int, title: str, limit: float | None):
        self.number, self.title, self.limit = number, title, limit
        self.items: list[tuple[str, bool]] = []
        self.t0 = time.perf_counter()

    def check(self, label: str, ok: bool) -> None:
        self.items.append((label, bool(ok)))

    def finish(self) -> None:
        elapsed = time.perf_counter() - self.t0
        if self.limit is not None:
            self.check(f"time {elapsed:.1f}s <= {self.limit:g}s", elapsed <= self.limit)
        failed = [label for label, ok in self.items if not ok]
        status = "PASS" if not failed else "FAIL"
        detail = "all checks hold" if not failed else "failed: " + "; ".join(failed)
        line = f"ACCEPTANCE {self.number} {status}: {self.title} ({detail})"
        RESULTS[self.number] = line
        print(line)
        assert not failed, line


# -- 1 ------------------------------------------------------------------------


def test_criterion_1_doubling():
    c = Checks(1, "doubling map suite", 10)
    m = load_bundled("doubling").map
    ok_b, ok_e = True, True
    for n in range(1, 9):
        cyl = refine(m, n)
        ok_b &= complexity_begin(cyl, m).value == 2
        ok_e &= complexity_end(cyl, m).value == 2**n
    c.check("D_n^b = 2 for n <= 8", ok_b)
    c.check("D_n^e = 2^n for n <= 8", ok_e)
    bv = bv_radius_bound(m, reports(m, 10)[-1])
    c.check(f"bv bound at n = 10 is {bv:.5f} in [0.53, 0.54]", 0.53 <= bv <= 0.54)
    op = assemble(m, Grid.over(m.ambient, 256))
    rep = spectrum(op, 4)
    lam1, lam2 = rep.eigenvalues[0], abs(rep.eigenvalues[1])
    c.check(f"|lambda_1 - 1| = {abs(lam1 - 1):.2e} <= 1e-10", abs(lam1 - 1) <= 1e-10)
    rho = invariant_density(op)
    dev = float(np.max(np.abs(rho.values - 1.0)))
    c.check(f"density sup deviation {dev:.2e} <= 1e-8", dev <= 1e-8)
    c.check(f"|lambda_2| = {lam2:.4f} <= 0.55", lam2 <= 0.55)
    c.finish()


# -- 2 ------------------------------------------------------------------------


def test_criterion_2_polynomial_complexity():
    c = Checks(2, "commuting affine maps (polynomial complexity)", 60)
    for name in ("quadrant", "commuting2d"):
        m = load_bundled(name).map
        cb = affine_commuting_bound(m, 6)
        n_mats = len({br.matrix.tobytes() for br in m.branches})
        slope = loglog_slope(range(1, 7), cb.j_table)
        c.check(f"{name}: J(n) log-log slope {slope:.3f} <= {n_mats + 1}", slope <= n_mats + 1)
        reps = _reports(name)
        roots = [r.d_begin ** (1 / r.n) for r in reps]
        decreasing = all(b <= a for a, b in zip(roots, roots[1:])) and roots[-1] < roots[0]
        c.check(f"{name}: (D_n^b)^(1/n) = {', '.join(f'{v:.3f}' for v in roots)} decreasing", decreasing)
        bv = bv_radius_bound(m, reps[-1])
        rel = abs(bv - cb.bound) / cb.bound
        c.check(f"{name}: bv bound at n = 6 is {bv:.4f}, {100 * rel:.1f}% from 1/lambda = {cb.bound:g} (limit 15%)",
                rel <= 0.15)
    c.finish()


# -- 3 ------------------------------------------------------------------------


def test_criterion_3_parameter_search():
    c = Checks(3, "parameter search", None)
    for name in BUNDLED:
        m = load_bundled(name).map
        r = _reports(name)[-1]
        h = hypothesis_value(r)
        if h < 1:
            res = search_parameters(m, r)
            c.check(f"{name}: hypothesis {h:.3f} < 1 and search finds a pair", res is not None)
    synthetic = [
        ComplexityReport.synthetic(6, 2**6, 2**6, 1.01**6),
        ComplexityReport.synthetic(6, 2**6, 2**6, 1.01**6, dim=2),
    ]
    for k, r in enumerate(synthetic):
        c.check(f"synthetic failing input {k} gives none", search_parameters(None, r) is None)
    c.finish()


# -- 4 ------------------------------------------------------------------------


def test_criterion_4_structure():
    c = Checks(4, "peripheral spectrum and ergodic decomposition", 60)
    cfg = load_bundled("swap2")
    op = assemble(cfg.map, Grid.over(cfg.map.ambient, cfg.caps["grid_n"]))
    rep = spectrum(op, 6)
    per = sorted(z.real for z, _ in rep.peripheral)
    ok = len(per) == 2 and abs(per[0] + 1) < 1e-6 and abs(per[1] - 1) < 1e-6
    ok &= all(abs(z.imag) < 1e-6 for z, _ in rep.peripheral)
    c.check(f"swap2 peripheral spectrum {per} = {{-1, 1}}", ok)
    c.check(f"swap2 root_of_unity_order = {rep.root_of_unity_order}", rep.root_of_unity_order == 2)
    phys = decompose_physical(op)
    cycles = [comp.cycle_length for comp in phys.components]
    c.check(f"swap2 cycle lengths {cycles} = [2]", cycles == [2])
    defect = max(max(pushforward_defects(op, comp)) for comp in phys.components)
    c.check(f"swap2 pushforward defect {defect:.1e} <= 1e-6", defect <= 1e-6)

    cfg = load_bundled("two_interval_doubling")
    m = cfg.map
    op = assemble(m, Grid.over(m.ambient, cfg.caps["grid_n"]))
    phys = decompose_physical(op)
    c.check(f"two intervals: {len(phys.components)} components = 2", len(phys.components) == 2)
    rng = np.random.default_rng(cfg.seed)
    pts = np.concatenate([rng.random(50), 2 + rng.random(50)])
    basins = basin_map(m, op, phys, pts, n=100_000, seed=cfg.seed)
    c.check(f"two intervals: basin coverage {basins.coverage:.3f} >= 0.99", basins.coverage >= 0.99)
    c.finish()


# -- 5 ------------------------------------------------------------------------


def test_criterion_5_mixing():
    c = Checks(5, "decay of correlations for the doubling map", 120)
    m = load_bundled("doubling").map
    rho = GridFunction(Grid.over(m.ambient, 256), np.ones(256))
    lin = Expression("x - 0.5")
    cs = correlation(m, rho, lin, lin, n_max=10, mc_points=10**6, seed=1)
    rate = cs.fitted_rate
    c.check(f"x - 1/2: fitted rate {rate if rate is None else round(rate, 4)} in [0.2, 0.3]",
            rate is not None and 0.2 <= rate <= 0.3)
    cos = Expression("cos(2*pi*x)")
    cs = correlation(m, rho, cos, cos, n_max=10, mc_points=10**6, seed=2)
    worst = max(abs(cs.values[n]) / cs.sigma[n] for n in range(1, 11))
    c.check(f"cos(2 pi x): max |C(n)|/sigma = {worst:.2f} < 5 for 1 <= n <= 10", worst < 5)
    c.finish()


# -- 6 ------------------------------------------------------------------------


def test_criterion_6_norms():
    c = Checks(6, "grid norms", 30)
    rng = np.random.default_rng(6)
    g2 = Grid([(np.zeros(2), np.ones(2))], 16)
    worst = 0.0
    for _ in range(100):
        u = GridFunction(g2, rng.standard_normal(256))
        worst = max(worst, abs(fubini_decompose(u).total - bv_norm(u).total))
    c.check(f"Fubini decomposition max error {worst:.1e} <= 1e-9", worst <= 1e-9)

    ok_lip = ok_ind = True
    for _ in range(100):
        arr = rng.standard_normal((16, 16))
        arr[(0, -1), :] = 0
        arr[:, (0, -1)] = 0
        u = GridFunction(g2, arr.ravel())
        a = rng.standard_normal(3)
        gf = GridFunction.from_callable(g2, lambda X: a[0] + np.sin(a[1] * X[:, 0] + a[2] * X[:, 1]))
        lip = float(np.max(np.abs(gf.values))) + discrete_lipschitz(gf)
        ok_lip &= bv_norm(GridFunction(g2, gf.values * u.values)).total <= lip * bv_norm(u).total + 1e-9
        lo = rng.integers(0, 15, 2)
        hi = lo + rng.integers(1, 16 - lo)
        ind = np.zeros((16, 16))
        ind[lo[0]:hi[0], lo[1]:hi[1]] = 1.0
        ok_ind &= bv_norm(GridFunction(g2, ind.ravel() * u.values)).total <= bv_norm(u).total + 1e-9
    c.check("Lipschitz multiplication bound on 100 random tests", ok_lip)
    c.check("box indicator multiplication bound on 100 random tests", ok_ind)

    g1 = Grid([(np.zeros(1), np.ones(1))], 256)
    s = GridFunction.from_callable(g1, lambda x: np.sin(2 * np.pi * x))
    ratio = sobolev_norm(s, 2.0, 1.0) / sobolev_norm(s, 2.0, 0.0)
    err = abs(ratio / math.sqrt(1 + 4 * math.pi**2) - 1)
    c.check(f"single-mode Sobolev multiplier relative error {err:.1e} <= 1e-6", err <= 1e-6)

    g512 = Grid([(np.zeros(1), np.ones(1))], 512)
    for alpha in (0.3, 0.5, 1.0):
        f = GridFunction.from_callable(g512, lambda x: x**alpha)
        osc = oscillation_seminorm(f, alpha, 0.25)
        hol = hoelder_seminorm(f.values, g512.centers, alpha)
        c.check(f"x^{alpha}: |f|_alpha = {osc:.4f} <= 2^alpha |f|'_alpha = {2**alpha * hol:.4f}",
                osc <= 2**alpha * hol)
    c.finish()


# -- 7 ------------------------------------------------------------------------


def _duality_gap(m, op, rng, n=100_000):
    g = op.grid
    u = rng.random(g.size)
    f = rng.standard_normal(g.size)
    lhs = float(np.dot(op.apply(u), f) * g.cell_volume)
    cells = rng.integers(g.size, size=n)
    X = g.sample_uniform(cells, rng)
    Y, flags = m.step(X)
    j = g.cell_of(Y)
    ok = (flags == 0) & (j >= 0)
    vals = np.where(ok, u[cells] * f[np.where(ok, j, 0)], 0.0) * g.total_volume
    return abs(lhs - vals.mean()) / (vals.std() / math.sqrt(n))


def test_criterion_7_operator_properties():
    c = Checks(7, "Ulam operator properties at N = 128", 60)
    rng = np.random.default_rng(7)
    for name in BUNDLED:
        m = load_bundled(name).map
        op = assemble(m, Grid.over(m.ambient, 128))
        c.check(f"{name}: entries >= 0", op.matrix.data.min() >= 0)
        mass = float(np.max(np.abs(op.column_sums() - 1)))
        c.check(f"{name}: mass defect {mass:.1e} <= 1e-8", mass <= 1e-8)
        z = _duality_gap(m, op, rng)
        c.check(f"{name}: duality deviation {z:.2f} sigma < 5", z < 5)
        rad = float(abs(spectrum(op, 4).eigenvalues[0]))
        c.check(f"{name}: spectral radius {rad:.12f} <= 1 + 1e-8", rad <= 1 + 1e-8)
    c.finish()


# -- 8 ------------------------------------------------------------------------

CLI_RUNS = [
    ["complexity", "doubling", "--n-max", "8"],
    ["bounds", "doubling", "--n-max", "10", "--p", "2", "--t", "0.4", "--search"],
    ["spectrum", "doubling", "--N", "256"],
    ["bounds", "quadrant", "--n-max", "6", "--commuting", "--search"],
    ["bounds", "commuting2d", "--n-max", "5", "--commuting", "--search"],
    ["spectrum", "swap2", "--format", "json"],
    ["measures", "swap2", "--seeds", "20", "--orbit", "20000"],
    ["measures", "two_interval_doubling"],
    ["correlation", "doubling", "--f", "x-0.5", "--g", "x-0.5"],
    ["correlation", "tripling", "--f", "cos(2*pi*x)", "--g", "cos(2*pi*x)"],
    ["export-operator", "quadrant", "--N", "32"],
]


def _run_all(out_dir):
    codes = []
    for argv in CLI_RUNS:
        with contextlib.redirect_stderr(io.StringIO()):
            codes.append(cli.main(["--out", out_dir] + argv))
    return codes


def test_criterion_8_determinism():
    c = Checks(8, "byte-identical CLI reruns", None)
    with tempfile.TemporaryDirectory() as tmp:
        a, b = os.path.join(tmp, "a"), os.path.join(tmp, "b")
        codes = _run_all(a)
        _run_all(b)
        files = sorted(os.listdir(a))
        c.check(f"{len(files)} output files from {len(CLI_RUNS)} runs", len(files) >= len(CLI_RUNS))
        c.check("same file set", files == sorted(os.listdir(b)))
        differ = [f for f in files if open(os.path.join(a, f), "rb").read() != open(os.path.join(b, f), "rb").read()]
        c.check("identical bytes" + (f" (differ: {', '.join(differ)})" if differ else ""), not differ)
        c.check(f"exit codes {codes} all 0", all(k == 0 for k in codes))
    c.finish()


if __name__ == "__main__":
    for name, fn in sorted((k, v) for k, v in globals().items() if k.startswith("test_criterion_")):
        with contextlib.suppress(AssertionError):
            with contextlib.redirect_stdout(io.StringIO()):
                fn()
    for k in sorted(RESULTS):
        print(RESULTS[k])
