import math

import numpy as np
import pytest

from pwexpand.config import parse_config
from pwexpand.expr import Expression
from pwexpand.grid import Grid, GridFunction
from pwexpand.measures import (
    OrbitEscapeError,
    basin_map,
    birkhoff,
    correlation,
    decompose_physical,
    histogram_csv,
    pushforward_defects,
)
from pwexpand.transfer import assemble, invariant_density, spectrum

from conftest import affine_map, doubling_map


def _op(bundled, name, n):
    m = bundled(name).map
    return m, assemble(m, Grid.over(m.ambient, n))


def test_birkhoff_doubling_uniform():
    m = doubling_map()
    g = Grid.over(m.ambient, 64)
    n = 10**6
    em = birkhoff(m, 1 / math.pi, n, 100, g, seed=1)
    assert em.histogram.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(em.histogram >= 0)
    counts = em.histogram * n
    assert np.max(np.abs(counts / (n / 64) - 1)) < 4 / math.sqrt(n / 64)


def test_birkhoff_fixed_point():
    m = doubling_map()
    g = Grid.over(m.ambient, 16)
    em = birkhoff(m, 0.0, 1000, 0, g, noise=0.0)
    assert em.histogram[0] == 1.0


def test_birkhoff_escape():
    m = affine_map([((0.0,), (1.0,), 3.0, 0.0)], ambient=((0.0,), (1.0,)))
    with pytest.raises(OrbitEscapeError):
        birkhoff(m, 0.5, 100, 0, Grid.over(m.ambient, 8))


def test_birkhoff_markov_density(bundled):
    m, op = _op(bundled, "markov3", 8)
    em = birkhoff(m, 0.1234, 400000, 100, op.grid, seed=3)
    exact = np.where(op.grid.centers[:, 0] < 0.5, 1.2, 0.8)
    assert np.max(np.abs(em.density().values - exact)) < 0.03


def test_birkhoff_smooth_branch():
    raw = {
        "dim": 1, "ambient": {"boxes": [[0, 1]]},
        "branch": [
            {"kind": "smooth1d", "interval": [0, 0.5], "forward": "2*x + 0.1*sin(2*pi*x)",
             "derivative": "2 + 0.2*pi*cos(2*pi*x)"},
            {"kind": "smooth1d", "interval": [0.5, 1], "forward": "2*x - 1 + 0.1*sin(2*pi*x)",
             "derivative": "2 + 0.2*pi*cos(2*pi*x)"},
        ],
    }
    m = parse_config(raw).map
    g = Grid.over(m.ambient, 32)
    rho = invariant_density(assemble(m, g))
    em = birkhoff(m, 0.3, 200000, 100, g, seed=2)
    assert em.l1_distance(rho) < 0.05


def test_histogram_csv():
    m = doubling_map()
    em = birkhoff(m, 0.3, 100, 0, Grid.over(m.ambient, 4), seed=0)
    lines = histogram_csv(em).splitlines()
    assert lines[0] == "cell,center_0,mass"
    assert len(lines) == 5


def test_decompose_doubling():
    op = assemble(doubling_map(), Grid.over(doubling_map().ambient, 128))
    ps = decompose_physical(op)
    assert len(ps.components) == 1
    c = ps.components[0]
    assert c.cycle_length == 1
    np.testing.assert_allclose(c.density.values, 1.0, atol=1e-9)


def test_decompose_two_intervals(bundled):
    m, op = _op(bundled, "two_interval_doubling", 64)
    ps = decompose_physical(op)
    assert len(ps.components) == 2
    assert sum(c.mass_weight for c in ps.components) == pytest.approx(1.0, abs=1e-8)
    x = op.grid.centers[:, 0]
    supports = sorted((x[c.support_cells].min(), x[c.support_cells].max()) for c in ps.components)
    assert supports[0][1] < 1 < 2 < supports[1][0]
    for c in ps.components:
        on = c.density.values[c.support_cells]
        np.testing.assert_allclose(on, on[0], atol=1e-9)
        assert c.density.integral() == pytest.approx(1.0, abs=1e-12)


def test_decompose_swap(bundled):
    m, op = _op(bundled, "swap2", 64)
    ps = decompose_physical(op)
    assert len(ps.components) == 1
    comp = ps.components[0]
    assert comp.cycle_length == 2
    assert max(pushforward_defects(op, comp)) < 1e-6
    a, b = comp.cyclic_parts
    assert np.sum(a.values * b.values) == 0


def test_basins_doubling():
    m = doubling_map()
    op = assemble(m, Grid.over(m.ambient, 32))
    pts = np.random.default_rng(4).random(100)
    rep = basin_map(m, op, decompose_physical(op), pts, n=20000, seed=1)
    assert rep.coverage >= 0.99
    assert np.all(rep.assignment[rep.assignment != -1] == 0)


def test_basins_two_intervals(bundled):
    m, op = _op(bundled, "two_interval_doubling", 32)
    ps = decompose_physical(op)
    x = op.grid.centers[:, 0]
    right = [k for k, c in enumerate(ps.components) if x[c.support_cells].min() > 1.5][0]
    pts = np.array([0.1, 0.7, 2.2, 2.9, 0.5])
    rep = basin_map(m, op, ps, pts, n=20000)
    assert rep.assignment[4] == -1 and rep.boundary_points == 1
    expected = [1 - right, 1 - right, right, right]
    assert rep.assignment[:4].tolist() == expected
    assert rep.coverage == 1.0


@pytest.mark.parametrize("name,x0", [("doubling", 0.1234567), ("markov3", 0.271828), ("tripling", 0.3141)])
def test_birkhoff_l1_halves(bundled, name, x0):
    m, op = _op(bundled, name, 16)
    rho = invariant_density(op)
    d = []
    for k, n in enumerate((4**6, 4**7, 4**8, 4**9)):
        # average over a few seeds to tame fluctuation of a single distance
        d.append(np.mean([birkhoff(m, x0 + 1e-3 * s, n, 100, op.grid, seed=s).l1_distance(rho) for s in range(8)]))
    ratios = [b / a for a, b in zip(d, d[1:])]
    assert all(r < 0.5 * 1.2 for r in ratios)


def test_correlation_linear_pair():
    m = doubling_map()
    rho = GridFunction(Grid.over(m.ambient, 64), np.ones(64))
    f = Expression("x - 0.5")
    cs = correlation(m, rho, f, f, n_max=8, mc_points=10**6, seed=0)
    assert cs.values[0] == pytest.approx(1 / 12, abs=5 * cs.sigma[0])
    for n in range(1, 5):
        assert cs.values[n] == pytest.approx(2.0**-n / 12, abs=5 * cs.sigma[n])
    assert cs.fit_available and cs.fitted_rate < 1


def test_correlation_cosine_pair():
    m = doubling_map()
    rho = GridFunction(Grid.over(m.ambient, 64), np.ones(64))
    f = Expression("cos(2*pi*x)")
    cs = correlation(m, rho, f, f, n_max=10, mc_points=10**6, seed=0)
    assert all(abs(cs.values[n]) < 5 * cs.sigma[n] for n in range(1, 11))


def test_correlation_constant_exact_zero():
    m = doubling_map()
    rho = GridFunction(Grid.over(m.ambient, 8), np.ones(8))
    cs = correlation(m, rho, Expression("3 + 0*x"), Expression("x"), n_max=5, mc_points=10000)
    assert np.all(cs.values == 0.0)
    assert not cs.fit_available
    assert cs.to_csv().splitlines()[0] == "n,C,sigma"


def test_correlation_rate_below_one_with_gap(bundled):
    m, op = _op(bundled, "markov3", 128)
    assert spectrum(op, 4).gap > 1e-3
    comp = decompose_physical(op).components[0]
    cs = correlation(m, comp, Expression("x"), Expression("x"), n_max=8, mc_points=200000)
    assert cs.fit_available and cs.fitted_rate < 1
