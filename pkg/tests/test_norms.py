import math

import numpy as np
import pytest

from pwexpand.grid import Grid, GridFunction
from pwexpand.norms import (
    NormError,
    bv_norm,
    discrete_lipschitz,
    fubini_decompose,
    hoelder_seminorm,
    oscillation_seminorm,
    sobolev_norm,
)


def _grid(n, dim=1):
    return Grid([(np.zeros(dim), np.ones(dim))], n)


def _gf(arr):
    arr = np.asarray(arr, dtype=float)
    return GridFunction(_grid(arr.shape[0], arr.ndim), arr.ravel())


def _random_banded(rng, n, dim=2):
    """Random grid function vanishing on a one-cell guard band."""
    arr = rng.standard_normal((n,) * dim)
    arr[(0, -1), ...] = 0
    if dim == 2:
        arr[:, (0, -1)] = 0
    return arr


def test_bv_indicator_1d():
    g = _grid(64)
    u = GridFunction.from_callable(g, lambda x: ((x > 0.25) & (x < 0.75)).astype(float))
    bv = bv_norm(u)
    assert bv.variation == pytest.approx(2.0)
    assert bv.l1 == pytest.approx(0.5)


def test_bv_constant():
    assert bv_norm(_gf(np.full((8, 8), 3.0))).variation == 0.0


def test_bv_left_half_2d():
    arr = np.zeros((8, 8))
    arr[:4, :] = 1.0
    bv = bv_norm(_gf(arr))
    assert bv.variation == pytest.approx(0.5)
    assert bv.total == pytest.approx(1.0)


def test_fubini_examples():
    rng = np.random.default_rng(0)
    u = _gf(rng.standard_normal(32))
    assert fubini_decompose(u).total == pytest.approx(bv_norm(u).total, abs=1e-12)
    arr = np.repeat(rng.standard_normal(16)[:, None], 16, axis=1)
    tab = fubini_decompose(_gf(arr))
    line_var = [float(np.sum(np.abs(np.diff(line)))) for line in arr]
    assert max(line_var) == 0.0
    assert tab.line_norms[1] == pytest.approx(np.sum(np.abs(arr), axis=1) / 16)


def test_fubini_random():
    rng = np.random.default_rng(1)
    for _ in range(20):
        u = _gf(rng.standard_normal((16, 16)))
        assert abs(fubini_decompose(u).total - bv_norm(u).total) < 1e-9


def test_sobolev_t_zero():
    rng = np.random.default_rng(2)
    u = _gf(rng.standard_normal(50))
    for p in (1.5, 2.0, 3.0):
        lp = (np.sum(np.abs(u.values) ** p) / 50) ** (1 / p)
        assert sobolev_norm(u, p, 0.0) == pytest.approx(lp, rel=1e-14)


def test_sobolev_single_mode():
    g = _grid(256)
    u = GridFunction.from_callable(g, lambda x: np.sin(2 * np.pi * x))
    l2 = sobolev_norm(u, 2.0, 0.0)
    assert sobolev_norm(u, 2.0, 1.0) == pytest.approx(math.sqrt(1 + 4 * math.pi**2) * l2, rel=1e-6)
    for t in (0.3, 0.7):
        assert sobolev_norm(u, 2.0, t) == pytest.approx((1 + 4 * math.pi**2) ** (t / 2) * l2, rel=1e-6)


def _steps(n):
    g = _grid(n)
    sharp = GridFunction.from_callable(g, lambda x: ((x > 0.25) & (x < 0.75)).astype(float))
    smooth = GridFunction.from_callable(
        g, lambda x: 0.5 * (np.tanh((x - 0.25) / 0.02) - np.tanh((x - 0.75) / 0.02)))
    return sharp, smooth


def test_sobolev_sharp_step_grows():
    s128, m128 = _steps(128)
    s512, m512 = _steps(512)
    r_sharp = sobolev_norm(s512, 2.0, 0.6) / sobolev_norm(s128, 2.0, 0.6)
    r_smooth = sobolev_norm(m512, 2.0, 0.6) / sobolev_norm(m128, 2.0, 0.6)
    # |k|^{-2} |k|^{1.2} summed up to N grows like N^{0.2}: norm ratio about 4^{0.1}
    assert r_sharp > 1.1
    assert abs(r_smooth - 1) < 1e-3


@pytest.mark.xfail(strict=True, reason="the H^0.6 norm of a step only grows like N^0.1 (ratio about 1.15-1.2, not 1.5)")
def test_sobolev_sharp_step_ratio_one_point_five():
    s128, _ = _steps(128)
    s512, _ = _steps(512)
    assert sobolev_norm(s512, 2.0, 0.6) / sobolev_norm(s128, 2.0, 0.6) > 1.5


def test_sobolev_monotone_in_t():
    u = _gf(np.random.default_rng(3).standard_normal((16, 16)))
    vals = [sobolev_norm(u, 2.5, t) for t in np.linspace(0, 2, 9)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_sobolev_domain():
    with pytest.raises(NormError):
        sobolev_norm(_gf(np.ones(4)), 1.0, 0.5)
    with pytest.raises(NormError):
        sobolev_norm(_gf(np.ones(4)), 2.0, -0.1)


def test_oscillation_examples():
    assert oscillation_seminorm(_gf(np.ones(64)), 0.5, 0.25) == 0.0
    g = _grid(256)
    u = GridFunction.from_callable(g, lambda x: (x < 0.5).astype(float))
    v = oscillation_seminorm(u, 1.0, 1 / 8)
    assert 1.8 <= v <= 2.2
    with pytest.raises(NormError):
        oscillation_seminorm(u, 1.0, 1 / 256)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 1.0])
def test_oscillation_hoelder_remark(alpha):
    g = _grid(512)
    u = GridFunction.from_callable(g, lambda x: x**alpha)
    osc = oscillation_seminorm(u, alpha, 0.25)
    hol = hoelder_seminorm(u.values, g.centers, alpha)
    assert osc <= 2**alpha * 1.0 * hol


def test_triangle_inequalities():
    rng = np.random.default_rng(4)
    for _ in range(20):
        a = _gf(rng.standard_normal((16, 16)))
        b = _gf(rng.standard_normal((16, 16)))
        assert bv_norm(a + b).total <= bv_norm(a).total + bv_norm(b).total + 1e-9
        assert sobolev_norm(a + b, 2.0, 0.5) <= sobolev_norm(a, 2.0, 0.5) + sobolev_norm(b, 2.0, 0.5) + 1e-9
        assert oscillation_seminorm(a + b, 0.5, 0.25) <= (
            oscillation_seminorm(a, 0.5, 0.25) + oscillation_seminorm(b, 0.5, 0.25) + 1e-9)


def test_lipschitz_multiplication():
    rng = np.random.default_rng(5)
    g2 = _grid(16, 2)
    for _ in range(30):
        u = GridFunction(g2, rng.standard_normal(256))
        c = rng.standard_normal(3)
        gfun = GridFunction.from_callable(g2, lambda X: c[0] + np.sin(c[1] * X[:, 0]) * np.cos(c[2] * X[:, 1]))
        lip = float(np.max(np.abs(gfun.values))) + discrete_lipschitz(gfun)
        assert bv_norm(GridFunction(g2, gfun.values * u.values)).total <= lip * bv_norm(u).total + 1e-9


def test_box_indicator_multiplication():
    rng = np.random.default_rng(6)
    g2 = _grid(16, 2)
    for _ in range(30):
        u = GridFunction(g2, _random_banded(rng, 16).ravel())
        lo = rng.integers(0, 15, 2)
        hi = lo + rng.integers(1, 16 - lo)
        ind = np.zeros((16, 16))
        ind[lo[0]:hi[0], lo[1]:hi[1]] = 1
        assert bv_norm(GridFunction(g2, ind.ravel() * u.values)).total <= bv_norm(u).total + 1e-9
