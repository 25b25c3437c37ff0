import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from pwexpand.complexity import (
    RefinementCapError,
    complexity_begin,
    complexity_end,
    expansion_min,
    growth_rates,
    refine,
    reports,
)
from pwexpand.config import BUNDLED
from pwexpand.geometry import Interval, volume
from pwexpand.bounds import affine_commuting_bound

from conftest import affine_map, doubling_map


def _quadrant():
    pieces = [((i / 2, j / 2), ((i + 1) / 2, (j + 1) / 2), 2 * np.eye(2), (-i, -j)) for i in range(2) for j in range(2)]
    return affine_map(pieces, ambient=((0, 0), (1, 1)), name="quadrant")


def _endpoint_oracle(intervals):
    """Max closure incidence over all endpoints, with exact rationals."""
    pts = {e for iv in intervals for e in iv}
    return max(sum(lo <= x <= hi for lo, hi in intervals) for x in pts)


def test_doubling_cylinders_are_dyadic():
    cyl = refine(doubling_map(), 3)
    got = sorted((Interval.from_polytope(c.region).lo, Interval.from_polytope(c.region).hi) for c in cyl)
    assert got == [(k / 8, (k + 1) / 8) for k in range(8)]


def test_quadrant_level2_subsquares():
    cyl = refine(_quadrant(), 2)
    assert len(cyl) == 16
    for c in cyl:
        assert volume(c.region) == pytest.approx(1 / 16, abs=1e-14)
        lo, hi = c.region.bbox()
        np.testing.assert_allclose(hi - lo, [0.25, 0.25], atol=1e-14)
        np.testing.assert_allclose(lo * 4, np.round(lo * 4), atol=1e-12)


@pytest.mark.parametrize("name", BUNDLED)
def test_level_one_is_partition(bundled, name):
    m = bundled(name).map
    cyl = refine(m, 1)
    assert len(cyl) == len(m.branches)
    for c, dom in zip(cyl, m.domains):
        assert volume(c.region) == pytest.approx(volume(dom))


@pytest.mark.parametrize("name", BUNDLED)
def test_cylinders_partition_volume(bundled, name):
    m = bundled(name).map
    for n in (1, 2, 3):
        total = sum(volume(c.region) for c in refine(m, n))
        assert total == pytest.approx(m.ambient_volume(), rel=1e-6)


@pytest.mark.parametrize("name", BUNDLED)
def test_composed_map_matches_iteration(bundled, name):
    m = bundled(name).map
    for c in refine(m, 3):
        x = c.region.chebyshev_center()[0]
        y = x.copy()
        for k in c.itinerary:
            br = m.branches[k]
            y = br.forward(y[None, :])[0] if hasattr(br, "matrix") else np.array([float(br.forward(y[0]))])
        if c.composed_matrix is not None:
            np.testing.assert_allclose(c.composed_matrix @ x + c.composed_offset, y, atol=1e-9)
        else:
            assert c.image_interval.lo - 1e-9 <= y[0] <= c.image_interval.hi + 1e-9


def test_doubling_complexities():
    m = doubling_map()
    for n in range(1, 9):
        cyl = refine(m, n)
        db, de = complexity_begin(cyl, m), complexity_end(cyl, m)
        assert (db.value, db.certified) == (2, True)
        assert (de.value, de.certified) == (2**n, True)
        assert expansion_min(cyl)[0] == 2.0**n


def test_doubling_begin_matches_rational_oracle():
    for n in range(1, 7):
        ivs = [(Fraction(k, 2**n), Fraction(k + 1, 2**n)) for k in range(2**n)]
        cyl = refine(doubling_map(), n)
        assert complexity_begin(cyl, doubling_map()).value == _endpoint_oracle(ivs)


def test_quadrant_complexities():
    m = _quadrant()
    cyl = refine(m, 1)
    db, de = complexity_begin(cyl, m), complexity_end(cyl, m)
    assert db.value == 4 and not db.certified
    assert de.value == 4
    assert expansion_min(refine(m, 3))[0] == pytest.approx(8.0)


def test_single_branch_complexity_one():
    m = affine_map([((0.0,), (1.0,), 3.0, 0.0)], ambient=((0.0,), (3.0,)))
    for n in (1, 2, 3):
        cyl = refine(m, n)
        assert complexity_begin(cyl, m).value == 1
        assert complexity_end(cyl, m).value == 1


def test_mixed_slopes_expansion():
    # slope 2 on [0, 1/2], slope 3 on [1/2, 5/6], slope 6 on [5/6, 1]
    m = affine_map([((0.0,), (0.5,), 2.0, 0.0), ((0.5,), (5 / 6,), 3.0, -1.5), ((5 / 6,), (1.0,), 6.0, -5.0)])
    assert expansion_min(refine(m, 2))[0] == pytest.approx(4.0)


def test_cap_error_reports_partial_count(bundled):
    with pytest.raises(RefinementCapError) as info:
        refine(bundled("quadrant").map, 6, cap=500)
    assert info.value.partial_count > 500
    assert info.value.cap == 500


def _itinerary_oracle(m, n, samples=100000, seed=3):
    rng = np.random.default_rng(seed)
    boxes = [p.bbox() for p in m.ambient]
    which = rng.integers(len(boxes), size=samples)
    lo = np.array([boxes[w][0] for w in which])
    hi = np.array([boxes[w][1] for w in which])
    X = lo + (hi - lo) * rng.random((samples, m.dim))
    words = np.zeros((samples, n), dtype=np.int64)
    alive = np.ones(samples, dtype=bool)
    for s in range(n):
        count, found = m.locate(X, 0.0)
        alive &= count == 1
        words[:, s] = found
        X, _ = m.step(X, 0.0)
    return len({tuple(w) for w in words[alive]})


@pytest.mark.parametrize("name", BUNDLED)
def test_refine_matches_itinerary_oracle(bundled, name):
    m = bundled(name).map
    n = 1
    while len(refine(m, n + 1)) <= 100:
        n += 1
    assert len(refine(m, n)) == _itinerary_oracle(m, n)


@pytest.mark.parametrize("name", ["doubling", "tripling", "markov3", "swap2", "two_interval_doubling", "quadrant"])
def test_sub_and_supermultiplicativity(bundled, name):
    m = bundled(name).map
    reps = {r.n: r for r in reports(m, 5 if m.dim == 1 else 3)}
    for a, b in itertools.product(reps, reps):
        if a + b in reps:
            if m.dim == 1:
                assert reps[a + b].d_begin <= reps[a].d_begin * reps[b].d_begin
            assert reps[a + b].lambda_n >= reps[a].lambda_n * reps[b].lambda_n * (1 - 1e-9)


def test_commuting_product_count(bundled):
    m = bundled("commuting2d").map
    cb = affine_commuting_bound(m, 6)
    for k, c in enumerate(cb.distinct_products, start=1):
        assert c <= math.comb(k + 2 - 1, 2 - 1)


def test_growth_rates_doubling():
    rows = growth_rates(doubling_map(), 6)
    roots = [r.d_begin_root for r in rows]
    assert roots == pytest.approx([2 ** (1 / n) for n in range(1, 7)])
    assert all(a > b for a, b in zip(roots, roots[1:]))
    assert all(r.lambda_root == pytest.approx(2.0) for r in rows)


def test_growth_rates_quadrant_subexponential(bundled):
    rows = growth_rates(bundled("quadrant").map, 4)
    roots = [r.d_begin_root for r in rows]
    assert all(a >= b for a, b in zip(roots, roots[1:]))
    assert roots[-1] < roots[0]
