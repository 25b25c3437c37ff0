import numpy as np
import pytest

from pwexpand.config import load_bundled
from pwexpand.geometry import Polytope
from pwexpand.maps import AffineBranch, PiecewiseMap


@pytest.fixture(scope="session")
def bundled():
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = load_bundled(name)
        return cache[name]

    return get


def affine_map(pieces, ambient=((0.0,), (1.0,)), name="test"):
    """Build a map from ``[(lo, hi, matrix, offset), ...]`` box pieces."""
    branches = [
        AffineBranch(Polytope.box(lo, hi), np.atleast_2d(np.asarray(a, dtype=float)), np.atleast_1d(np.asarray(c, dtype=float)))
        for lo, hi, a, c in pieces
    ]
    return PiecewiseMap(branches, Polytope.box(*ambient), name=name)


def doubling_map():
    return affine_map([((0.0,), (0.5,), 2.0, 0.0), ((0.5,), (1.0,), 2.0, -1.0)], name="doubling")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
