"""Time the compiled kernels against the pure-Python fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--steps 1000000] [--points 1000000] [--clips 100000]

Each kernel runs on identical inputs under both backends; the script checks
that the outputs agree bit for bit and prints one timing line per kernel.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from pwexpand import _pykernels
from pwexpand.config import load_bundled

try:
    from pwexpand import _ckernels
except ImportError:  # pragma: no cover
    _ckernels = None


def _best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_orbit(mod, m, steps):
    packed = m.packed()
    lo = np.array([[0.0]])
    hi = np.array([[1.0]])
    rng = np.random.default_rng(7)
    noise = rng.uniform(-1e-12, 1e-12, size=(steps, 1))

    def run():
        hist = np.zeros(256, dtype=np.int64)
        status, done, x = mod.orbit_hist(np.array([0.1234]), steps, 100, *packed, 1e-12,
                                         noise, lo, hi, 256, hist)
        return hist, status, done, x

    return run


def bench_step(mod, m, npts):
    X = np.random.default_rng(8).uniform(-1.0, 1.0, size=(npts, m.dim))
    packed = m.packed()
    return lambda: mod.step_points(X, *packed, 1e-12)


def bench_clip(mod, nclip):
    rng = np.random.default_rng(9)
    verts = np.array([[0.1, 0.2], [0.9, 0.05], [0.8, 0.95], [0.15, 0.7]])
    lo = rng.uniform(0.0, 0.9, size=(nclip, 2))
    hi = lo + rng.uniform(0.01, 0.3, size=(nclip, 2))
    return lambda: mod.clip_area_boxes(verts, lo, hi)


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return a.shape == b.shape and a.tobytes() == b.tobytes()
    return a == b


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=10**6)
    ap.add_argument("--points", type=int, default=10**6)
    ap.add_argument("--clips", type=int, default=10**5)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled kernels are not built; only the fallback is available")
        return 1
    doubling = load_bundled("doubling").map
    quadrant = load_bundled("quadrant").map
    cases = [
        (f"orbit_hist ({args.steps} steps, doubling)", lambda mod: bench_orbit(mod, doubling, args.steps)),
        (f"step_points ({args.points} points, quadrant)", lambda mod: bench_step(mod, quadrant, args.points)),
        (f"clip_area_boxes ({args.clips} boxes)", lambda mod: bench_clip(mod, args.clips)),
    ]
    print(f"{'kernel':<44} {'python [s]':>11} {'cython [s]':>11} {'speedup':>9}  identical")
    for label, make in cases:
        tp, outp = _best_of(make(_pykernels), 1)
        tc, outc = _best_of(make(_ckernels), args.repeat)
        print(f"{label:<44} {tp:11.4f} {tc:11.4f} {tp / tc:9.1f}  {_same(outp, outc)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
