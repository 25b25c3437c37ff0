"""Declarative map configs (TOML) and the bundled examples.

Schema::

    name = "doubling"
    dim = 1
    weight = "perron_frobenius"      # or "custom" (then every branch has `weight`)
    seed = 1

    [ambient]
    boxes = [[[0.0], [1.0]]]         # list of [lo, hi]; 1D may use [[0, 1]]

    [caps]                           # optional
    cylinder_cap = 1000000
    grid_n = 256
    mc_samples = 256

    [[branch]]
    kind = "affine"
    interval = [0.0, 0.5]            # 1D domain; or box = [lo, hi]; or halfspaces = [[n..., c], ...]
    matrix = [[2.0]]                 # a bare number is allowed in 1D
    offset = [0.0]

    [[branch]]
    kind = "smooth1d"
    interval = [0.5, 1.0]
    forward = "2*x - 1 + 0.1*sin(2*pi*x)"
    derivative = "2 + 0.2*pi*cos(2*pi*x)"
    alpha = 1.0
    hoelder_constant = 4.0           # optional; certifies the expansion check

Numbers may be given as strings holding constant expressions (``"1/3"``).
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .expr import Expression, ExpressionError
from .geometry import GeometryError, Interval, Polytope
from .maps import CUSTOM, PERRON_FROBENIUS, AffineBranch, MapError, PiecewiseMap, SmoothBranch1D

BUNDLED = (
    "doubling",
    "tripling",
    "markov3",
    "quadrant",
    "commuting2d",
    "two_interval_doubling",
    "swap2",
)

DEFAULT_CAPS = {"cylinder_cap": 10**6, "grid_n": 256, "mc_samples": 256}


class ConfigError(ValueError):
    pass


@dataclass
class MapConfig:
    map: PiecewiseMap
    seed: int
    caps: dict
    source: str
    raw: dict = field(repr=False, default_factory=dict)

    @property
    def name(self) -> str:
        return self.map.name


def _num(v, what: str) -> float:
    if isinstance(v, bool):
        raise ConfigError(f"{what}: expected a number")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        try:
            return float(Expression(v, 1)(0.0))
        except ExpressionError as exc:
            raise ConfigError(f"{what}: {exc}") from None
    raise ConfigError(f"{what}: expected a number, got {type(v).__name__}")


def _vec(v, dim: int, what: str) -> np.ndarray:
    if dim == 1 and not isinstance(v, list):
        v = [v]
    if not isinstance(v, list) or len(v) != dim:
        raise ConfigError(f"{what}: expected {dim} numbers")
    return np.array([_num(x, what) for x in v])


def _mat(v, dim: int, what: str) -> np.ndarray:
    if dim == 1 and not isinstance(v, list):
        return np.array([[_num(v, what)]])
    if not isinstance(v, list) or len(v) != dim:
        raise ConfigError(f"{what}: expected a {dim}x{dim} matrix")
    return np.array([_vec(r, dim, what) for r in v])


def _domain(spec: dict, dim: int, what: str) -> Polytope:
    keys = [k for k in ("interval", "box", "halfspaces") if k in spec]
    if len(keys) != 1:
        raise ConfigError(f"{what}: give exactly one of interval, box, halfspaces")
    key = keys[0]
    val = spec[key]
    try:
        if key == "interval":
            if dim != 1 or not isinstance(val, list) or len(val) != 2:
                raise ConfigError(f"{what}: interval needs dim = 1 and [lo, hi]")
            return Polytope.interval(_num(val[0], what), _num(val[1], what))
        if key == "box":
            if not isinstance(val, list) or len(val) != 2:
                raise ConfigError(f"{what}: box needs [lo, hi]")
            return Polytope.box(_vec(val[0], dim, what), _vec(val[1], dim, what))
        rows = [[_num(x, what) for x in r] for r in val]
        if any(len(r) != dim + 1 for r in rows):
            raise ConfigError(f"{what}: halfspace rows need {dim + 1} entries (normal..., offset)")
        arr = np.array(rows)
        p = Polytope.from_halfspaces(arr[:, :dim], arr[:, dim])
    except GeometryError as exc:
        raise ConfigError(f"{what}: {exc}") from None
    if not p.bounded:
        raise ConfigError(f"{what}: domain is unbounded")
    return p


def _branch(spec: dict, dim: int, idx: int, custom: bool):
    what = f"branch {idx}"
    if not isinstance(spec, dict):
        raise ConfigError(f"{what}: expected a table")
    kind = spec.get("kind", "affine")
    weight = None
    if custom:
        if "weight" not in spec:
            raise ConfigError(f"{what}: custom weight requested but no weight expression")
        try:
            weight = Expression(str(spec["weight"]), dim)
        except ExpressionError as exc:
            raise ConfigError(f"{what}: {exc}") from None
    dom = _domain(spec, dim, what)
    if dom.empty:
        raise ConfigError(f"{what}: empty domain")
    try:
        if kind == "affine":
            for key in ("matrix", "offset"):
                if key not in spec:
                    raise ConfigError(f"{what}: missing {key}")
            return AffineBranch(dom, _mat(spec["matrix"], dim, what), _vec(spec["offset"], dim, what), weight)
        if kind == "smooth1d":
            if dim != 1:
                raise ConfigError(f"{what}: smooth1d branches need dim = 1")
            for key in ("forward", "derivative"):
                if key not in spec:
                    raise ConfigError(f"{what}: missing {key}")
            fwd = Expression(str(spec["forward"]), 1)
            der = Expression(str(spec["derivative"]), 1)
            alpha = _num(spec.get("alpha", 1.0), what)
            hc = spec.get("hoelder_constant")
            return SmoothBranch1D(
                Interval.from_polytope(dom), fwd, der, alpha,
                None if hc is None else _num(hc, what), weight,
                {"forward": fwd.source, "derivative": der.source},
            )
    except (ExpressionError, MapError) as exc:
        raise ConfigError(f"{what}: {exc}") from None
    raise ConfigError(f"{what}: unknown kind {kind!r}")


def parse_config(raw: dict, source: str = "<memory>") -> MapConfig:
    """Build a :class:`MapConfig` from a decoded TOML table."""
    if "dim" not in raw:
        raise ConfigError("missing dim")
    dim = raw["dim"]
    if not isinstance(dim, int) or dim < 1:
        raise ConfigError("dim must be a positive integer")
    weight = raw.get("weight", PERRON_FROBENIUS)
    if weight not in (PERRON_FROBENIUS, CUSTOM):
        raise ConfigError(f"unknown weight {weight!r}")
    amb = raw.get("ambient")
    if not isinstance(amb, dict) or "boxes" not in amb:
        raise ConfigError("missing [ambient] boxes")
    boxes = []
    for k, bx in enumerate(amb["boxes"]):
        if not isinstance(bx, list) or len(bx) != 2:
            raise ConfigError(f"ambient box {k}: expected [lo, hi]")
        lo, hi = _vec(bx[0], dim, f"ambient box {k}"), _vec(bx[1], dim, f"ambient box {k}")
        if np.any(hi <= lo):
            raise ConfigError(f"ambient box {k} is degenerate")
        boxes.append(Polytope.box(lo, hi))
    specs = raw.get("branch")
    if not isinstance(specs, list) or not specs:
        raise ConfigError("no [[branch]] entries")
    branches = [_branch(s, dim, i, weight == CUSTOM) for i, s in enumerate(specs)]
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a nonnegative integer")
    caps = dict(DEFAULT_CAPS)
    for key, val in raw.get("caps", {}).items():
        if key not in DEFAULT_CAPS:
            raise ConfigError(f"unknown cap {key!r}")
        if not isinstance(val, int) or val < 1:
            raise ConfigError(f"cap {key} must be a positive integer")
        caps[key] = val
    name = raw.get("name") or os.path.splitext(os.path.basename(source))[0]
    try:
        m = PiecewiseMap(branches, tuple(boxes), weight, name=str(name))
    except MapError as exc:
        raise ConfigError(str(exc)) from None
    return MapConfig(m, seed, caps, source, raw)


def bundled_path(name: str) -> str:
    return str(resources.files("pwexpand").joinpath("data", f"{name}.toml"))


def resolve(ref: str) -> str:
    """A config path, or the path of a bundled example given by name."""
    if os.path.exists(ref):
        return ref
    stem = os.path.splitext(os.path.basename(ref))[0]
    if stem in BUNDLED and not os.path.dirname(ref):
        return bundled_path(stem)
    raise ConfigError(f"no such config or bundled example: {ref}")


def load_config(ref: str) -> MapConfig:
    path = resolve(ref)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(raw, path)


def load_bundled(name: str) -> MapConfig:
    if name not in BUNDLED:
        raise ConfigError(f"unknown bundled example {name!r}")
    return load_config(bundled_path(name))
