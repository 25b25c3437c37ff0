"""Command-line interface.

Exit codes: 0 success, 1 analysis failure, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import bounds as bd
from . import complexity as cx
from . import measures as ms
from . import transfer as tr
from .config import BUNDLED, ConfigError, MapConfig, load_config
from .expr import Expression, ExpressionError
from .grid import Grid
from .maps import validate
from .output import csv_text, json_text

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class AnalysisFailure(RuntimeError):
    """Raised inside a subcommand; carries partial output."""

    def __init__(self, message: str, output: str | None = None):
        self.output = output
        super().__init__(message)


# -- helpers --------------------------------------------------------------------


def _seed(args, cfg: MapConfig) -> int:
    return cfg.seed if args.seed is None else args.seed


def _emit(args, cfg: MapConfig, command: str, text: str, ext: str) -> None:
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, f"{cfg.name}_{command}.{ext}")
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _grid(cfg: MapConfig, n: int | None) -> Grid:
    return Grid.over(cfg.map.ambient, n or cfg.caps["grid_n"])


def _require_accepted(cfg: MapConfig):
    rep = validate(cfg.map)
    if not rep.accepted:
        raise AnalysisFailure("map failed validation: " + "; ".join(rep.failures))
    return rep


def _expr(src: str, dim: int) -> Expression:
    try:
        return Expression(src, dim)
    except ExpressionError as exc:
        raise ConfigError(str(exc)) from None


# -- subcommands ------------------------------------------------------------------


def cmd_validate(args, cfg: MapConfig) -> int:
    rep = validate(cfg.map)
    body = {"map": cfg.name, "report": rep.to_dict()}
    _emit(args, cfg, "validate", json_text(body), "json")
    return EXIT_OK if rep.accepted else EXIT_FAIL


COMPLEXITY_HEADER = [
    "n", "cylinders", "d_begin", "d_end", "lambda_n", "lambda_eig",
    "d_begin_root", "d_end_root", "lambda_root", "d_begin_running_inf", "lambda_running_sup",
    "d_begin_flag", "d_end_flag", "lambda_flag",
]


def _flag(ok: bool, kind: str = "lower_bound") -> str:
    return "exact" if ok else kind


def _complexity_rows(reps):
    rows = []
    for r, g in zip(reps, cx.growth_table(reps)):
        rows.append([
            r.n, r.cylinder_count, r.d_begin, r.d_end, r.lambda_n,
            "" if r.lambda_eig is None else r.lambda_eig,
            g.d_begin_root, g.d_end_root, g.lambda_root, g.d_begin_inf, g.lambda_sup,
            _flag(r.certified["d_begin"]), _flag(r.certified["d_end"]), _flag(r.certified["lambda_n"], "sampled"),
        ])
    return rows


def _render_complexity(args, cfg, reps, error=None) -> str:
    rows = _complexity_rows(reps)
    if args.format == "json":
        body = {"map": cfg.name, "rows": [dict(zip(COMPLEXITY_HEADER, r)) for r in rows]}
        if error:
            body["error"] = error
        return json_text(body)
    return csv_text(COMPLEXITY_HEADER, rows)


def cmd_complexity(args, cfg: MapConfig) -> int:
    _require_accepted(cfg)
    reps = []
    cap = args.cap or cfg.caps["cylinder_cap"]
    try:
        for level in cx.iter_refine(cfg.map, args.n_max, cap):
            reps.append(cx.complexity_report(cfg.map, level, seed=_seed(args, cfg)))
    except cx.RefinementCapError as exc:
        raise AnalysisFailure(str(exc), _render_complexity(args, cfg, reps, str(exc))) from None
    _emit(args, cfg, "complexity", _render_complexity(args, cfg, reps), args.format)
    return EXIT_OK


def cmd_bounds(args, cfg: MapConfig) -> int:
    _require_accepted(cfg)
    m = cfg.map
    alpha = m.alpha if args.alpha is None else args.alpha
    try:
        reps = cx.reports(m, args.n_max, cfg.caps["cylinder_cap"], seed=_seed(args, cfg))
    except cx.RefinementCapError as exc:
        raise AnalysisFailure(str(exc)) from None
    r = reps[-1]
    out = {
        "map": cfg.name,
        "n": r.n,
        "alpha": alpha,
        "complexity": {
            "d_begin": r.d_begin, "d_end": r.d_end, "lambda_n": r.lambda_n, "lambda_eig": r.lambda_eig,
            "d_begin_flag": _flag(r.certified["d_begin"]), "d_end_flag": _flag(r.certified["d_end"]),
            "lambda_flag": _flag(r.certified["lambda_n"], "sampled"),
            "lambda_kind": "singular_value",
        },
        "hypothesis_value": bd.hypothesis_value(r),
    }
    failures = []
    if args.p is not None or args.t is not None:
        if args.p is None or args.t is None:
            raise ConfigError("--p and --t must be given together")
        try:
            bd.BoundInputs(args.p, args.t, alpha)
        except bd.ParameterDomainError as exc:
            raise AnalysisFailure(f"parameter domain: {exc}") from None
        sob = [bd.sobolev_radius_bound(m, x, args.p, args.t) for x in reps]
        phys = [bd.physical_condition(m, x, args.p, args.t).value for x in reps]
        out["sobolev"] = {"p": args.p, "t": args.t, "value": sob[-1], "running_min": bd.running_min(sob)[-1],
                          "weight_flag": "sampled" if r.weight_sampled else "exact"}
        out["physical_condition"] = {"p": args.p, "t": args.t, "value": phys[-1], "passed": phys[-1] < 1.0,
                                     "running_min": bd.running_min(phys)[-1]}
    try:
        bv = [bd.bv_radius_bound(m, x) for x in reps]
        out["bv"] = {"value": bv[-1], "running_min": bd.running_min(bv)[-1], "lambda_kind": "singular_value"}
    except bd.BoundError as exc:
        out["bv"] = {"error": str(exc)}
    if m.is_affine:
        try:
            cb = bd.affine_commuting_bound(m, args.n_max)
            out["affine_commuting"] = dict(cb.to_dict(), lambda_kind="eigenvalue_modulus")
        except bd.BoundError as exc:
            out["affine_commuting"] = {"error": str(exc)}
            if args.commuting:
                failures.append(str(exc))
    elif args.commuting:
        failures.append("commuting bound needs an affine map")
    r1 = reps[0]
    try:
        out["saussol"] = {"value": bd.saussol_bound(r1.lambda_n, r1.d_begin, m.dim, alpha),
                          "lambda_1": r1.lambda_n, "d1_begin": r1.d_begin}
    except bd.BoundError as exc:
        out["saussol"] = {"error": str(exc)}
    it = bd.saussol_iterated_bound(reps, alpha)
    out["saussol_iterated"] = {"value": it.value, "complexity_term": it.complexity_term,
                               "expansion_term": it.expansion_term}
    if args.search:
        res = bd.search_parameters(m, r, alpha)
        out["search"] = None if res is None else {
            "p": res.p, "t": res.t, "value": res.value, "passing_pairs": res.passing_pairs,
            "tried_pairs": res.tried_pairs,
        }
    if failures:
        out["failures"] = failures
    _emit(args, cfg, "bounds", json_text(out), "json")
    return EXIT_FAIL if failures else EXIT_OK


def _operator(args, cfg: MapConfig):
    grid = _grid(cfg, args.N)
    kind = None if args.assembly == "exact" else tr.MONTE_CARLO
    return tr.assemble(cfg.map, grid, kind=kind, samples=cfg.caps["mc_samples"], seed=_seed(args, cfg))


def cmd_spectrum(args, cfg: MapConfig) -> int:
    _require_accepted(cfg)
    op = _operator(args, cfg)
    try:
        rep = tr.spectrum(op, args.k)
    except tr.SpectralError as exc:
        raise AnalysisFailure(str(exc)) from None
    checks = {
        "min_entry": float(op.matrix.min()) if op.matrix.nnz else 0.0,
        "mass_defect": float(np.max(np.abs(op.column_sums() - 1.0))),
        "norm1": rep.norm1,
    }
    ok = checks["min_entry"] >= 0 and rep.norm1 <= 1 + 1e-8
    if op.assembly != tr.MONTE_CARLO and op.weight_kind == "perron_frobenius":
        ok = ok and checks["mass_defect"] <= 1e-8
    if args.format == "json":
        body = {"map": cfg.name, "grid_n": op.grid.n, "assembly": op.assembly, "spectrum": rep.to_dict(),
                "checks": checks, "flag": "mc" if op.assembly == tr.MONTE_CARLO else "exact"}
        text = json_text(body)
    else:
        rows = [[i, z.real, z.imag, abs(z)] for i, z in enumerate(rep.eigenvalues)]
        text = csv_text(["index", "re", "im", "modulus"], rows)
    _emit(args, cfg, "spectrum", text, args.format)
    return EXIT_OK if ok else EXIT_FAIL


def _initial_points(cfg: MapConfig, count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return cx._ambient_sample(cfg.map.ambient, count, rng)


def cmd_measures(args, cfg: MapConfig) -> int:
    _require_accepted(cfg)
    seed = _seed(args, cfg)
    op = _operator(args, cfg)
    try:
        phys = ms.decompose_physical(op)
    except tr.TransferError as exc:
        raise AnalysisFailure(str(exc)) from None
    pts = _initial_points(cfg, args.seeds, seed)
    basins = ms.basin_map(cfg.map, op, phys, pts, n=args.orbit, burn_in=args.burn_in, seed=seed)
    defects = [max(ms.pushforward_defects(op, c)) for c in phys.components]
    ok = basins.coverage >= args.min_coverage and all(d <= 1e-6 for d in defects)
    if args.format == "json":
        body = {"map": cfg.name, "grid_n": op.grid.n, "decomposition": phys.to_dict(),
                "pushforward_defects": defects, "basins": basins.to_dict(), "flag": "mc"}
        text = json_text(body)
    else:
        header = ["point"] + [f"x{a}" for a in range(cfg.map.dim)] + ["component"] + \
            [f"dist_{k}" for k in range(len(phys.components))]
        rows = []
        for i, x0 in enumerate(pts):
            rows.append([i] + list(x0) + [int(basins.assignment[i])] + list(basins.distances[i]))
        text = csv_text(header, rows)
    _emit(args, cfg, "measures", text, args.format)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_correlation(args, cfg: MapConfig) -> int:
    _require_accepted(cfg)
    m = cfg.map
    f = _expr(args.f, m.dim)
    g = _expr(args.g, m.dim)
    op = _operator(args, cfg)
    try:
        phys = ms.decompose_physical(op)
    except tr.TransferError as exc:
        raise AnalysisFailure(str(exc)) from None
    if not 0 <= args.component < len(phys.components):
        raise ConfigError(f"component {args.component} out of range (have {len(phys.components)})")
    comp = phys.components[args.component]
    power = comp.cycle_length if args.power is None else args.power
    series = ms.correlation(m, comp, f, g, args.n_max, args.mc_points, seed=_seed(args, cfg), power=power,
                            test_pair=(args.f, args.g, args.hoelder))
    if args.format == "json":
        body = {"map": cfg.name, "component": args.component, "power": power, "series": series.to_dict()}
        text = json_text(body)
    else:
        text = series.to_csv()
    _emit(args, cfg, "correlation", text, args.format)
    rate = "unavailable" if series.fitted_rate is None else format(series.fitted_rate, ".17g")
    sys.stderr.write(f"fitted_rate {rate}\n")
    return EXIT_OK


def cmd_export_operator(args, cfg: MapConfig) -> int:
    _require_accepted(cfg)
    op = _operator(args, cfg)
    out = args.out or "."
    stem = os.path.join(out, f"{cfg.name}_operator_N{op.grid.n}")
    csv_path, json_path = tr.export_operator(op, stem)
    if not args.out:
        sys.stdout.write(csv_path + "\n" + json_path + "\n")
    return EXIT_OK


# -- parser ------------------------------------------------------------------------


def _globals(p: argparse.ArgumentParser, suppress: bool) -> None:
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    p.add_argument("--seed", type=int, help="override the config seed", **kw)
    p.add_argument("--out", metavar="DIR", help="write outputs into DIR instead of stdout", **kw)
    p.add_argument("--format", choices=("csv", "json"), help="output format (default csv)", **kw)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pwexpand",
        description="Complexities, spectral bounds and Ulam spectra of piecewise expanding maps. "
        f"CONFIG is a TOML file or a bundled example ({', '.join(BUNDLED)}).",
    )
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out", metavar="DIR", default=None, help="write outputs into DIR instead of stdout")
    parser.add_argument("--format", choices=("csv", "json"), default="csv", help="output format (default csv)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        _globals(p, True)
        p.add_argument("config")
        p.set_defaults(func=func)
        return p

    add("validate", cmd_validate, "check the expansion hypotheses")

    p = add("complexity", cmd_complexity, "cylinder counts, D_n^b, D_n^e, lambda_n")
    p.add_argument("--n-max", type=int, default=6)
    p.add_argument("--cap", type=int, default=None, help="cylinder cap (default from config)")

    p = add("bounds", cmd_bounds, "essential spectral radius bounds")
    p.add_argument("--n-max", type=int, default=6)
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--search", action="store_true", help="grid search for a passing (p, t)")
    p.add_argument("--commuting", action="store_true", help="require the commuting-affine bound")

    for name, func, help_ in (
        ("spectrum", cmd_spectrum, "Ulam matrix spectrum"),
        ("measures", cmd_measures, "ergodic decomposition and basins"),
        ("correlation", cmd_correlation, "decay of correlations"),
        ("export-operator", cmd_export_operator, "write the Ulam matrix as CSV triplets + JSON"),
    ):
        p = add(name, func, help_)
        p.add_argument("--N", type=int, default=None, help="cells per axis (default from config)")
        p.add_argument("--assembly", choices=("exact", "mc"), default="exact")
        if name == "spectrum":
            p.add_argument("--k", type=int, default=8)
        if name == "measures":
            p.add_argument("--seeds", type=int, default=100, help="number of initial points")
            p.add_argument("--orbit", type=int, default=100_000, help="orbit length per point")
            p.add_argument("--burn-in", type=int, default=100)
            p.add_argument("--min-coverage", type=float, default=0.99)
        if name == "correlation":
            p.add_argument("--f", required=True)
            p.add_argument("--g", required=True)
            p.add_argument("--n-max", type=int, default=10)
            p.add_argument("--mc-points", type=int, default=10**6)
            p.add_argument("--component", type=int, default=0)
            p.add_argument("--power", type=int, default=None, help="iterate T^power (default: cycle length)")
            p.add_argument("--hoelder", type=float, default=1.0, help="declared Hoelder exponent of f, g")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except ConfigError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except AnalysisFailure as exc:
        if exc.output:
            _emit(args, cfg, args.command, exc.output, args.format)
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_FAIL
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
