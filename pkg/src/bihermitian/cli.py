"""Command line front-end.

Examples
--------
    bihermitian solve --config configs/torus_random.json --out runs/mms
    bihermitian hopf --alpha 1 --beta 2 --check brackets
    bihermitian report --preset A5

Exit codes: 0 success, 2 solver failure or failed criterion, 3 bad
configuration. ``report.json`` is deterministic for a fixed config; wall
times and timestamps go to ``metadata.json``.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import platform
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import acceptance
from .backends import flat_torus_metric, make_grid, tricerri_metric
from .cohomology import bracket_scale, conformal_family, decompose
from .curvature import bismut_ricci
from .elliptic import gauduchon_factor
from .errors import BihermitianError, ConfigurationError
from .forms import box, bracket, pluriclosed_residual
from .grid import HOPF, INOUE, NEUMANN, TORUS, GridSpec, ScalarField, random_smooth_field
from .hopf import (SOLITON_SIGN, hopf_bracket, hopf_bracket_constants, k_profile,
                   soliton_residual, su_metric)
from .tma import (SolverOptions, TmaProblem, estimates_report, flatten_bundle,
                  prescribe_bismut_ricci, solve_linear, solve_nonlinear)

OUTPUT_ENV = "BIHERMITIAN_OUTPUT_DIR"
DEFAULT_OUTPUT = "bihermitian-out"

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG = 0, 2, 3

SCHEMA = {
    "backend": {"kind", "sizes", "params"},
    "problem": {"kind", "p", "q", "signs", "F", "G", "base", "rA", "rB", "v", "basis_t",
                "t1", "t2", "check", "t_values"},
    "solver": {"tol", "max_newton", "path_steps", "floor", "max_halvings"},
    "output": {"dir"},
    "seed": None,
}
FIELD_KEYS = {"kind", "value", "seed", "amplitude", "decay", "expr"}
BASE_KEYS = {"kind", "a", "b", "t", "seed", "amplitude"}
PROBLEM_KINDS = ("linear", "nonlinear", "prescribe", "flatten", "decompose", "hopf")


class ConfigError(Exception):
    """Invalid configuration; the message names the offending key."""


# ---------------------------------------------------------------------------
# configuration


def _check_keys(section, allowed, where):
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def load_config(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    _check_keys(cfg, SCHEMA, "config")
    for name, keys in SCHEMA.items():
        if keys is None or name not in cfg:
            continue
        if not isinstance(cfg[name], dict):
            raise ConfigError(f"{name} must be an object")
        _check_keys(cfg[name], keys, name)
    backend = cfg.get("backend")
    if backend is None:
        raise ConfigError("missing key: backend")
    if backend.get("kind") not in (TORUS, HOPF, INOUE):
        raise ConfigError(f"backend.kind: unknown backend {backend.get('kind')!r} "
                          f"(expected {TORUS}, {HOPF} or {INOUE})")
    problem = cfg.get("problem", {})
    if "kind" in problem and problem["kind"] not in PROBLEM_KINDS:
        raise ConfigError(f"problem.kind: unknown problem {problem['kind']!r}")
    for key in ("F", "G", "v"):
        if key in problem:
            _check_keys(problem[key], FIELD_KEYS, f"problem.{key}")
    if "base" in problem:
        _check_keys(problem["base"], BASE_KEYS, "problem.base")


def build_grid(cfg):
    b = cfg["backend"]
    try:
        return make_grid(b["kind"], b.get("sizes"), **b.get("params", {}))
    except (TypeError, ValueError, ConfigurationError) as exc:
        raise ConfigError(f"backend: {exc}") from None


def _namespace(grid):
    """Coordinate names available to expression fields."""
    mesh = grid.mesh()
    if grid.kind == TORUS:
        names = ("x1", "x2", "x3", "x4")
    elif grid.kind == HOPF:
        names = ("x", "s")
    else:
        names = ("y",)
    return dict(zip(names, mesh))


def build_field(grid, spec, seed=0):
    """ScalarField from a ``{kind: zero|constant|random|expression}`` spec."""
    kind = spec.get("kind", "zero")
    if kind == "zero":
        return grid.zeros()
    if kind == "constant":
        return ScalarField(grid, np.full(grid.shape, float(spec.get("value", 0.0))))
    if kind == "random":
        return random_smooth_field(grid, int(spec.get("seed", seed)),
                                   float(spec.get("amplitude", 1.0)),
                                   float(spec.get("decay", 1.0)))
    if kind == "expression":
        import sympy
        coords = _namespace(grid)
        symbols = sympy.symbols(list(coords))
        try:
            expr = sympy.sympify(spec["expr"])
        except (KeyError, sympy.SympifyError) as exc:
            raise ConfigError(f"field expression: {exc}") from None
        stray = {str(s) for s in expr.free_symbols} - set(coords)
        if stray:
            raise ConfigError(f"field expression uses unknown symbols: {', '.join(sorted(stray))}")
        fn = sympy.lambdify(symbols, expr, "numpy")
        values = np.broadcast_to(np.asarray(fn(*coords.values()), dtype=float), grid.shape)
        return ScalarField(grid, values.copy())
    raise ConfigError(f"field kind: unknown kind {kind!r}")


def build_base(grid, spec):
    kind = spec.get("kind")
    if kind is None:
        kind = {TORUS: "flat", HOPF: "su", INOUE: "tricerri"}[grid.kind]
    if kind == "flat":
        return flat_torus_metric(grid)
    if kind == "tricerri":
        return tricerri_metric(grid, float(spec.get("a", 1.0)), float(spec.get("b", 1.0)))
    if kind == "su":
        return su_metric(k_profile(grid.alpha, grid.beta, grid), float(spec.get("t", 0.0)))
    if kind == "conformal":
        phi = random_smooth_field(grid, int(spec.get("seed", 0)),
                                  float(spec.get("amplitude", 0.3)))
        return conformal_family(flat_torus_metric(grid) * np.exp(phi), float(spec.get("t", 0.0)))
    raise ConfigError(f"problem.base.kind: unknown base metric {kind!r}")


def solver_options(cfg):
    return SolverOptions(**cfg.get("solver", {}))


# ---------------------------------------------------------------------------
# output


def output_dir(cfg=None, override=None):
    if override:
        return Path(override)
    if cfg and "output" in cfg and "dir" in cfg["output"]:
        return Path(cfg["output"]["dir"])
    return Path(os.environ.get(OUTPUT_ENV, DEFAULT_OUTPUT))


def write_field_csv(path, field):
    """Row-major dump with coordinates, 17 significant digits."""
    grid = field.grid
    axes = [grid.axis(a) for a in range(grid.ndim)]
    coords = np.meshgrid(*axes, indexing="ij")
    cols = [c.ravel() for c in coords] + [np.asarray(field.values).ravel()]
    header = ",".join([f"axis{a}" for a in range(grid.ndim)] + ["value"])
    np.savetxt(path, np.column_stack(cols), delimiter=",", fmt="%.17g", header=header,
               comments="")


def write_rows_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        obj = obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


def write_report(outdir, report, metadata):
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "report.json", "w") as fh:
        json.dump(_clean(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    meta = {"created": datetime.now(timezone.utc).isoformat(), "version": __version__,
            "python": platform.python_version(), "numpy": np.__version__}
    meta.update(metadata)
    with open(outdir / "metadata.json", "w") as fh:
        json.dump(_clean(meta), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# commands


def _solve(cfg, grid):
    problem = cfg.get("problem", {})
    kind = problem.get("kind", "nonlinear")
    base = build_base(grid, problem.get("base", {}))
    seed = int(cfg.get("seed", 0))
    opts = solver_options(cfg)
    fields = {}
    if kind == "linear":
        rep = solve_linear(base, build_field(grid, problem.get("F", {}), seed), tol=opts.tol)
    elif kind == "prescribe":
        G = build_field(grid, problem.get("G", {}), seed)
        rep = prescribe_bismut_ricci(base, G, tol=opts.tol)
        rho = bismut_ricci(base) + box(G)
        rep.extra["ricci_error"] = (bismut_ricci(rep.omega_u) - rho).sup()
    elif kind == "flatten":
        p, q = problem.get("p"), problem.get("q")
        if p is None or q is None:
            if grid.kind != HOPF:
                raise ConfigError("problem.p and problem.q are required for flatten")
            p, q = grid.beta, -grid.alpha
        rep = flatten_bundle(base, float(p), float(q), opts)
    elif kind == "nonlinear":
        F = build_field(grid, problem.get("F", {}), seed)
        tp = TmaProblem(base, F, float(problem.get("p", 0.5)), float(problem.get("q", 1.0)),
                        tuple(problem.get("signs", (1, -1))))
        rep = solve_nonlinear(tp, opts)
        if 0 < tp.p < 1 and tp.q == 1 and tuple(tp.signs) == (1, -1):
            rep.verdicts = estimates_report(tp, rep)
    else:
        raise ConfigError(f"problem.kind: {kind!r} is not handled by solve")
    fields["u"] = rep.u
    fields["omega_u_plus"] = rep.omega_u.plus
    fields["omega_u_minus"] = rep.omega_u.minus
    out = {"command": "solve", "problem": kind, "grid": grid.describe(), **rep.to_dict()}
    return out, fields, {"wall_time_s": rep.wall_time}


def _decompose(cfg, grid):
    problem = cfg.get("problem", {})
    seed = int(cfg.get("seed", 0))
    base_spec = dict(problem.get("base", {"kind": "conformal"}))
    ts = problem.get("basis_t", [0.0, 1.0])
    A = build_base(grid, {**base_spec, "t": ts[0]})
    B = build_base(grid, {**base_spec, "t": ts[1]})
    rA, rB = float(problem.get("rA", 2.0)), float(problem.get("rB", 3.0))
    v = build_field(grid, problem.get("v", {"kind": "random", "amplitude": 0.1}), seed)
    omega = A * rA + B * rB + box(v, NEUMANN)
    dec = decompose(omega, A, B)
    out = {"command": "decompose", "grid": grid.describe(), "rA": dec.rA, "rB": dec.rB,
           "rA_expected": rA, "rB_expected": rB, "reconstruction_residual": dec.residual,
           "bracket_coordinates": list(dec.bracket_coords)}
    return out, {"u": dec.u}, {}


def cmd_solve(args):
    cfg = load_config(args.config)
    grid = build_grid(cfg)
    kind = cfg.get("problem", {}).get("kind", "nonlinear")
    if kind == "decompose":
        return _emit(cfg, args, *_decompose(cfg, grid))
    if kind == "hopf":
        return _emit(cfg, args, *_hopf_checks(grid, cfg.get("problem", {})))
    return _emit(cfg, args, *_solve(cfg, grid))


def cmd_decompose(args):
    cfg = load_config(args.config)
    return _emit(cfg, args, *_decompose(cfg, build_grid(cfg)))


def cmd_gauduchon(args):
    cfg = load_config(args.config)
    grid = build_grid(cfg)
    base = build_base(grid, cfg.get("problem", {}).get("base", {}))
    f, rep = gauduchon_factor(base)
    out = {"command": "gauduchon", "grid": grid.describe(), "residual": rep.residual,
           "normalization_error": rep.normalization_error, "method": rep.method,
           "f_min": f.min(), "f_max": f.max()}
    return _emit(cfg, args, out, {"f": f}, {})


def cmd_ricci(args):
    cfg = load_config(args.config)
    grid = build_grid(cfg)
    base = build_base(grid, cfg.get("problem", {}).get("base", {}))
    ric = bismut_ricci(base)
    out = {"command": "ricci", "grid": grid.describe(), "sup_norm": ric.sup(),
           "pluriclosed_residual": pluriclosed_residual(base)}
    if grid.kind == HOPF:
        out["soliton_sign"] = SOLITON_SIGN
    return _emit(cfg, args, out, {"ricci_plus": ric.plus, "ricci_minus": ric.minus}, {})


def cmd_bracket(args):
    cfg = load_config(args.config)
    grid = build_grid(cfg)
    problem = cfg.get("problem", {})
    spec = dict(problem.get("base", {}))
    t1, t2 = float(problem.get("t1", args.t1)), float(problem.get("t2", args.t2))
    eta, gamma = build_base(grid, {**spec, "t": t1}), build_base(grid, {**spec, "t": t2})
    fn = hopf_bracket if grid.kind == HOPF else bracket
    val = fn(eta, gamma)
    out = {"command": "bracket", "grid": grid.describe(), "t1": t1, "t2": t2,
           "bracket": val.value, "quadrature_error": val.error,
           "scale": bracket_scale(eta, gamma)}
    return _emit(cfg, args, out, {}, {})


def _hopf_checks(grid, problem):
    check = problem.get("check", "brackets")
    prof = k_profile(grid.alpha, grid.beta, grid)
    out = {"command": "hopf", "grid": grid.describe(), "check": check,
           "ode_residual": prof.ode_residual()}
    tables = {}
    if check == "brackets":
        c, rows = hopf_bracket_constants(prof, tuple(problem.get("t_values", (-1.0, 0.5, 2.0))))
        out["c"] = c
        out["rows"] = [r._asdict() for r in rows]
        tables["brackets"] = (("t", "bracket", "c_t"),
                              [(r.t, r.bracket_omega, r.expected_omega) for r in rows])
    elif check == "soliton":
        out["sign"] = SOLITON_SIGN
        out["residuals"] = {str(t): soliton_residual(prof, t)
                            for t in problem.get("t_values", (0.0, 0.5, 2.0))}
    elif check == "profile":
        x = grid.axis(0)
        tables["profile"] = (("x", "k", "one_minus_k", "k_prime"),
                             list(zip(x, prof.k(x), prof.one_minus_k(x), prof.k_prime(x))))
    else:
        raise ConfigError(f"problem.check: unknown check {check!r}")
    return out, {}, {"tables": tables}


def cmd_hopf(args):
    grid = GridSpec.hopf(args.alpha, args.beta, args.nx, args.ns, args.half_width)
    problem = {"check": args.check}
    if args.t is not None:
        problem["t_values"] = args.t
    out, fields, meta = _hopf_checks(grid, problem)
    return _emit(None, args, out, fields, meta)


def cmd_report(args):
    names = list(acceptance.RUNNERS) if args.preset in (None, "all") else [args.preset]
    results, timing = [], {}
    for name in names:
        if name not in acceptance.RUNNERS:
            raise ConfigError(f"--preset: unknown preset {name!r}")
        start = time.perf_counter()
        res = acceptance.run(name)
        timing[name] = time.perf_counter() - start
        print(res.line())
        d = res.to_dict()
        for key in [k for k in d["metrics"] if k.endswith("runtime_s")]:
            timing[f"{name}.{key}"] = d["metrics"].pop(key)
        results.append(d)
    out = {"command": "report", "criteria": results,
           "all_passed": all(r["passed"] for r in results)}
    code = _emit(None, args, out, {}, {"timing_s": timing}, quiet=True)
    return code if not out["all_passed"] else EXIT_OK


def _emit(cfg, args, report, fields, metadata, quiet=False):
    outdir = output_dir(cfg, getattr(args, "out", None))
    tables = metadata.pop("tables", {})
    write_report(outdir, report, metadata)
    for name, f in fields.items():
        write_field_csv(outdir / f"{name}.csv", f)
    for name, (header, rows) in tables.items():
        write_rows_csv(outdir / f"{name}.csv", header, rows)
    if not quiet:
        print(json.dumps(_clean({k: v for k, v in report.items()
                                 if not isinstance(v, (list, dict))}), sort_keys=True))
    print(f"wrote {outdir}", file=sys.stderr)
    ok = report.get("all_passed", True)
    return EXIT_OK if ok else EXIT_SOLVER


# ---------------------------------------------------------------------------


def build_parser():
    ap = argparse.ArgumentParser(prog="bihermitian",
                                 description="Split bi-Hermitian geometry solvers.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("--preset", help="run one acceptance experiment (A1..A12) and exit")
    ap.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or {DEFAULT_OUTPUT})")
    sub = ap.add_subparsers(dest="command")

    def with_config(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=argparse.SUPPRESS)
        p.set_defaults(func=fn)
        return p

    with_config("solve", cmd_solve, "solve a Monge-Ampere, flatten or prescribe problem")
    with_config("gauduchon", cmd_gauduchon, "Gauduchon factor of the base metric")
    with_config("ricci", cmd_ricci, "Bismut Ricci form of the base metric")
    p = with_config("bracket", cmd_bracket, "bracket of two members of the base family")
    p.add_argument("--t1", type=float, default=1.0)
    p.add_argument("--t2", type=float, default=0.0)
    with_config("decompose", cmd_decompose, "coordinates in a two-class basis")

    h = sub.add_parser("hopf", help="Streets-Ustinovskiy profile checks")
    h.add_argument("--alpha", type=float, default=1.0)
    h.add_argument("--beta", type=float, default=2.0)
    h.add_argument("--nx", type=int, default=1024)
    h.add_argument("--ns", type=int, default=32)
    h.add_argument("--half-width", type=float, default=None)
    h.add_argument("--check", choices=("brackets", "soliton", "profile"), default="brackets")
    h.add_argument("--t", type=float, nargs="+", help="offsets to evaluate")
    h.add_argument("--out", default=argparse.SUPPRESS)
    h.set_defaults(func=cmd_hopf)

    r = sub.add_parser("report", help="run acceptance presets")
    r.add_argument("--preset", default="all", help="A1..A12 or all")
    r.add_argument("--out", default=argparse.SUPPRESS)
    r.set_defaults(func=cmd_report)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command is None:
        if args.preset is None:
            ap.print_help()
            return EXIT_CONFIG
        args.func = cmd_report
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BihermitianError as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        _write_failure(args, exc)
        return EXIT_SOLVER


def _write_failure(args, exc):
    cfg = None
    if getattr(args, "config", None):
        try:
            cfg = load_config(args.config)
        except ConfigError:
            pass
    report = {"command": args.command, "error": type(exc).__name__, "message": str(exc),
              "residual_history": list(getattr(exc, "history", []))}
    write_report(output_dir(cfg, getattr(args, "out", None)), report, {})


if __name__ == "__main__":
    sys.exit(main())
