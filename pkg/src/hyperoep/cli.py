"""Command-line front end: one subcommand per solver or verifier.

Results go to standard output as JSON (floats with 17 significant digits)
or as CSV with dotted column names.  Exit codes: 0 success or consistent
verdict, 1 violating verdict or failed check, 2 usage or precondition error.
"""

from __future__ import annotations

import argparse
import ast
import copy
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotic import IdealPoint, busemann_ball, conical_radius_estimate
from .domains import (inradius_estimate, make_ball_grid, make_dumbbell_grid, make_horoball_grid,
                      make_tube_grid, narrow_check, read_grid, write_grid)
from .errors import HyperOEPError, NoZeroError, ScaleDegenerateError
from .hypgeom import Geodesic, Model, ModelPoint, invariance_check
from .movingplane import (FieldOnGrid, cap_graph_check, direction_geodesic, foliation_plane,
                          reflection_sweep, symmetry_classify)
from .oep import (OEP_ATOL, OEP_RTOL, ReactionFunction, height_levelset_check, solve_radial_oep,
                  torsion_profile, verify_p1)
from .spectral import (ATOL, RTOL, c1_constant, c1_radius_report, cheng_check, eigen_bounds,
                       lambda1_ball, shoot_first_zero)

__all__ = ["main", "run", "compile_expression", "dumps", "flatten"]

THREADS_ENV = "HYPEROEP_THREADS"


# ----------------------------------------------------------------------------
# serialisation


def _plain(obj):
    """Convert numpy scalars/arrays and tuples into plain JSON-able values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _encode(obj) -> str:
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format(obj, ".17g") if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(k)}: {_encode(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, list):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj) -> str:
    """JSON text with every float written to 17 significant digits."""
    return _encode(_plain(obj))


def flatten(obj, prefix: str = "") -> dict:
    """Flatten nested dicts and lists into dotted keys."""
    out = {}
    if isinstance(obj, dict):
        for k, v in obj.items():
            out.update(flatten(v, f"{prefix}{k}."))
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            out.update(flatten(v, f"{prefix}{i}."))
    else:
        out[prefix[:-1]] = obj
    return out


def _csv(rows: list[dict]) -> str:
    flat = [flatten(_plain(r)) for r in rows]
    cols: list[str] = []
    for r in flat:
        cols.extend(c for c in r if c not in cols)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in flat:
        w.writerow({k: format(v, ".17g") if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()


# ----------------------------------------------------------------------------
# restricted expressions


_FUNCS = {name: getattr(np, name) for name in
          ("exp", "log", "sqrt", "sin", "cos", "tan", "sinh", "cosh", "tanh", "arctan")}
_FUNCS["abs"] = np.abs
_CONSTS = {"pi": math.pi, "e": math.e}
_NODES = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Constant, ast.Name, ast.Call, ast.Load,
          ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd)


def compile_expression(text: str, variables=("t",)):
    """Compile an arithmetic expression in the given variables into a function.

    Only numbers, + - * / **, the named variables, pi, e and a few numpy
    functions (exp, log, sqrt, trig and hyperbolic functions, abs) are allowed.
    """
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise argparse.ArgumentTypeError(f"bad expression {text!r}: {exc.msg}") from None
    allowed = set(variables) | set(_FUNCS) | set(_CONSTS)
    for node in ast.walk(tree):
        if not isinstance(node, _NODES):
            raise argparse.ArgumentTypeError(f"{type(node).__name__} not allowed in {text!r}")
        if isinstance(node, ast.Name) and node.id not in allowed:
            raise argparse.ArgumentTypeError(f"unknown name {node.id!r} in {text!r}")
        if isinstance(node, ast.Call) and (node.keywords or not isinstance(node.func, ast.Name)
                                           or node.func.id not in _FUNCS):
            raise argparse.ArgumentTypeError(f"only plain calls of {sorted(_FUNCS)} are allowed")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise argparse.ArgumentTypeError(f"only numeric constants are allowed in {text!r}")
    code = compile(tree, "<expression>", "eval")
    env = {"__builtins__": {}, **_FUNCS, **_CONSTS}

    def fn(*values):
        return eval(code, env, dict(zip(variables, values)))  # noqa: S307 - AST-checked above

    fn.__doc__ = text
    return fn


def _reaction(text: str) -> ReactionFunction:
    g = compile_expression(text, ("t",))
    return ReactionFunction(lambda t: float(g(t)), label=text)


def _vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


# ----------------------------------------------------------------------------
# fields on grids


def _grid_field(domain, kind: str, k: float, expr: str | None) -> FieldOnGrid:
    gen = domain.generator
    if kind == "constant":
        return FieldOnGrid.from_function(domain, lambda p: np.ones(p.shape[0]))
    if kind == "expr":
        if not expr:
            raise argparse.ArgumentTypeError("--field expr needs --u")
        g = compile_expression(expr, ("x", "y"))
        return FieldOnGrid.from_function(
            domain, lambda p: np.broadcast_to(g(p[:, 0], p[:, 1]), (p.shape[0],)))
    if kind == "eigen":
        if gen.get("kind") != "ball":
            raise argparse.ArgumentTypeError("--field eigen needs a ball grid")
        prof = lambda1_ball(2, k, gen["radius"]).profile
        return FieldOnGrid.radial(domain, np.array(gen["center"]), prof)
    if kind == "busemann":
        if gen.get("kind") != "horoball":
            raise argparse.ArgumentTypeError("--field busemann needs a horoball grid")
        x = IdealPoint(gen["base"])
        return FieldOnGrid.from_function(domain, lambda p: gen["level"] - busemann_ball(x, p))
    if kind == "tube":
        if gen.get("kind") != "tube":
            raise argparse.ArgumentTypeError("--field tube needs a tube grid")
        beta = Geodesic(gen["x"], gen["y"])
        return FieldOnGrid.from_function(domain,
                                         lambda p: gen["radius"] ** 2 - beta.distance_to(p) ** 2)
    raise argparse.ArgumentTypeError(f"unknown field {kind!r}")


def _field_args(p):
    p.add_argument("--grid", type=Path, required=True, help="grid file")
    p.add_argument("--field", default="eigen",
                   choices=["eigen", "busemann", "tube", "constant", "expr"],
                   help="sampled u: built from the grid generator, constant, or --u")
    p.add_argument("--u", dest="u_expr", help="expression in ball coordinates x, y")
    p.add_argument("--k", type=float, default=1.0)


# ----------------------------------------------------------------------------
# subcommands


@dataclass
class Outcome:
    result: dict
    code: int = 0
    tolerances: dict | None = None


COMMANDS: dict = {}


def command(name: str, help: str):
    def deco(fn):
        COMMANDS[name] = (fn, help)
        return fn
    return deco


def _ode_tols(p, rtol=RTOL, atol=ATOL):
    p.add_argument("--rtol", type=float, default=rtol)
    p.add_argument("--atol", type=float, default=atol)


@command("eigen", "first Dirichlet eigenvalue of a geodesic ball")
def _eigen(args=None, parser=None):
    if parser is not None:
        parser.add_argument("--n", type=int, required=True)
        parser.add_argument("--k", type=float, required=True)
        parser.add_argument("--R", type=float, required=True)
        _ode_tols(parser)
        parser.add_argument("--xtol", type=float, default=1e-13)
        return
    res = lambda1_ball(args.n, args.k, args.R, rtol=args.rtol, atol=args.atol, xtol=args.xtol)
    return Outcome(res.to_dict(), 0, {"rtol": args.rtol, "atol": args.atol, "xtol": args.xtol})


@command("radius", "first zero of the radial eigenfunction for a given lambda")
def _radius(args=None, parser=None):
    if parser is not None:
        parser.add_argument("--n", type=int, required=True)
        parser.add_argument("--k", type=float, required=True)
        parser.add_argument("--lambda", dest="lam", type=float, required=True)
        _ode_tols(parser)
        return
    shot = shoot_first_zero(n=args.n, k=args.k, lam=args.lam, rtol=args.rtol, atol=args.atol)
    return Outcome({"n": args.n, "k": args.k, "lambda": args.lam, "R": shot.R,
                    "residual": shot.residual}, 0, {"rtol": args.rtol, "atol": args.atol})


@command("c1", "the constant c1(n, k1) and its comparison with R_{lambda,n}")
def _c1(args=None, parser=None):
    if parser is not None:
        parser.add_argument("--n", type=int, required=True)
        parser.add_argument("--k1", type=float, required=True)
        parser.add_argument("--lambda", dest="lam", type=float)
        return
    out = {"n": args.n, "k1": args.k1, "c1": c1_constant(args.n, args.k1)}
    if args.lam is not None:
        out["radius_report"] = c1_radius_report(args.n, args.k1, args.lam)
    return Outcome(out)


@command("bounds", "closed-form eigenvalue bounds against the computed value")
def _bounds(args=None, parser=None):
    if parser is not None:
        parser.add_argument("--n", type=int, required=True)
        parser.add_argument("--k", type=float, required=True)
        parser.add_argument("--R", type=float, required=True)
        return
    b = eigen_bounds(args.n, args.k, args.R)
    checks = [b.mckean_holds, b.artamoshin_holds, b.savo_corrected_holds]
    return Outcome(b.to_dict(), 1 if any(c is False for c in checks) else 0,
                   {"equality_rtol": b.equality_rtol})


@command("cheng", "monotonicity of lambda_1 in the curvature")
def _cheng(args=None, parser=None):
    if parser is not None:
        parser.add_argument("--n", type=int, required=True)
        parser.add_argument("--k1", type=float, required=True)
        parser.add_argument("--k2", type=float, required=True)
        parser.add_argument("--R", type=float, required=True)
        parser.add_argument("--rtol", type=float, default=1e-9)
        return
    rep = cheng_check(args.n, args.k1, args.k2, args.R, rtol=args.rtol)
    return Outcome(rep.to_dict(), 0 if rep.holds else 1, {"rtol": args.rtol})


def _oep_args(p):
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--R", type=float, required=True)
    p.add_argument("--f", dest="f", type=_reaction, required=True, help="f(t), e.g. '2*t+0.1'")
    p.add_argument("--rtol", type=float, default=OEP_RTOL)
    p.add_argument("--atol", type=float, default=OEP_ATOL)
    p.add_argument("--a-max", dest="a_max", type=float, default=1e6)


@command("oep", "radial overdetermined problem on a geodesic ball")
def _oep(args=None, parser=None):
    if parser is not None:
        _oep_args(parser)
        parser.add_argument("--profile", action="store_true", help="include the sampled profile")
        return
    sol = solve_radial_oep(args.n, args.k, args.R, args.f, a_max=args.a_max, rtol=args.rtol,
                           atol=args.atol)
    out = sol.to_dict(with_profile=args.profile)
    out["f"] = args.f.label
    return Outcome(out, 0, {"rtol": args.rtol, "atol": args.atol, "a_max": args.a_max})


@command("torsion", "closed-form torsion function of a geodesic ball")
def _torsion(args=None, parser=None):
    if parser is not None:
        parser.add_argument("--n", type=int, required=True)
        parser.add_argument("--k", type=float, required=True)
        parser.add_argument("--R", type=float, required=True)
        parser.add_argument("--profile", action="store_true")
        return
    return Outcome(torsion_profile(args.n, args.k, args.R).to_dict(with_profile=args.profile))


@command("p1", "check f(t) >= lambda t on a log-spaced sample")
def _p1(args=None, parser=None):
    if parser is not None:
        parser.add_argument("--f", dest="f", type=_reaction, required=True)
        parser.add_argument("--lambda", dest="lam", type=float, required=True)
        parser.add_argument("--t-min", dest="t_min", type=float, default=1e-3)
        parser.add_argument("--t-max", dest="t_max", type=float, default=1e3)
        parser.add_argument("--samples", type=int, default=200)
        return
    rep = verify_p1(args.f, args.lam, (args.t_min, args.t_max), args.samples)
    return Outcome(rep.to_dict(), 0 if rep.passed else 1,
                   {"t_range": [args.t_min, args.t_max], "samples": args.samples})


@command("height", "superlevel-set diameter against 2 R_{lambda,n}")
def _height(args=None, parser=None):
    if parser is not None:
        _oep_args(parser)
        parser.add_argument("--lambda", dest="lam", type=float, required=True)
        return
    sol = solve_radial_oep(args.n, args.k, args.R, args.f, a_max=args.a_max, rtol=args.rtol,
                           atol=args.atol)
    rep = height_levelset_check(sol, args.f, args.lam)
    return Outcome(rep.to_dict(), 0 if rep.passed else 1, {"rtol": args.rtol, "atol": args.atol})


@command("grid-make", "generate a grid file")
def _grid_make(args=None, parser=None):
    if parser is not None:
        parser.add_argument("--kind", required=True, choices=["ball", "horoball", "tube", "dumbbell"])
        parser.add_argument("--res", type=int, default=200)
        parser.add_argument("--out", type=Path, required=True)
        parser.add_argument("--center", type=_vector, default=np.zeros(2))
        parser.add_argument("--radius", type=float, default=1.0)
        parser.add_argument("--center2", type=_vector)
        parser.add_argument("--radius2", type=float)
        parser.add_argument("--neck", type=float, default=0.1)
        parser.add_argument("--neck-shift", dest="neck_shift", type=float, default=0.0)
        parser.add_argument("--angle", type=float, default=0.0, help="ideal point / endpoint angle")
        parser.add_argument("--angle2", type=float, default=math.pi, help="second endpoint angle")
        parser.add_argument("--level", type=float, default=0.0)
        parser.add_argument("--extent", type=float, default=3.0)
        return
    c = ModelPoint(args.center, Model.BALL)
    if args.kind == "ball":
        grid = make_ball_grid(c, args.radius, args.res)
    elif args.kind == "horoball":
        grid = make_horoball_grid(IdealPoint.from_angle(args.angle), args.level, args.res,
                                  args.extent)
    elif args.kind == "tube":
        beta = Geodesic(IdealPoint.from_angle(args.angle).direction,
                        IdealPoint.from_angle(args.angle2).direction)
        grid = make_tube_grid(beta, args.radius, args.res)
    else:
        if args.center2 is None or args.radius2 is None:
            raise argparse.ArgumentTypeError("dumbbell needs --center2 and --radius2")
        grid = make_dumbbell_grid(c, args.radius, ModelPoint(args.center2, Model.BALL),
                                  args.radius2, args.neck, args.res, neck_shift=args.neck_shift)
    write_grid(args.out, grid)
    out = grid.to_dict()
    out["path"] = str(args.out)
    return Outcome(out)


@command("inradius", "inradius of a gridded domain")
def _inradius(args=None, parser=None):
    if parser is not None:
        parser.add_argument("--grid", type=Path, required=True)
        return
    return Outcome(inradius_estimate(read_grid(args.grid), empty_ok=True).to_dict())


@command("narrow", "compare the inradius with the critical radius R_{lambda,n}")
def _narrow(args=None, parser=None):
    if parser is not None:
        parser.add_argument("--grid", type=Path, required=True)
        parser.add_argument("--n", type=int, default=2)
        parser.add_argument("--k", type=float, default=1.0)
        parser.add_argument("--lambda", dest="lam", type=float, required=True)
        return
    v = narrow_check(read_grid(args.grid), n=args.n, k=args.k, lam=args.lam)
    return Outcome(v.to_dict(), 1 if v.verdict == "violating" else 0)


def _direction_args(p):
    p.add_argument("--angle", type=float, default=0.0, help="Euclidean direction of gamma")
    p.add_argument("--through", type=_vector, help="point on gamma (default: mask barycentre)")


def _direction(args, domain) -> Geodesic:
    through = args.through if args.through is not None else domain.masked_centers().mean(axis=0)
    return direction_geodesic(through, args.angle)


@command("sweep", "moving-plane reflection sweep along a geodesic")
def _sweep(args=None, parser=None):
    if parser is not None:
        _field_args(parser)
        _direction_args(parser)
        parser.add_argument("--steps", type=int, default=61)
        return
    domain = read_grid(args.grid)
    fld = _grid_field(domain, args.field, args.k, args.u_expr)
    res = reflection_sweep(fld, _direction(args, domain), n_steps=args.steps)
    return Outcome(res.to_dict(), 0, {"interpolation": res.tolerance})


@command("classify", "radial / horospherical / axial symmetry classification")
def _classify(args=None, parser=None):
    if parser is not None:
        _field_args(parser)
        parser.add_argument("--directions", type=int, default=8)
        return
    domain = read_grid(args.grid)
    fld = _grid_field(domain, args.field, args.k, args.u_expr)
    threads = os.environ.get(THREADS_ENV)
    cls = symmetry_classify(fld, n_directions=args.directions,
                            max_workers=int(threads) if threads else None)
    return Outcome(cls.to_dict(), 0, {"interpolation": cls.tolerance})


@command("graphcheck", "is the cap beyond a foliation hyperplane a graph over it")
def _graphcheck(args=None, parser=None):
    if parser is not None:
        parser.add_argument("--grid", type=Path, required=True)
        _direction_args(parser)
        parser.add_argument("--t", type=float, required=True,
                            help="signed distance of P from the through point along gamma")
        parser.add_argument("--side", choices=["forward", "backward"], default="forward",
                            help="cap on the forward (increasing t) or backward side of P")
        parser.add_argument("--R", type=float, help="radius for the h(C) <= 3R check")
        return
    domain = read_grid(args.grid)
    gamma = _direction(args, domain)
    through = args.through if args.through is not None else domain.masked_centers().mean(axis=0)
    t = float(gamma.tau(np.asarray(through)[None])[0]) + args.t
    P = foliation_plane(gamma, t)
    step = 1.0 if args.side == "forward" else -1.0
    side = ModelPoint(gamma.point_ball(t + step), Model.BALL)
    rep = cap_graph_check(domain, P, args.R, side=side)
    code = 0 if rep.is_graph and rep.height_bound_holds is not False else 1
    out = rep.to_dict()
    out["t"] = t
    return Outcome(out, code)


@command("cone", "largest grid-resolved cone at an ideal point inside the mask")
def _cone(args=None, parser=None):
    if parser is not None:
        parser.add_argument("--grid", type=Path, required=True)
        parser.add_argument("--angle", type=float, required=True, help="ideal point angle")
        parser.add_argument("--directions", type=int, default=72)
        parser.add_argument("--starts", type=int, default=24)
        return
    est = conical_radius_estimate(read_grid(args.grid), IdealPoint.from_angle(args.angle),
                                  n_directions=args.directions, n_starts=args.starts, full=True)
    return Outcome(est.to_dict())


@command("invariance", "reflection invariance of the quasilinear operator")
def _invariance(args=None, parser=None):
    if parser is not None:
        parser.add_argument("--u", dest="u_expr", default="sin(y1)*exp(-y2)",
                            help="field in half-space coordinates y1, y2")
        parser.add_argument("--a", dest="a_expr", default="1", help="a(u, s)")
        parser.add_argument("--f", dest="f_expr", default="u + s**2", help="f(u, s)")
        parser.add_argument("--point", type=_vector, default=np.array([0.3, 0.7]))
        parser.add_argument("--h", type=float, default=1e-4)
        parser.add_argument("--threshold", type=float, default=1e-4)
        return
    if args.point.shape[0] != 2:
        raise argparse.ArgumentTypeError("--point takes two half-space coordinates")
    ug = compile_expression(args.u_expr, ("y1", "y2"))
    ag = compile_expression(args.a_expr, ("u", "s"))
    fg = compile_expression(args.f_expr, ("u", "s"))

    def u(y):
        return float(ug(y[0], y[1]))

    def a(v, s):
        return float(ag(v, s))

    def f(v, s):
        return float(fg(v, s))

    p = ModelPoint(args.point, Model.HALF_SPACE)
    r1 = invariance_check(u, a, f, p, h=args.h)
    r2 = invariance_check(u, a, f, p, h=args.h / 2)
    out = {"residual": r1, "residual_half_step": r2,
           "ratio": r1 / r2 if r2 > 0 else None, "passed": bool(r1 < args.threshold)}
    return Outcome(out, 0 if out["passed"] else 1, {"h": args.h, "threshold": args.threshold})


# ----------------------------------------------------------------------------
# driver


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--manifest", type=Path, help="append a JSON-lines run record here")
    common.add_argument("--sweep", metavar="PARAM=A:B:N",
                        help="run over N evenly spaced values of a numeric option")
    parser = argparse.ArgumentParser(prog="hyperoep", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"hyperoep {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    for name, (fn, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, parents=[common])
        fn(parser=p)
        p.set_defaults(handler=fn)
    return parser


def _exit_code(exc: Exception) -> int:
    if isinstance(exc, (ValueError, NoZeroError, ScaleDegenerateError, argparse.ArgumentTypeError)):
        return 2
    return 1


def _execute(args) -> tuple[dict, int]:
    try:
        out = args.handler(args)
    except (HyperOEPError, ValueError, argparse.ArgumentTypeError, OSError) as exc:
        return {"error": type(exc).__name__, "message": str(exc)}, _exit_code(exc)
    result = dict(out.result)
    if out.tolerances:
        result["tolerances"] = out.tolerances
    return result, out.code


def _parse_sweep(spec: str, args):
    try:
        name, rng = spec.split("=", 1)
        a, b, n = rng.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--sweep expects PARAM=A:B:N, got {spec!r}") from None
    dest = name.lstrip("-").replace("-", "_")
    if dest == "lambda":
        dest = "lam"
    current = getattr(args, dest, None)
    if isinstance(current, bool) or not isinstance(current, (int, float)):
        raise argparse.ArgumentTypeError(f"--sweep parameter {name!r} is not a numeric option")
    if n < 1:
        raise argparse.ArgumentTypeError("--sweep needs N >= 1")
    values = np.linspace(a, b, n)
    if isinstance(current, int):
        values = np.round(values).astype(int)
    return dest, values.tolist()


def _threads(n: int) -> int:
    cap = os.environ.get(THREADS_ENV)
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(n, limit))


def _parameters(args) -> dict:
    skip = {"handler", "manifest", "format"}
    out = {}
    for k, v in vars(args).items():
        if k in skip:
            continue
        if isinstance(v, ReactionFunction):
            v = v.label
        elif isinstance(v, Path):
            v = str(v)
        out[k] = _plain(v)
    return out


def run(argv=None, stdout=None) -> int:
    """Parse ``argv``, run the subcommand, print the result and return the exit code."""
    stdout = sys.stdout if stdout is None else stdout
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    start = time.perf_counter()
    if args.sweep:
        try:
            dest, values = _parse_sweep(args.sweep, args)
        except argparse.ArgumentTypeError as exc:
            parser.print_usage(sys.stderr)
            print(f"hyperoep: error: {exc}", file=sys.stderr)
            return 2
        jobs = []
        for v in values:
            a = copy.copy(args)
            setattr(a, dest, v)
            jobs.append(a)
        with ThreadPoolExecutor(max_workers=_threads(len(jobs))) as ex:
            outcomes = list(ex.map(_execute, jobs))
        rows = [{"sweep": {dest: v}, **res} for v, (res, _) in zip(values, outcomes)]
        code = max(c for _, c in outcomes)
        payload = rows
    else:
        payload, code = _execute(args)
        rows = [payload]
    wall = time.perf_counter() - start
    text = _csv(rows) if args.format == "csv" else dumps(payload) + "\n"
    stdout.write(text)
    if code and isinstance(payload, dict) and "error" in payload:
        print(f"hyperoep {args.command}: {payload['error']}: {payload['message']}", file=sys.stderr)
    if args.manifest:
        record = {
            "subcommand": args.command,
            "argv": argv,
            "parameters": _parameters(args),
            "version": __version__,
            "tolerances": rows[0].get("tolerances", {}) if rows else {},
            "wall_time": wall,
            "exit_code": code,
            "digest": hashlib.sha256(dumps(payload).encode()).hexdigest(),
        }
        with open(args.manifest, "a", encoding="utf-8") as fh:
            fh.write(dumps(record) + "\n")
    return code


def main(argv=None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
