"""Command-line front end.

Every subcommand writes one report.  JSON reports look like
``{command, config, algebra_hash, results, checks, version}`` and contain no
timestamps, so identical invocations give byte-identical output.  Exit codes:
0 success, 2 a check failed, 1 usage or input error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction

import numpy as np

from . import __version__
from .algebra import AlgebraFileError, StratifiedLieAlgebra, catalog, catalog_names, load_algebra
from .demo import demo_example
from .flows import AnnulusSpec, distortion, escape_time, integrate_flow
from .group import linear_map
from .linalg import parse_rational
from .prolongation import DEFAULT_BUDGET, DEFAULT_CAP, ad_rank, cached_prolong, classify_rigidity
from .semidirect import double
from .vector_fields import (grading_field, is_precontact, left_field, precontact_space, right_field,
                            to_coordinate)


class UsageError(Exception):
    pass


# -- helpers -----------------------------------------------------------------------
def _clean(obj):
    """Make a result JSON-safe and deterministic."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def _check(name, status, data=None):
    return {"name": name, "status": "pass" if status else "fail", "data": data}


def _algebra(args) -> StratifiedLieAlgebra:
    if getattr(args, "catalog", None):
        name, *params = args.catalog
        try:
            return catalog(name, *(int(p) for p in params))
        except (KeyError, ValueError, TypeError) as exc:
            raise UsageError(str(exc)) from None
    if not getattr(args, "file", None):
        raise UsageError("give an algebra file or --catalog NAME PARAM")
    try:
        return load_algebra(args.file)
    except OSError as exc:
        raise UsageError(f"cannot read {args.file}: {exc.strerror}") from None


def _point(text, n):
    if text is None:
        return None
    vals = [v for v in text.replace(" ", "").split(",") if v]
    if len(vals) != n:
        raise UsageError(f"point needs {n} comma-separated coordinates")
    try:
        return [parse_rational(v) for v in vals]
    except ValueError:
        try:
            return [float(v) for v in vals]
        except ValueError:
            raise UsageError(f"bad point {text!r}") from None


def _field(A, spec):
    """``right:i``, ``left:i``, ``grading`` or ``precontact:k:i`` (1-based i)."""
    kind, *rest = spec.split(":")
    try:
        if kind in ("right", "left"):
            i = int(rest[0]) - 1
            if not 0 <= i < A.n:
                raise UsageError(f"field index out of range 1..{A.n}")
            return (right_field if kind == "right" else left_field)(A, i)
        if kind == "grading":
            return grading_field(A)
        if kind == "precontact":
            k, i = int(rest[0]), int(rest[1]) - 1
            basis = precontact_space(A, k)
            if not 0 <= i < len(basis):
                raise UsageError(f"precontact space of degree {k} has dimension {len(basis)}")
            return to_coordinate(A, basis[i])
    except (IndexError, ValueError):
        pass
    raise UsageError(f"unknown field spec {spec!r}")


def _config(args):
    keys = ("file", "catalog", "cap", "budget", "tol", "samples", "seed", "degree", "field", "point",
            "time", "radius", "inner", "outer", "tmax", "map", "m_max", "strict")
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


# -- subcommands ---------------------------------------------------------------------
def cmd_validate(args, A):
    rep = A.validate()
    results = {"layer_dims": list(A.layer_dims), "dimension": A.n, "step": A.step,
               "homogeneous_dimension": A.homogeneous_dimension, "report": "passed" if rep.passed else "failed",
               "violations": rep.to_dict()["violations"]}
    return results, [_check("validate", rep.passed, len(rep.violations))]


def cmd_prolong(args, A):
    P = cached_prolong(A, args.cap, args.cache_dir)
    leib = all(P.leibniz_defect(u) is None for L in P.layers.values() for u in L)
    p2 = all(P.restriction_rank(k) == len(L) for k, L in P.layers.items())
    results = P.to_dict(with_basis=args.basis)
    results["total_dimension"] = P.total_dimension
    return results, [_check("leibniz", leib), _check("p2_faithful", p2)]


def cmd_rigidity(args, A):
    P = cached_prolong(A, args.cap, args.cache_dir)
    V = classify_rigidity(A, args.cap, args.budget, args.seed, prolongation=P)
    checks = []
    if V.witness is not None:
        r = ad_rank(A, V.witness)
        checks.append(_check("witness_rank_le_1", r <= 1, r))
    return V.to_dict(), checks


def cmd_precontact(args, A):
    basis = precontact_space(A, args.degree)
    ok = [bool(is_precontact(A, V)) for V in basis]
    results = {"degree": args.degree, "dimension": len(basis), "basis": [V.to_dict() for V in basis]}
    return results, [_check("precontact", all(ok), ok)]


def cmd_double(args, A):
    D = double(A)
    rep = D.doubled.validate()
    results = {"labels": list(D.labels), "algebra": D.doubled.to_dict(),
               "doubled_hash": D.doubled.cache_key()}
    return results, [_check("validate_double", rep.passed, rep.to_dict()["violations"])]


def cmd_flow(args, A):
    V = _field(A, args.field)
    p = _point(args.point, A.n) or [0] * A.n
    tr = integrate_flow(A, V, p, args.time, args.tol)
    results = tr.to_dict()
    results["field"] = args.field
    return results, [_check("no_blowup", not tr.blew_up, tr.t_end)]


def cmd_distortion(args, A):
    p = _point(args.point, A.n) or [0] * A.n
    kind, _, arg = args.map.partition(":")
    if kind == "dilation":
        s = parse_rational(arg or "2")
        f = linear_map(A.dilation_matrix(s).tolist())
    elif kind == "flow":
        V = _field(A, arg)

        def f(X):
            X = np.atleast_2d(X)
            out = np.empty_like(X)
            for i, x in enumerate(X):
                out[i] = integrate_flow(A, V, x, args.time, args.tol).end
            return out
    else:
        raise UsageError("map must be dilation:S or flow:FIELD")
    rep = distortion(A, f, [float(v) for v in p], args.radius, args.samples, args.seed, args.map)
    return rep.to_dict(), [_check("H_at_least_1", rep.H >= 1 - 1e-12, rep.H)]


def cmd_escape(args, A):
    V = _field(A, args.field)
    p = _point(args.point, A.n)
    if p is None:
        raise UsageError("--point is required")
    try:
        res = escape_time(A, V, [float(v) for v in p], AnnulusSpec(args.inner, args.outer), args.tmax,
                          tol=args.tol)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return res, [_check("finite", not res["lower_bound"], res["t"])]


def cmd_demo(args, A):
    res = demo_example(args.m_max, args.samples, args.seed)
    checks = [_check(c["name"], c["status"], c["data"]) for c in res.pop("checks")]
    return res, checks


COMMANDS = {
    "validate": cmd_validate,
    "prolong": cmd_prolong,
    "rigidity": cmd_rigidity,
    "precontact": cmd_precontact,
    "double": cmd_double,
    "flow": cmd_flow,
    "distortion": cmd_distortion,
    "escape": cmd_escape,
    "demo-example": cmd_demo,
}


# -- output ----------------------------------------------------------------------------
def _flatten(prefix, obj, out):
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    elif isinstance(obj, list) and obj and all(isinstance(v, (dict, list)) for v in obj):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}[{i}]", v, out)
    else:
        out.append((prefix, obj))


def render(report, fmt):
    if fmt == "json":
        return json.dumps(report, sort_keys=True, indent=2) + "\n"
    results = report.get("results", {})
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        table = results.get("table") if isinstance(results, dict) else None
        if table:
            cols = list(table[0])
            writer.writerow(cols)
            for row in table:
                writer.writerow([json.dumps(row[c]) if isinstance(row[c], list) else row[c] for c in cols])
        else:
            writer.writerow(["key", "value"])
            rows = []
            _flatten("", results, rows)
            for k, v in rows:
                writer.writerow([k, json.dumps(v) if isinstance(v, (list, dict)) else v])
        return buf.getvalue()
    lines = [f"command: {report['command']}"]
    if report.get("algebra_hash"):
        lines.append(f"algebra: {report['algebra_hash'][:16]}")
    rows = []
    _flatten("", results, rows)
    lines += [f"{k}: {json.dumps(v) if isinstance(v, (list, dict)) else v}" for k, v in rows]
    lines += [f"[{c['status']}] {c['name']}" for c in report.get("checks", [])]
    return "\n".join(lines) + "\n"


# -- parser ------------------------------------------------------------------------------
def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("file", nargs="?", help="algebra JSON file")
    common.add_argument("--catalog", nargs="+", metavar=("NAME", "PARAM"),
                        help="use a catalog algebra instead of a file")
    common.add_argument("--format", choices=("json", "text", "csv"), default="json")
    common.add_argument("--cap", type=int, default=DEFAULT_CAP)
    common.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    common.add_argument("--tol", type=float, default=1e-10)
    common.add_argument("--samples", type=int, default=1024)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--cache-dir", default=None, help="defaults to $CARNOT_CACHE_DIR")

    parser = argparse.ArgumentParser(prog="carnot", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"carnot {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="check Jacobi, grading and generation")
    cat = sub.add_parser("catalog", help="list or emit catalog algebras")
    cat.add_argument("action", choices=("list", "emit"))
    cat.add_argument("name", nargs="?")
    cat.add_argument("param", nargs="?", type=int)
    p = sub.add_parser("prolong", parents=[common], help="Tanaka prolongation")
    p.add_argument("--basis", action="store_true", help="include basis blocks")
    sub.add_parser("rigidity", parents=[common], help="rigid / nonrigid / inconclusive")
    p = sub.add_parser("precontact", parents=[common], help="homogeneous precontact fields")
    p.add_argument("--degree", type=int, required=True)
    sub.add_parser("double", parents=[common], help="build the doubled algebra")
    for name in ("flow", "distortion", "escape"):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--point", default=None, help="comma-separated coordinates")
        if name != "distortion":
            p.add_argument("--field", required=True,
                           help="right:i | left:i | grading | precontact:k:i")
        p.add_argument("--time", type=float, default=1.0)
    sub.choices["distortion"].add_argument("--map", default="dilation:2",
                                           help="dilation:S | flow:FIELD")
    sub.choices["distortion"].add_argument("--radius", type=float, default=1.0)
    sub.choices["escape"].add_argument("--inner", type=float, default=1.0)
    sub.choices["escape"].add_argument("--outer", type=float, default=2.0)
    sub.choices["escape"].add_argument("--tmax", type=float, default=100.0)
    p = sub.add_parser("demo-example", parents=[common],
                       help="lifted flow on the doubled rank-3 nilradical")
    p.add_argument("--m-max", type=int, default=8)
    p.set_defaults(samples=512)
    return parser


def run(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    if args.command == "catalog":
        if args.action == "list":
            stdout.write("\n".join(catalog_names()) + "\n")
            return 0
        if not args.name or args.param is None:
            sys.stderr.write("catalog emit needs NAME PARAM\n")
            return 1
        try:
            A = catalog(args.name, args.param)
        except (KeyError, ValueError) as exc:
            sys.stderr.write(f"error: {exc}\n")
            return 1
        stdout.write(json.dumps(A.to_dict(), indent=2) + "\n")
        return 0
    if getattr(args, "cap", 1) < 1 or getattr(args, "budget", 1) < 1 or getattr(args, "tol", 1) <= 0 \
            or getattr(args, "samples", 1) < 1:
        sys.stderr.write("error: caps and sample counts must be >= 1 and tolerances > 0\n")
        return 1
    try:
        A = None if args.command == "demo-example" else _algebra(args)
        results, checks = COMMANDS[args.command](args, A)
    except (AlgebraFileError, UsageError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    report = {"command": args.command, "config": _config(args),
              "algebra_hash": A.cache_key() if A is not None else None,
              "results": results, "checks": checks, "version": __version__}
    stdout.write(render(_clean(report), args.format))
    return 2 if any(c["status"] == "fail" for c in checks) else 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
