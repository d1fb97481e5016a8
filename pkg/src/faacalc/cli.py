"""Command-line front end: ``faacalc <subcommand> [flags]``.

Every JSON document written to stdout has the form
``{"command": ..., "args": {...}, "result": ...}``; feeding it back with
``--input FILE`` re-runs the recorded command.  Numbers are strings: exact
rationals as ``"a/b"``, floats in shortest round-trip form.

Exit codes: 0 success, 1 domain error (or a failed ``verify`` suite),
2 input error or bad usage.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction

import numpy as np

from faacalc import __version__
from faacalc.errors import DomainError, InputError

# arguments that only steer the output, never recorded for replay
_IO_ARGS = {"command", "format", "input", "func"}


# --------------------------------------------------------------------------
# serialization


def num_str(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def parse_number(tok: str, exact: bool):
    tok = tok.strip()
    try:
        if exact or "." not in tok and "e" not in tok.lower():
            q = Fraction(tok)
            return int(q) if q.denominator == 1 else q
        return float(tok)
    except (ValueError, ZeroDivisionError):
        if tok.lower() in ("inf", "+inf", "infinity"):
            return math.inf
        raise InputError(f"not a number: {tok!r}") from None


def parse_list(text: str, exact: bool) -> list:
    if text is None or text.strip() == "":
        return []
    return [parse_number(t, exact) for t in text.split(",")]


def tensor_json(t) -> dict:
    return {"cov_arity": t.cov_arity, "cov_dim": t.cov_dim, "contra_dims": list(t.contra_dims),
            "data": [num_str(v) for v in t.data.ravel()]}


def tensor_from_json(obj: dict, exact: bool | None = None):
    from faacalc.tensor import Tensor

    try:
        shape = tuple(obj["contra_dims"]) + (obj["cov_dim"],) * obj["cov_arity"]
        vals = obj["data"]
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed tensor: {exc}") from None
    is_exact = all("." not in v and "e" not in v.lower() and "inf" not in v for v in vals) \
        if exact is None else exact
    arr = np.array([parse_number(v, is_exact) for v in vals] if vals else [],
                   dtype=object if is_exact else float).reshape(shape)
    return Tensor(arr, obj["cov_arity"], obj["cov_dim"], exact=is_exact)


def jet_json(jet) -> dict:
    return {"base_point": [num_str(v) for v in jet.base_point], "field_arity": jet.field_arity,
            "derivs": [tensor_json(t) for t in jet.derivs]}


def jet_from_json(obj: dict):
    from faacalc.calculus import Jet

    try:
        derivs = [tensor_from_json(t) for t in obj["derivs"]]
        exact = all(t.exact for t in derivs)
        bp = np.array([parse_number(v, exact) for v in obj["base_point"]], dtype=object if exact else float)
        if not exact:
            derivs = [t.to_float() for t in derivs]
        return Jet(bp, derivs, int(obj.get("field_arity", 0)))
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed jet: {exc}") from None


def _load_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from None


def _load_polymap(path: str):
    from faacalc.calculus import PolyMap

    obj = _load_json(path)
    if isinstance(obj, dict) and "result" in obj and "components" not in obj:
        obj = obj["result"]
    return PolyMap.from_json(obj)


def _point(text: str, exact: bool):
    pt = parse_list(text, exact=True)
    if not pt:
        raise InputError("--at needs at least one coordinate")
    return [Fraction(v) for v in pt] if exact else [float(v) for v in pt]


# --------------------------------------------------------------------------
# subcommands


def cmd_partitions(a):
    from faacalc import partitions as P

    if a.ordered is not None:
        items = P.enumerate_ordered_partitions(a.m, a.ordered)
    elif a.nested is not None:
        items = P.enumerate_nested_partitions(a.m, a.nested)
    else:
        items = P.enumerate_partitions(a.m, a.k)
    return [it.to_list() for it in items]


def _symbolic_list(text, exact):
    """Numbers where possible, sympy symbols otherwise."""
    out, symbolic = [], False
    for tok in (text.split(",") if text else []):
        try:
            out.append(parse_number(tok, exact))
        except InputError:
            import sympy

            if not tok.strip().isidentifier():
                raise
            out.append(sympy.Symbol(tok.strip()))
            symbolic = True
    return out, symbolic


def _value_str(v, symbolic):
    if symbolic:
        import sympy

        return str(sympy.expand(v))
    return num_str(v)


def cmd_bell(a):
    from faacalc import bell as B

    xs, sym = _symbolic_list(a.xs, a.exact)
    if a.level is not None:
        tables = []
        for row in (a.tables or "").split(";"):
            vals, s2 = _symbolic_list(row, a.exact)
            sym |= s2
            tables.append(vals)
        return {"value": _value_str(B.higher_level_bell(a.level, a.m, a.k, tables), sym)}
    if a.generalized:
        if a.k is None or a.d is None:
            raise InputError("--generalized needs --k and --d")
        idx = [{"b": list(g.b), "h": list(g.h), "coefficient": num_str(c)}
               for g, c in B.generalized_scherk(a.k, a.m, a.d)]
        hat = [{"p": list(h.p), "coefficient": num_str(h.coefficient)} for h in B.hat_condense(a.k, a.m, a.d)]
        res = {"indices": idx, "hat": hat}
        if xs:
            res["value"] = _value_str(B.generalized_bell(a.k, a.m, a.d, xs), sym)
        return res
    if a.k is None:
        ys, s2 = _symbolic_list(a.ys, a.exact)
        return {"value": _value_str(B.bell_full(a.m, ys, xs), sym or s2)}
    idx = [{"b": list(s.b), "coefficient": num_str(s.coefficient)} for s in B.scherk_indices(a.m, a.k)]
    res = {"indices": idx}
    if xs or a.k == 0:
        res["value"] = _value_str(B.bell_partial(a.m, a.k, xs), sym)
    return res


def _phi_jet(a, order):
    from faacalc.calculus import jet_of_polymap

    if a.phi_jet:
        obj = _load_json(a.phi_jet)
        return jet_from_json(obj.get("result", obj) if isinstance(obj, dict) else obj)
    if not a.phi or a.at is None:
        raise InputError("need --phi with --at, or --phi-jet")
    return jet_of_polymap(_load_polymap(a.phi), _point(a.at, a.exact), order, exact=a.exact)


def cmd_derive(a):
    from faacalc.calculus import compose_jet, jet_of_polymap

    phi = _phi_jet(a, a.order)
    f = _load_polymap(a.f)
    fj = jet_of_polymap(f, list(phi.value()), a.order, exact=phi.exact)
    return jet_json(compose_jet(fj, phi, a.order))


def cmd_pullback(a):
    from faacalc.calculus import jet_of_polymap, pullback_jet

    phi = _phi_jet(a, a.order + (1 if a.d else 0))
    u = _load_polymap(a.u)
    uj = jet_of_polymap(u, list(phi.value()), a.order, field_arity=a.d, exact=phi.exact)
    return jet_json(pullback_jet(uj, phi, a.order, a.d))


def cmd_inverse(a):
    from faacalc.calculus import inverse_jet

    return jet_json(inverse_jet(_phi_jet(a, a.order), a.order))


def cmd_bound(a):
    from faacalc.norms import check_pullback_inequality

    r = check_pullback_inequality(_load_polymap(a.u), _load_polymap(a.phi), _point(a.at, False),
                                  a.order, a.d, p=a.p)
    return {k: num_str(v) for k, v in r.items()}


def _samples(a):
    from faacalc.norms import SampleSet

    if not a.samples:
        raise InputError("--samples is required")
    obj = _load_json(a.samples)
    return SampleSet.from_json(obj), obj


def _values(a, s, obj):
    if getattr(a, "values", None):
        vals = _load_json(a.values)
    elif getattr(a, "u", None):
        return _load_polymap(a.u).eval_points(s.points)
    elif isinstance(obj, dict) and "values" in obj:
        vals = obj["values"]
    else:
        raise InputError("no values: give --values, --u, or a 'values' list in the sample file")
    try:
        arr = np.array([[float(x) for x in np.atleast_1d(v)] for v in vals], dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"malformed values: {exc}") from None
    return arr


def cmd_seminorm(a):
    from faacalc import norms as N

    s, obj = _samples(a)
    if a.kind == "transform":
        if not (a.u and a.phi):
            raise InputError("--kind transform needs --u and --phi")
        params = N.SeminormParams(p=a.p, theta=a.theta, sigma=a.sigma)
        orl = None
        if a.integrand:
            orl = {"A": N.parse_integrand(a.integrand), "C": a.orlicz_constant}
        rep = N.seminorm_transform_report(_load_polymap(a.u), _load_polymap(a.phi), s, params, d=a.d,
                                          m=a.m, orlicz=orl, quadrature_slack=a.slack, jobs=a.jobs)
        return [e.to_json() for e in rep]
    vals = _values(a, s, obj)
    if a.kind == "lp":
        val = N.discrete_lp_norm(vals, s, a.p)
    elif a.kind == "slobodeckij":
        val = N.discrete_slobodeckij(vals, s, a.theta, a.p)
    elif a.kind == "holder":
        val = N.holder_seminorm(vals, s, a.theta)
    elif a.kind == "orlicz-slobodeckij":
        val = N.orlicz_slobodeckij(vals, s, a.theta, N.TwoPointIntegrand.from_integrand(
            N.parse_integrand(a.integrand or f"lp:{a.p}")))
    else:
        raise InputError(f"unknown seminorm kind {a.kind!r}")
    return {"value": num_str(val)}


def cmd_orlicz(a):
    from faacalc import norms as N

    s, obj = _samples(a)
    desc = a.integrand
    if desc and desc.endswith(".json"):
        desc = _load_json(desc)
    A = N.parse_integrand(desc)
    if a.validate:
        A.validate(s.points)
    if a.phi:
        A = N.integrand_pullback(A, _load_polymap(a.phi), s)
    vals = _values(a, s, obj)
    if a.holder:
        other = np.array([[float(x) for x in np.atleast_1d(v)] for v in _load_json(a.holder)])
        lhs, rhs = N.orlicz_holder_check(vals, other, A, s)
        return {"lhs": num_str(lhs), "rhs": num_str(rhs), "holds": lhs <= rhs}
    if a.dual:
        A = N.integrand_dual(A)
    return {"integrand": A.name, "luxemburg": num_str(N.luxemburg_norm(A, vals, s))}


def cmd_verify(a):
    from faacalc.verify import run_all

    results = run_all(seed=a.seed, scale=a.scale, numbers=a.suite or None, jobs=a.jobs)
    a._failed = not all(r.passed and r.in_time for r in results)
    return [{"criterion": r.number, "title": r.title, "passed": r.passed and r.in_time,
             "detail": r.detail, "seconds": num_str(round(r.seconds, 3))} for r in results]


# --------------------------------------------------------------------------
# parser


def _jobs(text):
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid job count {text!r}") from None
    if k < 1:
        raise argparse.ArgumentTypeError("--jobs must be >= 1")
    return k


def _exponent(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid exponent {text!r}") from None
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "text"), default=None, help="output format (default json)")
    common.add_argument("--exact", action="store_true", help="use the exact rational backend")
    common.add_argument("--jobs", type=_jobs, default=1, help="worker processes for independent work")
    common.add_argument("--input", metavar="FILE", help="replay a JSON document emitted by faacalc")

    parser = argparse.ArgumentParser(prog="faacalc", description="Higher-order chain rules, Bell polynomials "
                                     "and norm bounds for pullbacks.")
    parser.add_argument("--version", action="version", version=f"faacalc {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("partitions", parents=[common], help="enumerate set, ordered or nested partitions")
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--k", type=int, default=None, help="number of blocks")
    p.add_argument("--ordered", type=int, metavar="D", help="ordered partitions into D+1 blocks")
    p.add_argument("--nested", type=int, metavar="L", help="nested partitions of level L")
    p.set_defaults(func=cmd_partitions)

    p = sub.add_parser("bell", parents=[common], help="Scherk indices and Bell polynomials")
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--xs", default="", help="comma-separated arguments (numbers or symbol names)")
    p.add_argument("--ys", default="", help="outer coefficients for the full polynomial (no --k)")
    p.add_argument("--generalized", action="store_true", help="generalized indices B_{k,m,d}")
    p.add_argument("--level", type=int, help="higher-level polynomial of this level")
    p.add_argument("--tables", help="semicolon-separated tables for --level")
    p.set_defaults(func=cmd_bell)

    def jet_args(p, needs_f=False, needs_u=False):
        p.add_argument("--phi", help="PolyMap JSON of the inner map")
        p.add_argument("--phi-jet", help="jet JSON of the inner map (instead of --phi/--at)")
        p.add_argument("--at", help="base point, comma-separated")
        p.add_argument("--order", type=int, default=None)
        if needs_f:
            p.add_argument("--f", help="PolyMap JSON of the outer map")
        if needs_u:
            p.add_argument("--u", help="PolyMap JSON of the tensor field")
            p.add_argument("--d", type=int, default=0, help="covariant arity of the field")

    p = sub.add_parser("derive", parents=[common], help="jet of f o phi")
    jet_args(p, needs_f=True)
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("pullback", parents=[common], help="jet of the pullback phi^* u")
    jet_args(p, needs_u=True)
    p.set_defaults(func=cmd_pullback)

    p = sub.add_parser("inverse", parents=[common], help="jet of the inverse map")
    jet_args(p)
    p.set_defaults(func=cmd_inverse)

    p = sub.add_parser("bound", parents=[common], help="pointwise pullback bound at a point")
    jet_args(p, needs_u=True)
    p.add_argument("--p", type=_exponent, default=2.0, help="l^p norm on covariant slots")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("seminorm", parents=[common], help="discrete norms, seminorms and transform reports")
    p.add_argument("--kind", required=False, default="slobodeckij",
                   choices=("lp", "slobodeckij", "holder", "orlicz-slobodeckij", "transform"))
    p.add_argument("--samples", help="sample set JSON {points, weights[, values]}")
    p.add_argument("--values", help="JSON list of values at the sample points")
    p.add_argument("--u", help="PolyMap JSON evaluated at the samples")
    p.add_argument("--phi", help="PolyMap JSON of the transformation (--kind transform)")
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--p", type=_exponent, default=2.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--d", type=int, default=0)
    p.add_argument("--m", type=int, default=0)
    p.add_argument("--integrand", help="lp:p, exp or double-phase:p,q")
    p.add_argument("--orlicz-constant", type=float, default=None, help="user-supplied product constant")
    p.add_argument("--slack", type=float, default=0.1, help="quadrature slack for flagging")
    p.set_defaults(func=cmd_seminorm)

    p = sub.add_parser("orlicz", parents=[common], help="Luxemburg norms, duals and the Hoelder check")
    p.add_argument("--integrand", default="exp", help="lp:p, exp, double-phase:p,q or a table JSON file")
    p.add_argument("--samples")
    p.add_argument("--values")
    p.add_argument("--u")
    p.add_argument("--phi", help="pull the integrand back along this PolyMap")
    p.add_argument("--dual", action="store_true", help="use the dual integrand")
    p.add_argument("--holder", metavar="VALUES", help="second value list for the Hoelder check")
    p.add_argument("--validate", action="store_true", help="check the integrand axioms on the samples")
    p.set_defaults(func=cmd_orlicz)

    p = sub.add_parser("verify", parents=[common], help="run the oracle suites")
    p.add_argument("--suite", type=int, action="append", choices=range(1, 11), metavar="N")
    p.add_argument("--scale", type=float, default=1.0, help="instance-count multiplier")
    p.add_argument("--seed", type=int, default=None, help="overrides FAACALC_SEED")
    p.set_defaults(func=cmd_verify)
    return parser


_REQUIRED = {
    "partitions": ["m"],
    "bell": ["m"],
    "derive": ["f", "order"],
    "pullback": ["u", "order"],
    "inverse": ["order"],
    "bound": ["u", "phi", "at", "order"],
}


def _render_text(command, result) -> str:
    if command == "verify":
        return "\n".join(f"criterion {r['criterion']:2d} [{'PASS' if r['passed'] else 'FAIL'}] "
                         f"{r['title']}: {r['detail']} ({r['seconds']}s)" for r in result)
    if command == "partitions":
        return "\n".join("|".join(" ".join(map(str, b)) if isinstance(b, list) else str(b) for b in it)
                         for it in result)
    if isinstance(result, dict) and "derivs" in result:
        lines = [f"base point: {', '.join(result['base_point'])}"]
        for j, t in enumerate(result["derivs"]):
            lines.append(f"order {j} {tuple(t['contra_dims'])} x {t['cov_dim']}^{t['cov_arity']}: "
                         + " ".join(t["data"]))
        return "\n".join(lines)
    if isinstance(result, list):
        return "\n".join(" ".join(f"{k}={v}" for k, v in r.items()) for r in result)
    return "\n".join(f"{k}: {v if isinstance(v, str) else json.dumps(v)}" for k, v in result.items())


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        if args.input:
            doc = _load_json(args.input)
            if not isinstance(doc, dict) or doc.get("command") != args.command:
                raise InputError(f"{args.input} was not produced by 'faacalc {args.command}'")
            for k, v in doc.get("args", {}).items():
                setattr(args, k, v)
        for name in _REQUIRED.get(args.command, []):
            if getattr(args, name, None) is None:
                raise InputError(f"--{name} is required")
        result = args.func(args)
    except DomainError as exc:
        print(f"faacalc: domain error: {exc}", file=sys.stderr)
        return 1
    except (InputError, ValueError) as exc:
        print(f"faacalc: input error: {exc}", file=sys.stderr)
        return 2
    fmt = args.format or ("text" if args.command == "verify" else "json")
    if fmt == "json":
        recorded = {k: v for k, v in vars(args).items() if k not in _IO_ARGS and not k.startswith("_")}
        print(json.dumps({"command": args.command, "args": recorded, "result": result}, indent=1))
    else:
        print(_render_text(args.command, result))
    return 1 if getattr(args, "_failed", False) else 0


if __name__ == "__main__":
    sys.exit(main())
