"""Command line entry point: ``qasym eval|dio|asym ...``."""

from __future__ import annotations

import argparse
import json
import sys
from typing import List, Optional

import mpmath

from . import harness, qseries
from .diophantine import (
    GRAMMAR_HELP,
    ScalingParamParseError,
    cf_expand,
    chaotic_exponent_estimate,
    inhom_ostrowski,
    inhom_records_bruteforce,
    parse_scaling_param,
)
from .fitting import DegenerateFitError

EXIT_OK, EXIT_BOUND_FAILED, EXIT_USAGE = 0, 1, 2


def _fmt(x, prec: int) -> str:
    d = harness.digits_for(prec)
    if isinstance(x, mpmath.mpc):
        if x.imag == 0:
            x = x.real
        else:
            re_s = mpmath.libmp.to_str(x.real._mpf_, d)
            im_s = mpmath.libmp.to_str(abs(x.imag)._mpf_, d)
            return f"{re_s}{'-' if x.imag < 0 else '+'}{im_s}j"
    return mpmath.libmp.to_str(mpmath.mpf(x)._mpf_, d)


def _emit(pairs, output: str, out=None):
    """Print name/value pairs as 'name,value' lines or one JSON object."""
    if output == "json":
        text = json.dumps(dict(pairs), indent=2) + "\n"
    else:
        text = "".join(f"{k},{v}\n" for k, v in pairs)
    _write(text, out)


def _write(text: str, out: Optional[str]):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _prec(args) -> int:
    return max(args.prec or 256, harness.env_precision_floor())


# eval


def cmd_eval(args) -> int:
    P = _prec(args)
    with mpmath.workprec(P):
        # printed digits cover P bits, so sum to nearly full precision
        eps = mpmath.mpf(2) ** -(P - 16)
        q = harness.parse_real(args.q)
        z = harness.parse_number(args.z) if args.z is not None else None
        if args.func in ("aq", "theta", "cbh") and z is None:
            raise ValueError(f"eval {args.func} needs --z")
        if args.func == "aq":
            pairs = [("aq", _fmt(qseries.aq_direct(z, q, eps), P))]
        elif args.func == "theta":
            if args.method == "both":
                s, p, d = qseries.theta_both(z, q, eps)
                pairs = [("series", _fmt(s, P)), ("product", _fmt(p, P)), ("difference", _fmt(d, P))]
            else:
                pairs = [(f"theta_{args.method}", _fmt(qseries.theta(z, q, args.method, eps), P))]
        elif args.func == "qpoch":
            a = harness.parse_number(args.a) if args.a else z
            if a is None:
                raise ValueError("eval qpoch needs --a (or --z)")
            if args.n is None:
                pairs = [("qpoch_inf", _fmt(qseries.qpoch_inf(a, q, eps), P))]
            else:
                pairs = [(f"qpoch_{args.n}", _fmt(qseries.qpoch_n(a, q, args.n), P))]
        else:
            spec = harness.ExperimentSpec(family="cbh", a=args.a or "", b=args.b or "", l=args.l)
            p = spec.cbh_params()
            pairs = [("cbh", _fmt(qseries.cbh_direct(p, z, q, eps), P))]
    _emit(pairs, args.output, args.out)
    return EXIT_OK


# dio


def _record_rows(recs, output: str, out):
    if output == "json":
        data = [
            {
                "n": r.n,
                "m": r.m,
                "gamma": mpmath.nstr(r.gamma, 20),
                "gamma_bound": mpmath.nstr(r.gamma_bound, 20),
                "eligible": r.eligible,
            }
            for r in recs
        ]
        _write(json.dumps(data, indent=2) + "\n", out)
        return
    lines = ["n,m,gamma,gamma_bound,eligible\n"]
    lines += [
        f"{r.n},{r.m},{mpmath.nstr(r.gamma, 20)},{mpmath.nstr(r.gamma_bound, 20)},"
        f"{str(r.eligible).lower()}\n"
        for r in recs
    ]
    _write("".join(lines), out)


def cmd_dio(args) -> int:
    t = parse_scaling_param(args.t)
    beta = args.beta
    N = 1000 if args.N is None else args.N
    if args.func == "cf":
        cf = cf_expand(t, args.K)
        if args.output == "json":
            _write(json.dumps({"partial_quotients": cf.partial_quotients,
                               "exact_termination": cf.exact_termination}) + "\n", args.out)
        else:
            _write(str(cf) + "\n", args.out)
    elif args.func == "records":
        _record_rows(inhom_records_bruteforce(t, beta, N), args.output, args.out)
    elif args.func == "ostrowski":
        count = args.count if args.count is not None else (None if args.N else 10)
        recs = inhom_ostrowski(t, beta, count=count, n_max=args.N)
        _record_rows(recs, args.output, args.out)
    else:
        est = chaotic_exponent_estimate(t, beta, N)
        pairs = [
            ("r_hat", repr(est.r_hat)),
            ("records_used", str(est.records_used)),
            ("intercept", "" if est.intercept is None else repr(est.intercept)),
            ("floor", str(est.floor).lower()),
            ("floor_distance", "" if est.floor_distance is None else repr(est.floor_distance)),
        ]
        _emit(pairs, args.output, args.out)
    return EXIT_OK


# asym


def _spec_from_args(args) -> harness.ExperimentSpec:
    n_source = args.n
    if args.records is not None:
        n_source = f"records({args.records})"
    elif args.convergents is not None:
        n_source = f"convergents({args.convergents})"
    flags = {
        "family": args.family,
        "q": args.q,
        "u": args.u,
        "t": args.t,
        "beta_or_lambda": args.beta,
        "n_source": n_source,
        "a": args.a,
        "b": args.b,
        "l": args.l,
        "precision_override": args.prec,
        "output": args.output,
    }
    text = ""
    if args.config:
        with open(args.config) as fh:
            text = fh.read()
    return harness.ExperimentSpec.from_config(text, **flags)


def cmd_asym(args) -> int:
    spec = _spec_from_args(args)
    if args.func == "verify" and harness.parse_n_source(spec.n_source)[0] != "list":
        raise ValueError("asym verify takes an explicit --n list; use asym sweep for records/convergents")
    result = harness.run_sweep(spec)
    if spec.output == "json":
        text = harness.rows_to_json(result, args.verbose)
    else:
        text = harness.rows_to_csv(result, args.verbose)
    _write(text, args.out)
    for row in result.rows:
        if row.error:
            print(f"warning: n={row.point.n}: {row.error}", file=sys.stderr)
    return EXIT_OK if result.all_ok else EXIT_BOUND_FAILED


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", choices=("csv", "json"), default=None)
    common.add_argument("--out", help="write to this path instead of stdout")

    ap = argparse.ArgumentParser(
        prog="qasym",
        description="q-series evaluation, Diophantine records and theta asymptotics checks",
        epilog=GRAMMAR_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = ap.add_subparsers(dest="cmd", required=True)

    ev = sub.add_parser("eval", parents=[common], help="evaluate a function at one point")
    ev.add_argument("func", choices=("aq", "theta", "qpoch", "cbh"))
    ev.add_argument("--q", required=True)
    ev.add_argument("--z")
    ev.add_argument("--a", help="qpoch base a, or comma-separated numerator parameters for cbh")
    ev.add_argument("--b", help="comma-separated denominator parameters for cbh")
    ev.add_argument("--l", default="1", help="quadratic exponent for cbh")
    ev.add_argument("--n", type=int, help="finite qpoch length (omit for infinite)")
    ev.add_argument("--prec", type=int, help="working precision in bits (default 256)")
    ev.add_argument("--method", choices=("series", "product", "both"), default="series")
    ev.set_defaults(handler=cmd_eval)

    dio = sub.add_parser(
        "dio",
        parents=[common],
        help="continued fractions and approximation records",
        epilog=GRAMMAR_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    dio.add_argument("func", choices=("cf", "records", "ostrowski", "chaotic-index"))
    dio.add_argument("--t", required=True, help="scaling parameter")
    dio.add_argument("--beta", default="0")
    dio.add_argument("--N", type=int, help="largest n (default 1000; ostrowski: unbounded with --count)")
    dio.add_argument("--K", type=int, default=10)
    dio.add_argument("--count", type=int)
    dio.set_defaults(handler=cmd_dio)

    asym = sub.add_parser(
        "asym",
        parents=[common],
        help="check residuals against the theta main term",
        epilog=GRAMMAR_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    asym.add_argument("func", choices=("verify", "sweep"))
    asym.add_argument("--config", help="key=value file; flags override its entries")
    asym.add_argument("--family", choices=("aq", "cbh"))
    asym.add_argument("--t")
    asym.add_argument("--q")
    asym.add_argument("--u")
    asym.add_argument("--beta", "--lambda", dest="beta", help="beta (irrational t) or lambda filter (rational t)")
    asym.add_argument("--n", help="'lo:hi[:step]' or 'n1,n2,...'")
    asym.add_argument("--records", type=int, metavar="N", help="use the approximation records n <= N")
    asym.add_argument("--convergents", type=int, metavar="K", help="use the first K convergent denominators")
    asym.add_argument("--a")
    asym.add_argument("--b")
    asym.add_argument("--l")
    asym.add_argument("--prec", type=int, help="fixed precision in bits instead of auto sizing")
    asym.add_argument("--verbose", action="store_true", help="add both printed bound variants")
    asym.set_defaults(handler=cmd_asym)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.cmd != "asym" and args.output is None:
        args.output = "csv"
    try:
        return args.handler(args)
    except ScalingParamParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, ArithmeticError, DegenerateFitError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
