"""Command-line interface.

Exit codes: 0 success, 1 domain/runtime error, 2 usage error,
3 internal invariant violation.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import io
from .bourgain_bound import lower_bound_asymptotic, lower_bound_iterative, m_from_n
from .convexity import (
    ConvexityProfile,
    SpaceSpec,
    convexity_profile,
    modulus_analytic,
    modulus_numeric,
)
from .errors import LemmaViolation, TreeDistortError
from .fork_engine import DEFAULT_TAU, certify_chain
from .metric_core import Embedding
from .optimizer import OptimizerConfig, multi_start

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_INVARIANT = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _profile(p, c):
    if c in (None, "auto"):
        return convexity_profile(SpaceSpec(p, 2))
    return ConvexityProfile(p_type=max(2.0, p), c=float(c), source="analytic")


def _emit(args, manifest, payload, human_lines, csv_header=None, csv_rows=None):
    manifest.finish()
    if getattr(args, "json", False):
        sys.stdout.write(io.dumps({"manifest": manifest.to_dict(), **payload}))
    elif getattr(args, "csv", False) and csv_header:
        sys.stdout.write(",".join(csv_header) + "\n")
        for row in csv_rows:
            sys.stdout.write(",".join(io.format_real(v) if isinstance(v, float) else str(v)
                                      for v in row) + "\n")
    else:
        for line in human_lines:
            print(line)


def cmd_bound(args):
    m = args.m if args.m is not None else m_from_n(args.n)
    profile = _profile(args.p, args.c)
    methods = ["iterative", "asymptotic"] if args.method == "both" else [args.method]
    manifest = io.RunManifest("bound", {"m": m, "n": args.n, "p": args.p, "c": args.c,
                                        "tau": args.tau, "method": args.method})
    results = []
    for method in methods:
        if method == "iterative":
            results.append(lower_bound_iterative(m, profile, args.tau))
        else:
            r = lower_bound_asymptotic(m, profile)
            r.tau = args.tau
            results.append(r)
    lines = [f"profile: p_type={profile.p_type:g} c={profile.c:.17g} source={profile.source}"]
    for r in results:
        lines.append(f"{r.method}: m={r.m} lower bound = {r.value:.17g}")
    if not profile.rigorous:
        lines.append("warning: numeric convexity constant; bound is not certified")
    rows = [[r.m, r.method, r.value, profile.p_type, profile.c, args.tau] for r in results]
    _emit(args, manifest, {"results": [r.to_dict() for r in results]}, lines,
          ["m", "method", "value", "p", "c", "tau"], rows)
    return EXIT_OK


def cmd_modulus(args):
    space = SpaceSpec(args.p, args.dim)
    manifest = io.RunManifest("modulus", {"p": args.p, "dim": args.dim, "eps": args.eps,
                                          "numeric": args.numeric}, seed=args.seed)
    payload = {"p": args.p, "dim": args.dim, "eps": args.eps}
    lines = []
    if args.p >= 2:
        payload["analytic"] = modulus_analytic(space, args.eps)
        lines.append(f"analytic: {payload['analytic']:.17g}")
    if args.numeric or args.p < 2:
        est = modulus_numeric(space, args.eps, seed=args.seed)
        payload["numeric"] = {"value": est.value, "x": est.x, "y": est.y,
                              "separation": est.separation}
        lines.append(f"numeric: {est.value:.17g}")
        lines.append(f"  x = {np.array2string(est.x, precision=12)}")
        lines.append(f"  y = {np.array2string(est.y, precision=12)}")
        if "analytic" in payload:
            payload["difference"] = est.value - payload["analytic"]
            lines.append(f"  numeric - analytic = {payload['difference']:.3e}")
    _emit(args, manifest, payload, lines)
    return EXIT_OK


def _lower_bound_for_depth(depth, profile, tau):
    if depth < 2:
        return 1.0
    return lower_bound_iterative(m_from_n(depth), profile, tau).value


def cmd_embed(args):
    space = SpaceSpec(args.p, args.dim)
    config = OptimizerConfig(restarts=args.restarts, steps=args.steps, seed=args.seed)
    manifest = io.RunManifest("embed", {"depth": args.depth, "p": args.p, "dim": args.dim,
                                        "restarts": args.restarts, "steps": args.steps,
                                        "tau": args.tau}, seed=args.seed)
    # fail on an unwritable path before the search runs
    open(args.out, "w").close()
    result = multi_start(args.depth, space, config)
    profile = convexity_profile(space)
    lower = _lower_bound_for_depth(args.depth, profile, args.tau)
    manifest.finish()
    doc = result.embedding.to_dict()
    doc["report"] = result.report.to_dict()
    doc["lower_bound"] = lower
    doc["manifest"] = manifest.to_dict()
    io.write_json(args.out, doc)
    if args.history:
        io.write_csv(args.history, ["restart", "step", "objective", "exact_distortion_snapshot"],
                     result.trace, manifest.to_dict())
    lines = [
        f"upper bound (achieved distortion): {result.report.distortion:.17g}",
        f"certified lower bound:             {lower:.17g}",
        f"embedding written to {args.out}",
    ]
    _emit(args, manifest, {"upper": result.report.distortion, "lower": lower,
                           "out": args.out}, lines)
    return EXIT_OK


def _load_embedding(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise TreeDistortError(f"{path}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}")
    except OSError as exc:
        raise TreeDistortError(f"{path}: {exc.strerror}")
    if not isinstance(data, dict):
        raise TreeDistortError(f"{path}: top level must be a JSON object")
    try:
        return Embedding.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise TreeDistortError(f"{path}: invalid embedding: {exc}")


def cmd_certify(args):
    e = _load_embedding(args.input)
    if e.tree.depth < 2:
        raise UsageError(f"certification needs tree depth >= 2, input has depth {e.tree.depth}")
    profile = convexity_profile(e.space)
    manifest = io.RunManifest("certify", {"input": args.input, "tau": args.tau})
    trace = certify_chain(e, profile, args.tau)
    st = trace.certified_statement
    verdict = "PASS" if st["passed"] else "FAIL"
    manifest.finish()
    if args.trace:
        io.write_json(args.trace, {"manifest": manifest.to_dict(), **trace.to_dict()})
    lines = [
        f"D_0 = {trace.d_sequence[0]:.17g}",
        "D_k = " + ", ".join(f"{d:.12g}" for d in trace.d_sequence),
        f"lower bound L (m={st['m']}) = {st['lower_bound']:.17g}",
        f"D_0 >= L: {verdict}",
    ]
    if not profile.rigorous:
        lines.append("warning: numeric convexity constant; certificate is not rigorous")
    _emit(args, manifest, {"d_sequence": trace.d_sequence, "lower_bound": st["lower_bound"],
                           "m": st["m"], "verdict": verdict, "levels": len(trace.levels)}, lines)
    return EXIT_OK if st["passed"] else EXIT_INVARIANT


def report_rows(p, m_list, c="auto", tau=DEFAULT_TAU):
    """Rows ``(m, iterative, asymptotic, ratio)`` with ratio = asymptotic / iterative."""
    profile = _profile(p, c)
    rows = []
    for m in m_list:
        it = lower_bound_iterative(m, profile, tau).value
        asym = lower_bound_asymptotic(m, profile).value
        rows.append((m, it, asym, asym / it))
    return rows


def cmd_report(args):
    m_list = _parse_ints(args.m_list)
    manifest = io.RunManifest("report", {"p": args.p, "m_list": m_list, "c": args.c,
                                         "tau": args.tau})
    rows = report_rows(args.p, m_list, args.c, args.tau)
    header = ["m", "iterative", "asymptotic", "ratio"]
    manifest.finish()
    if args.csv:
        io.write_csv(args.csv, header, rows, manifest.to_dict())
    lines = [f"{'m':>10} {'iterative':>22} {'asymptotic':>22} {'ratio':>10}"]
    lines += [f"{m:>10d} {it:>22.15g} {a:>22.15g} {r:>10.6f}" for m, it, a, r in rows]
    _emit(args, manifest, {"columns": header, "rows": [list(r) for r in rows]}, lines)
    return EXIT_OK


def _parse_ints(text):
    try:
        values = [int(tok) for tok in text.replace(" ", "").split(",") if tok]
    except ValueError:
        raise UsageError(f"--m-list must be comma-separated integers, got {text!r}")
    if not values:
        raise UsageError("--m-list is empty")
    return values


def _nonneg_decimal(text):
    if not text.isdigit():
        raise argparse.ArgumentTypeError(f"expected a decimal integer, got {text!r}")
    return text


def build_parser():
    parser = argparse.ArgumentParser(prog="treedistort", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bound", help="certified lower bound on c_X(T_n)")
    g = b.add_mutually_exclusive_group(required=True)
    g.add_argument("--m", type=int, help="iteration count floor(log2 n)")
    g.add_argument("--n", type=_nonneg_decimal, help="tree depth n (any size, decimal)")
    b.add_argument("--p", type=float, required=True)
    b.add_argument("--c", default="auto", help="convexity constant or 'auto'")
    b.add_argument("--tau", type=float, default=DEFAULT_TAU)
    b.add_argument("--method", choices=["iterative", "asymptotic", "both"], default="both")
    out = b.add_mutually_exclusive_group()
    out.add_argument("--json", action="store_true")
    out.add_argument("--csv", action="store_true")
    b.set_defaults(func=cmd_bound)

    mo = sub.add_parser("modulus", help="modulus of convexity of l_p^dim")
    mo.add_argument("--p", type=float, required=True)
    mo.add_argument("--dim", type=int, required=True)
    mo.add_argument("--eps", type=float, required=True)
    mo.add_argument("--numeric", action="store_true")
    mo.add_argument("--seed", type=int, default=0)
    mo.add_argument("--json", action="store_true")
    mo.set_defaults(func=cmd_modulus)

    e = sub.add_parser("embed", help="search for a low-distortion embedding of T_depth")
    e.add_argument("--depth", type=int, required=True)
    e.add_argument("--p", type=float, required=True)
    e.add_argument("--dim", type=int, required=True)
    e.add_argument("--restarts", type=int, default=8)
    e.add_argument("--steps", type=int, default=5000)
    e.add_argument("--seed", type=int, default=42)
    e.add_argument("--tau", type=float, default=DEFAULT_TAU)
    e.add_argument("--out", required=True)
    e.add_argument("--history", help="optional CSV of optimization snapshots")
    e.add_argument("--json", action="store_true")
    e.set_defaults(func=cmd_embed)

    c = sub.add_parser("certify", help="run the extraction chain on an embedding file")
    c.add_argument("--input", required=True)
    c.add_argument("--tau", type=float, default=DEFAULT_TAU)
    c.add_argument("--trace", help="write the extraction trace JSON here")
    c.add_argument("--json", action="store_true")
    c.set_defaults(func=cmd_certify)

    r = sub.add_parser("report", help="iterative vs asymptotic table")
    r.add_argument("--p", type=float, required=True)
    r.add_argument("--m-list", required=True, help="comma-separated m values")
    r.add_argument("--c", default="auto")
    r.add_argument("--tau", type=float, default=DEFAULT_TAU)
    r.add_argument("--csv", help="also write the table to this CSV file")
    r.add_argument("--json", action="store_true")
    r.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"treedistort {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LemmaViolation as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (TreeDistortError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
