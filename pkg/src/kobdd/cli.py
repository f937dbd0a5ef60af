"""``kobdd`` command line.

Exit status: 0 success, 1 property violation (mismatch or bound breach),
2 usage error or invalid parameters, 3 internal error.  ``--json`` prints
one JSON document per run.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .builder import build, differential_check, explain, width_bound
from .program import (VariableOrder, dumps, evaluate, export_dot, loads, metrics,
                      parse_bits, validate_kobdd)
from .saf import InvalidParams, min_valid_n, trace, validate_params
from .subfn import (BoolFunction, Partition, ak13_sweep, census_global,
                    census_pi, census_theta, hierarchy_gap, separation_threshold)

SCHEMA = "kobdd/1"

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _emit(args, record: dict, human: list[str]) -> None:
    if args.json:
        doc = {"schema": SCHEMA, "command": args.command, **record}
        print(json.dumps(doc, sort_keys=True))
    else:
        print("\n".join(human))


def _params(args):
    n = args.n if args.n is not None else min_valid_n(args.k, args.w)
    return validate_params(args.k, args.w, n)


def _layout_record(p) -> dict:
    return {"k": p.k, "w": p.w, "n": p.n, "a": p.a, "b": p.b, "addr_bits": p.addr_bits,
            "blocks": p.block_count}


def cmd_params(args) -> int:
    if args.n is None:
        p = validate_params(args.k, args.w, min_valid_n(args.k, args.w))
        note = "minimal valid n"
    else:
        p = validate_params(args.k, args.w, args.n)
        note = "valid"
    rec = {"valid": True, **_layout_record(p)}
    _emit(args, rec, [f"{note}: n={p.n} (k={p.k}, w={p.w})",
                      f"blocks={p.block_count} a={p.a} address bits={p.addr_bits} b={p.b}"])
    return EXIT_OK


def cmd_build(args) -> int:
    p = _params(args)
    program = build(p)
    m = metrics(program)
    problems = validate_kobdd(program)
    report = explain(program)
    if args.output:
        Path(args.output).write_text(dumps(program))
    ok = not problems and m.width <= width_bound(p) and m.layer_count == 2 * p.k
    rec = {**_layout_record(p), "width": m.width, "size": m.size, "layers": m.layer_count,
           "width_bound": width_bound(p), "size_bound_holds": m.size_bound_holds,
           "violations": [str(v) for v in problems], "roles": report.max_counts,
           "output": args.output, "ok": ok}
    _emit(args, rec, [
        f"built 2k-OBDD for k={p.k} w={p.w} n={p.n}",
        f"layers={m.layer_count} width={m.width} (bound 3w+1={width_bound(p)}) size={m.size}",
        f"role maxima per level: {report.max_counts}",
        "validate: pass" if not problems else f"validate: {len(problems)} violations",
    ] + ([f"written to {args.output}"] if args.output else []))
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_eval(args) -> int:
    bits = parse_bits(args.input)
    if args.program:
        program = loads(Path(args.program).read_text())
        out = evaluate(program, bits)
        _emit(args, {"source": "program", "input": args.input, "output": out},
              [f"output: {out}"])
        return EXIT_OK
    p = _params(args)
    if len(bits) != p.n:
        raise UsageError(f"input has {len(bits)} bits, expected n={p.n}")
    tr = trace(p, bits)
    rec = {"source": "reference", **_layout_record(p), "input": args.input,
           "output": tr.final}
    human = [f"output: {tr.final}"]
    if args.trace:
        rec["trace"] = tr.as_dict()
        for t, step in enumerate(tr.steps):
            human.append(f"t={t}: step1={step.step1} (block {step.block_for_step1}) "
                         f"step2={step.step2} (block {step.block_for_step2})")
    _emit(args, rec, human)
    return EXIT_OK


def cmd_check(args) -> int:
    p = _params(args)
    report = differential_check(p, samples=args.samples, seed=args.seed,
                                layer_samples=args.layer_samples)
    rec = {**report.as_dict(), "seed": args.seed}
    human = [f"k={p.k} w={p.w} n={p.n}: {report.samples} random + {report.structured} structured inputs",
             f"mismatches: {len(report.mismatches)}",
             f"per-layer checked: {report.layer_checked}, disagreements: {len(report.layer_mismatches)}"]
    human += [f"  mismatch input: {s}" for s in report.mismatches]
    human += [f"  layer mismatch input: {s}" for s in report.layer_mismatches]
    _emit(args, rec, human)
    return EXIT_OK if report.ok else EXIT_VIOLATION


def _function(args) -> BoolFunction:
    if args.table and args.program:
        raise UsageError("give either --table or --program")
    if args.table:
        return BoolFunction.from_bits(args.table)
    if args.program:
        return BoolFunction.from_program(loads(Path(args.program).read_text()))
    raise UsageError("census needs --table or --program")


def cmd_census(args) -> int:
    f = _function(args)
    c = census_global(f)
    rec = {"n": f.n, "N": c.n_global, "order": list(c.order.perm), "cut": c.cut}
    human = [f"n={f.n}  N(f)={c.n_global}  attained by order {list(c.order.perm)}"]
    if args.order:
        order = VariableOrder(tuple(int(v) for v in args.order.split(",")))
        rec["N_theta"] = census_theta(f, order)
        human.append(f"N^theta for order {list(order.perm)} = {rec['N_theta']}")
        if args.cut is not None:
            rec["N_pi"] = census_pi(f, Partition(order, args.cut))
            human.append(f"N^pi for cut {args.cut} = {rec['N_pi']}")
    _emit(args, rec, human)
    return EXIT_OK


def cmd_bounds(args) -> int:
    rows = ak13_sweep(args.count, args.max_k, args.max_w, args.max_n, args.seed)
    bad = [r for r in rows if not r["ok"]]
    size_bad = sum(not r["size_bound_holds"] for r in rows)
    rec = {"count": len(rows), "violations": len(bad), "violating": bad,
           "size_inequality_failures": size_bad, "seed": args.seed}
    _emit(args, rec, [f"{len(rows)} random k-OBDDs (k<={args.max_k}, w<={args.max_w}, n<={args.max_n})",
                      f"N(f) <= w^((k-1)w+1) violations: {len(bad)}",
                      f"strict size inequality failures: {size_bad}"])
    return EXIT_OK if not bad else EXIT_VIOLATION


def _int_list(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def cmd_gap(args) -> int:
    ks, ws = _int_list(args.k), _int_list(args.w)
    reports = [hierarchy_gap(k, w) for w in ws for k in ks]
    rec = {"results": [r.as_dict() for r in reports],
           "all_separated": all(r.separated for r in reports),
           "threshold": {str(w): separation_threshold(w) for w in ws}}
    human = []
    for r in reports:
        d = r.as_dict()
        flag = "separated" if r.separated else "NOT separated"
        human.append(f"k={r.k} w={r.w}: lhs={d['lhs']['base']}^{d['lhs']['exp']} "
                     f"rhs={d['rhs']['base']}^{d['rhs']['exp']} -> {flag}"
                     + ("" if r.in_range else " (outside k>=2, w>=64)"))
    for w in ws:
        human.append(f"w={w}: smallest separating k = {rec['threshold'][str(w)]}")
    _emit(args, rec, human)
    return EXIT_OK


def cmd_dot(args) -> int:
    if args.program:
        program = loads(Path(args.program).read_text())
    else:
        if args.k is None or args.w is None:
            raise UsageError("dot needs --program or -k/-w")
        program = build(_params(args))
    text = export_dot(program)
    if args.output:
        Path(args.output).write_text(text)
        _emit(args, {"output": args.output, "bytes": len(text)}, [f"written to {args.output}"])
    elif args.json:
        _emit(args, {"dot": text}, [])
    else:
        sys.stdout.write(text)
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kobdd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    saf = argparse.ArgumentParser(add_help=False)
    saf.add_argument("-k", type=int, required=True)
    saf.add_argument("-w", type=int, required=True)
    saf.add_argument("-n", type=int, help="variable count (default: minimal valid n)")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("params", parents=[common, saf], help="validate (k, w, n) or find minimal n")
    sp.set_defaults(func=cmd_params)

    sp = sub.add_parser("build", parents=[common, saf], help="build the SAF 2k-OBDD")
    sp.add_argument("-o", "--output", help="write the serialized program here")
    sp.set_defaults(func=cmd_build)

    sp = sub.add_parser("eval", parents=[common], help="evaluate SAF or a program on one input")
    sp.add_argument("-k", type=int)
    sp.add_argument("-w", type=int)
    sp.add_argument("-n", type=int)
    sp.add_argument("--input", required=True, help="string of n '0'/'1' characters")
    sp.add_argument("--trace", action="store_true")
    sp.add_argument("--program", help="serialized program instead of the reference evaluator")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("check", parents=[common, saf], help="built program vs reference")
    sp.add_argument("--samples", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=1)
    sp.add_argument("--layer-samples", type=int, default=1000)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("census", parents=[common], help="subfunction census of a small function")
    sp.add_argument("--table", help="truth table bit string of length 2^n")
    sp.add_argument("--program", help="serialized program file")
    sp.add_argument("--order", help="comma-separated order for N^theta")
    sp.add_argument("--cut", type=int, help="cut for N^pi (with --order)")
    sp.set_defaults(func=cmd_census)

    sp = sub.add_parser("bounds", parents=[common], help="random k-OBDD sweep of the width bound")
    sp.add_argument("--count", type=int, default=1000)
    sp.add_argument("--max-k", type=int, default=3)
    sp.add_argument("--max-w", type=int, default=3)
    sp.add_argument("--max-n", type=int, default=6)
    sp.add_argument("--seed", type=int, default=2)
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("gap", parents=[common], help="exact hierarchy inequality over a grid")
    sp.add_argument("-k", required=True, help="list or ranges, e.g. 6-64 or 2,6")
    sp.add_argument("-w", required=True, help="list or ranges, e.g. 64,128")
    sp.set_defaults(func=cmd_gap)

    sp = sub.add_parser("dot", parents=[common], help="graphviz export")
    sp.add_argument("-k", type=int)
    sp.add_argument("-w", type=int)
    sp.add_argument("-n", type=int)
    sp.add_argument("--program")
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_dot)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "eval" and not args.program and (args.k is None or args.w is None):
            raise UsageError("eval needs -k and -w, or --program")
        return args.func(args)
    except (InvalidParams, UsageError, ValueError, OSError) as exc:
        print(f"kobdd {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        print(f"kobdd {args.command}: internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
