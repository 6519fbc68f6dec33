"""Command-line entry point: ``dfi COMMAND FILE [flags]``.

Exit codes: 0 accepted / no violation, 1 rejected / violation found,
2 usage or parse error.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from . import checker_algo, checker_decl, harness
from .dfi import make_monitor
from .machine import explore, load_process, run
from .parser import ParseError, ProgramFile, parse_file, print_program
from .types import show

OK, FAIL, USAGE = 0, 1, 2


class _Usage(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dfi", description="Typecheck, run and fuzz "
                                 "programs with dynamic integrity labels.")
    sub = ap.add_subparsers(dest="command", required=True)

    def cmd(name, help_, file=True):
        p = sub.add_parser(name, help=help_)
        if file:
            p.add_argument("file")
        p.add_argument("--json", action="store_true", help="machine-readable output")
        return p

    p = cmd("typecheck", "check a program with the constraint-based algorithm")
    p.add_argument("--despite", metavar="LABEL")

    p = cmd("oracle", "search for a derivation with the declarative rules")
    p.add_argument("--despite", metavar="LABEL")
    p.add_argument("--oracle-budget", type=int, default=checker_decl.DEFAULT_BUDGET,
                   metavar="N")

    p = cmd("run", "run one seeded interleaving")
    p.add_argument("--monitor", metavar="LABEL")
    p.add_argument("--watch", action="append", metavar="NAME",
                   help="monitor only these names (repeatable)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-steps", type=int, default=200)
    p.add_argument("--optimized-exec", action="store_true")
    p.add_argument("--scheduler", default="random",
                   choices=("random", "uniform", "round-robin"))

    p = cmd("explore", "explore every interleaving up to a depth")
    p.add_argument("--monitor", metavar="LABEL")
    p.add_argument("--watch", action="append", metavar="NAME")
    p.add_argument("--depth", type=int, default=12)
    p.add_argument("--budget", type=int, default=10 ** 6, help="state budget")
    p.add_argument("--optimized-exec", action="store_true")

    p = cmd("fuzz", "explore the program against generated adversaries")
    p.add_argument("--despite", metavar="LABEL", required=True)
    p.add_argument("--monitor", metavar="LABEL")
    p.add_argument("--watch", action="append", metavar="NAME")
    p.add_argument("--adversaries", type=int, default=100)
    p.add_argument("--depth", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)

    p = cmd("bench", "time the typechecker on synthesized programs", file=False)
    p.add_argument("--sizes", default="1000,10000,100000")
    p.add_argument("--labels", type=int, default=4)

    cmd("fmt", "pretty-print a program")
    return ap


def _label(pf: ProgramFile, name: Optional[str]):
    if name is None:
        return None
    try:
        return 0 if name == "bot" else pf.order.label(name)
    except KeyError:
        raise _Usage(f"unknown label {name!r}; declared: "
                     f"{', '.join(pf.order.names)}") from None


def _emit(args, record: dict, text: str) -> None:
    if args.json:
        print(json.dumps(record, sort_keys=True))
    else:
        print(text)


def _typecheck(args, pf: ProgramFile) -> int:
    despite = _label(pf, args.despite)
    v = checker_algo.typecheck(pf, despite)
    rec = dict(v.record(), file=args.file)
    if v.accepted:
        _emit(args, rec, f"accepted: {v.ty}" + (f"^{v.effect}" if v.effect else ""))
        return OK
    text = "\n".join(f"{args.file}:{d['line']}:{d['col']}: rejected by ({d['rule']}): "
                     f"{d['message']}" for d in v.diagnostics)
    _emit(args, rec, text)
    return FAIL


def _oracle(args, pf: ProgramFile) -> int:
    despite = _label(pf, args.despite)
    order = pf.order if despite is None else pf.order.compromise(despite)
    res = checker_decl.check_decl(pf.env(), order.top, pf.main, order, args.oracle_budget)
    algo = checker_algo.typecheck(pf, despite).accepted
    rec = {"file": args.file, "derivable": res.types, "exhausted": res.exhausted,
           "steps": res.steps, "typable": res.typable, "algo_accepted": algo}
    if res.typable:
        text = "derivable: " + ", ".join(res.types)
    elif res.exhausted:
        text = f"undecided: search budget of {args.oracle_budget} steps exhausted"
    else:
        text = "no derivation"
    text += f"\nchecker-algo {'accepts' if algo else 'rejects'}"
    _emit(args, rec, text)
    return OK if res.typable else FAIL


def _policy(args, pf: ProgramFile):
    if args.monitor is None:
        if args.watch:
            raise _Usage("--watch needs --monitor")
        return None
    return harness.monitor_policy(pf, _label(pf, args.monitor), args.watch)


def _violation_text(v, pf) -> str:
    return "VIOLATION " + v.describe(pf.order)


def _run(args, pf: ProgramFile) -> int:
    policy = _policy(args, pf)
    mon = make_monitor(policy) if policy else None
    cfg = load_process(pf.order, pf.main, pf.env())
    tr = run(cfg, args.max_steps, seed=args.seed, scheduler=args.scheduler,
             optimized=args.optimized_exec, monitor=mon)
    order = pf.order
    for e in tr.events:
        if e.rule == "violation":
            v = e.details["violation"]
            _emit(args, {"event": "violation", **v.record(order)}, _violation_text(v, pf))
            continue
        details = {k: (order.name(x) if k in ("trust", "olabel", "runs_at") else str(x))
                   for k, x in e.details.items()}
        rec = {"event": e.rule, "thread": list(e.tid), "label": order.name(e.plabel),
               **details}
        shown = " ".join(f"{k}={x}" for k, x in details.items())
        _emit(args, rec, f"{e.rule:9} t{'.'.join(map(str, e.tid))} "
                         f"[{order.name(e.plabel)}] {shown}".rstrip())
    _emit(args, {"end": tr.end, "steps": tr.steps, "violations": len(tr.violations)},
          f"-- {tr.end} after {tr.steps} steps, {len(tr.violations)} violation(s)")
    return FAIL if tr.violations else OK


def _explore(args, pf: ProgramFile) -> int:
    policy = _policy(args, pf)
    cfg = load_process(pf.order, pf.main, pf.env())
    ex = explore(cfg, args.depth, make_monitor(policy) if policy else None, args.budget,
                 optimized=args.optimized_exec)
    for v in ex.violations:
        _emit(args, {"event": "violation", **v.record(pf.order)}, _violation_text(v, pf))
    _emit(args, {"verdict": ex.verdict, "states": ex.states, "depth": ex.depth_reached},
          f"-- {ex.verdict}: {ex.states} states, depth {ex.depth_reached}")
    return FAIL if ex.violations else OK


def _fuzz(args, pf: ProgramFile) -> int:
    c = _label(pf, args.despite)
    thr = _label(pf, args.monitor) if args.monitor else c
    if not pf.order.leq(c, thr):
        raise _Usage("--monitor must be at least --despite")
    v = checker_algo.typecheck(pf, c)
    rep = harness.prop_strong_dfi(pf, c, thr, args.adversaries, args.depth,
                                  seed=args.seed, watch=args.watch, name=args.file)
    if args.json:
        sys.stdout.write(rep.lines())
    else:
        for r in rep.failures[:10]:
            print(f"VIOLATION with adversary seed {r['seed']}: {r['witness']}")
    n_bounded = rep.count("bounded")
    _emit(args, {"typechecks": v.accepted, "adversaries": len(rep.records),
                 "violations": len(rep.failures), "bounded": n_bounded},
          f"-- {len(rep.records)} adversaries, {len(rep.failures)} with violations, "
          f"{n_bounded} bounded passes (program "
          f"{'typechecks' if v.accepted else 'does not typecheck'} despite {args.despite})")
    return FAIL if rep.failures else OK


def _bench(args) -> int:
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s]
    except ValueError:
        raise _Usage("--sizes takes comma-separated integers") from None
    res = harness.bench_scaling(sorted(sizes), args.labels)
    if args.json:
        print(json.dumps(res, sort_keys=True))
    else:
        for r in res["rows"]:
            print(f"{r['size']:>9} nodes  {r['seconds']:.4f} s")
        if res["exponent"] is not None:
            print(f"fitted exponent: {res['exponent']:.3f}")
    return OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    try:
        if args.command == "bench":
            return _bench(args)
        try:
            pf = parse_file(args.file)
        except OSError as exc:
            raise _Usage(f"cannot read {args.file}: {exc.strerror}") from None
        if args.command == "fmt":
            sys.stdout.write(print_program(pf))
            return OK
        return {"typecheck": _typecheck, "oracle": _oracle, "run": _run,
                "explore": _explore, "fuzz": _fuzz}[args.command](args, pf)
    except ParseError as exc:
        if args.json:
            print(json.dumps({"error": exc.record(), "file": args.file}, sort_keys=True))
        else:
            print(f"{args.file}:{exc}", file=sys.stderr)
        return USAGE
    except _Usage as exc:
        if getattr(args, "json", False):
            print(json.dumps({"error": {"code": "usage", "message": str(exc)}}))
        else:
            print(f"dfi: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
