"""Generators, property suites and the scaling benchmark.

Every suite returns a ``Report`` whose records are plain dicts
(``suite``, ``case``, ``seed``, ``result`` and optionally ``witness``), so
they can be written one JSON object per line.
"""

from __future__ import annotations

import json
import math
import random
import statistics
import time
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .checker_algo import typecheck_process
from .checker_decl import (DEFAULT_BUDGET, BudgetExhausted, check_decl, derivable,
                           runtime_failure)
from .corpus import Grammar, hypothesis_envs, small_order
from .dfi import MonitorPolicy, make_monitor, trusted_objects
from .labels import BOT, Label, LabelOrder
from .machine import Config, Event, explore, load_process, run
from .parser import ProgramFile, print_process
from .syntax import (UNIT, Exec, Fork, Let, Limit, New, Pack, Process, Read,
                     Relabel, Result, Var, Write, box_pred, size)
from .types import STUCK, Eff, show

MAX_ADVERSARY = 40


@dataclass
class Report:
    suite: str
    records: list = field(default_factory=list)

    def add(self, case, seed, result: str, witness=None, **extra) -> None:
        rec = {"suite": self.suite, "case": str(case), "seed": seed, "result": result}
        if witness is not None:
            rec["witness"] = witness
        rec.update(extra)
        self.records.append(rec)

    @property
    def failures(self) -> list:
        return [r for r in self.records if r["result"] == "fail"]

    @property
    def ok(self) -> bool:
        return not self.failures

    def count(self, result: str) -> int:
        return sum(1 for r in self.records if r["result"] == result)

    def lines(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)


# -- adversaries

@dataclass(frozen=True)
class AdversarySpec:
    clabel: Label
    size: int = 12
    seed: int = 0


_ATOMS = ("result", "new", "relabel", "read", "write", "exec")
_COMPOUND = ("let", "fork", "limit", "pack")


class _Gen:
    """Random process generator drawing free names from a scope."""

    def __init__(self, rng: random.Random, order: LabelOrder, trusts: Sequence[Label],
                 limits: Sequence[Label], prefix: str):
        self.rng = rng
        self.order = order
        self.trusts = tuple(trusts)
        self.limits = tuple(limits)
        self.prefix = prefix
        self.fresh = 0

    def res(self, scope):
        return self.rng.choice((UNIT,) + tuple(scope))

    def atom(self, scope, expr: bool) -> Process:
        rng = self.rng
        kind = rng.choice(_ATOMS if scope else ("result", "new"))
        trusts = (BOT,) if expr else self.trusts
        if kind == "result":
            return Result(self.res(scope))
        if kind == "new":
            return New(self.res(scope), rng.choice(trusts))
        w = rng.choice(scope)
        if kind == "relabel":
            return Relabel(rng.choice(tuple(self.order.labels())), w)
        if kind == "read":
            return Read(w)
        if kind == "write":
            return Write(w, self.res(scope))
        return Exec(w)

    def proc(self, n: int, scope: tuple, expr: bool = False) -> Process:
        rng = self.rng
        if n <= 1:
            return self.atom(scope, expr)
        kinds = [k for k in _COMPOUND if not (k == "pack" and expr)]
        if n == 2:
            kinds = [k for k in kinds if k in ("limit", "pack")]
        kind = rng.choice(kinds)
        if kind == "limit":
            return Limit(rng.choice(self.limits), self.proc(n - 1, scope))
        if kind == "pack":
            return Pack(self.proc(n - 1, scope, True))
        a = rng.randint(1, n - 2)
        if kind == "fork":
            return Fork(self.proc(a, scope, expr), self.proc(n - 1 - a, scope, expr))
        x = Var(f"{self.prefix}{self.fresh}")
        self.fresh += 1
        return Let(x, self.proc(a, scope, expr), self.proc(n - 1 - a, scope + (x,), expr))


def gen_adversary(spec: AdversarySpec, scope: Iterable[Var], order: LabelOrder) -> Process:
    """A random ``[C] _`` with no trust annotation above C, using names in scope."""
    rng = random.Random(spec.seed)
    c = spec.clabel
    low = [l for l in order.labels() if order.leq(l, c)]
    g = _Gen(rng, order, low, low, "adv")
    n = max(1, min(spec.size, MAX_ADVERSARY))
    if n == 1:
        return Limit(c, Result(UNIT))
    # a spine of short statements, so that most adversaries act on objects
    # rather than only building inert code
    names = tuple(sorted(set(scope), key=str))
    stmts = []
    left = n - 1
    while left > 0:
        k = min(left, rng.randint(1, 6))
        stmts.append(k)
        left -= k
    return Limit(c, _spine(g, rng, stmts, names))


def _spine(g: "_Gen", rng: random.Random, stmts: list, scope: tuple) -> Process:
    k = stmts[0]
    if len(stmts) == 1:
        return g.proc(k, scope)
    rest = stmts[1:]
    rest[0] -= 1            # the let or fork node itself
    if rest[0] == 0:
        rest = rest[1:] or [1]
    head = g.proc(k, scope)
    if rng.random() < 0.5:
        return Fork(head, _spine(g, rng, rest, scope))
    x = Var(f"{g.prefix}{g.fresh}")
    g.fresh += 1
    return Let(x, head, _spine(g, rng, rest, scope + (x,)))


def spine_points(p: Process) -> list:
    """Insertion points along the let bodies and fork continuations of p,
    with the names bound above each point."""
    out = []
    scope: list = []
    path: list = []
    while True:
        out.append((tuple(path), tuple(scope)))
        if isinstance(p, Let):
            scope.append(p.x)
            path.append("body")
            p = p.body
        elif isinstance(p, Fork):
            path.append("cont")
            p = p.cont
        else:
            return out


def insert_at(p: Process, path: Sequence[str], q: Process) -> Process:
    """Replace the subprocess at path by ``fork { q } <it>``."""
    stack = []
    for step_ in path:
        stack.append(p)
        p = p.body if step_ == "body" else p.cont
    p = Fork(q, p)
    for outer, step_ in zip(reversed(stack), reversed(path)):
        p = Let(outer.x, outer.head, p) if step_ == "body" else Fork(outer.child, p)
    return p


def compose(prog: ProgramFile, spec: AdversarySpec) -> Process:
    """prog running alongside a C-adversary placed somewhere on its spine, so
    that the adversary can reach the hypotheses and the names bound above it."""
    points = spine_points(prog.main)
    rng = random.Random(spec.seed ^ 0x5EED)
    path, bound = points[rng.randrange(len(points))]
    scope = [x for x, _ in prog.hypotheses] + list(bound)
    return insert_at(prog.main, path, gen_adversary(spec, scope, prog.order))


def _adv_size(rng: random.Random) -> int:
    return rng.randint(1, MAX_ADVERSARY)


def prop_adversary_completeness(order: LabelOrder, clabels: Iterable[Label],
                                n: int = 1000, seed: int = 0,
                                env: Optional[Mapping[Var, Eff]] = None) -> Report:
    """Every generated C-adversary typechecks despite C."""
    rep = Report("adversary-completeness")
    env = dict(env or {})
    scope = list(env)
    for c in clabels:
        o = order.compromise(c)
        rng = random.Random(seed * 7919 + c)
        for i in range(n):
            spec = AdversarySpec(c, _adv_size(rng), rng.getrandbits(32))
            adv = gen_adversary(spec, scope, order)
            v = typecheck_process(env, adv, o)
            case = f"C={order.name(c)}#{i}"
            if v.accepted:
                rep.add(case, spec.seed, "pass")
            else:
                rep.add(case, spec.seed, "fail", witness={
                    "adversary": print_process(adv, order), "diagnostics": v.diagnostics})
    return rep


# -- well-typed programs

def gen_program(seed: int, order: LabelOrder, statements: int = 8,
                despite: Optional[Label] = None, tries: int = 10_000) -> Process:
    """A random program accepted by checker-algo (rejection sampling).

    The program is a spine of statements (bindings and forks at random
    labels) over a few shared objects, some holding packed code, so runs
    actually read, write, relabel and execute.
    """
    rng = random.Random(seed)
    o = order if despite is None else order.compromise(despite)
    labels = tuple(order.labels())
    for _ in range(tries):
        g = _Gen(rng, order, labels, labels, "x")
        spine: list = []
        scope: tuple = ()
        for i in range(rng.randint(1, 3)):
            x = Var(f"o{i}")
            l = rng.choice(labels)
            spine.append(("let", x, Limit(l, New(UNIT, rng.choice(labels[: l + 1])))))
            scope += (x,)
        for i in range(statements):
            kind = rng.choice(("let", "fork", "code"))
            l = rng.choice(labels)
            if kind == "code":
                c, q = Var(f"c{i}"), Var(f"q{i}")
                spine.append(("let", c, Pack(g.proc(rng.randint(1, 3), scope, True))))
                spine.append(("let", q, Limit(l, New(c, rng.choice(labels[: l + 1])))))
                scope += (c, q)
            elif kind == "let":
                x = Var(f"s{i}")
                spine.append(("let", x, Limit(l, g.proc(rng.randint(1, 3), scope))))
                scope += (x,)
            else:
                spine.append(("fork", Limit(l, g.proc(rng.randint(1, 4), scope))))
        p: Process = Result(UNIT)
        for item in reversed(spine):
            p = Let(item[1], item[2], p) if item[0] == "let" else Fork(item[1], p)
        if typecheck_process({}, p, o).accepted:
            return p
    raise RuntimeError("no well-typed program found")


# -- soundness properties

def _runtime_order(prog: ProgramFile, despite: Optional[Label]) -> LabelOrder:
    return prog.order if despite is None else prog.order.compromise(despite)


def prop_preservation(prog: ProgramFile, steps: int = 100, seeds: Iterable[int] = range(20),
                      despite: Optional[Label] = None, budget: int = DEFAULT_BUDGET,
                      name: str = "program") -> Report:
    """Runtime typing holds after every step of seeded runs."""
    rep = Report("preservation")
    env = prog.env()
    order = _runtime_order(prog, despite)
    memo: dict = {}     # seeds share prefixes; each configuration is checked once

    def failure(c: Config):
        k = c.key()
        if k not in memo:
            memo[k] = runtime_failure(env, c, budget)
        return memo[k]

    for seed in seeds:
        cfg = load_process(order, prog.main, env)
        bad: list = []
        count = [0]

        def check(c: Config):
            count[0] += 1
            if bad:
                return
            fail = failure(c)
            if fail is not None:
                bad.append({"step": count[0], "rule": fail[0], "subject": str(fail[1])})

        fail0 = failure(cfg)
        if fail0 is not None:
            bad.append({"step": 0, "rule": fail0[0], "subject": str(fail0[1])})
        else:
            run(cfg, steps, seed=seed, on_step=check)
        if bad:
            rep.add(name, seed, "fail", witness=bad[0])
        else:
            rep.add(name, seed, "pass", steps=count[0])
    return rep


def monitor_policy(prog: ProgramFile, threshold: Label,
                   watch: Optional[Iterable[str]] = None) -> MonitorPolicy:
    """Watch the named objects, or else every object trusted beyond the
    threshold (hypotheses by type, new objects by trust at creation)."""
    if watch is not None:
        return MonitorPolicy(threshold, frozenset(watch), created=False)
    names = {x.name for x in trusted_objects(prog.hypotheses, threshold, prog.order)}
    return MonitorPolicy(threshold, frozenset(names), created=True)


def prop_strong_dfi(prog: ProgramFile, c: Label, threshold: Label, n_adv: int = 100,
                    depth: int = 12, budget: int = 10 ** 6, seed: int = 0,
                    watch: Optional[Iterable[str]] = None, name: str = "program",
                    stop_at_first: bool = False) -> Report:
    """Explore prog composed with generated C-adversaries and monitor the
    protected objects; results are 'pass' (proved), 'bounded' or 'fail'."""
    if not prog.order.leq(c, threshold):
        raise ValueError("the compromised label must be at most the threshold")
    rep = Report("strong-dfi")
    policy = monitor_policy(prog, threshold, watch)
    mon = make_monitor(policy)
    env = prog.env()
    rng = random.Random(seed)
    for i in range(n_adv):
        spec = AdversarySpec(c, _adv_size(rng), rng.getrandbits(32))
        main = compose(prog, spec) if n_adv else prog.main
        cfg = load_process(prog.order, main, env)
        ex = explore(cfg, depth, mon, budget)
        case = f"{name}+adv{i}"
        if ex.violations:
            v = ex.violations[0]
            rep.add(case, spec.seed, "fail", witness=v.record(prog.order),
                    states=ex.states)
            if stop_at_first:
                break
        else:
            rep.add(case, spec.seed, "pass" if ex.verdict == "proved pass" else "bounded",
                    states=ex.states)
    return rep


def prop_no_adversary(prog: ProgramFile, threshold: Label, depth: int = 12,
                      budget: int = 10 ** 6, watch=None, name: str = "program") -> Report:
    """Explore the program alone (the monitor's sensitivity check)."""
    rep = Report("dfi")
    cfg = load_process(prog.order, prog.main, prog.env())
    ex = explore(cfg, depth, make_monitor(monitor_policy(prog, threshold, watch)), budget)
    if ex.violations:
        rep.add(name, None, "fail", witness=ex.violations[0].record(prog.order))
    else:
        rep.add(name, None, "pass" if ex.verdict == "proved pass" else "bounded",
                states=ex.states)
    return rep


def _exec_events(events: Iterable[Event]) -> list:
    return [e for e in events if e.rule == "execute"]


def prop_exec_redundancy(prog: ProgramFile, c: Label, seeds: Iterable[int] = range(20),
                         steps: int = 200, threshold: Optional[Label] = None,
                         n_adv: int = 0, depth: int = 12, name: str = "program") -> Report:
    """Trusted executions never need lowering, and skipping it changes nothing.

    For each seed, runs the program (with a generated C-adversary when
    ``n_adv`` is positive) with and without the lowering at execution, then
    compares the monitor's verdicts; the exhaustive explorer is compared the
    same way.
    """
    rep = Report("exec-redundancy")
    order = prog.order
    thr = c if threshold is None else threshold
    mon = make_monitor(monitor_policy(prog, thr))
    env = prog.env()
    for seed in seeds:
        main = prog.main
        if n_adv:
            rng = random.Random(seed)
            main = compose(prog, AdversarySpec(c, _adv_size(rng), rng.getrandbits(32)))
        traces = {}
        for opt in (False, True):
            traces[opt] = run(load_process(order, main, env), steps, seed=seed,
                              optimized=opt, monitor=mon)
        trace = traces[False]
        bad = [e for e in _exec_events(trace.events)
               if order.lt(c, e.plabel) and not order.leq(e.plabel, e.details["olabel"])]
        verdicts = {opt: [(str(v.store), str(v.instance)) for v in t.violations]
                    for opt, t in traces.items()}
        case = f"{name}@{seed}"
        if bad:
            e = bad[0]
            rep.add(case, seed, "fail", witness={
                "property": "trusted exec above its object's label",
                "thread": list(e.tid), "plabel": order.name(e.plabel),
                "olabel": order.name(e.details["olabel"])})
        elif verdicts[False] != verdicts[True]:
            rep.add(case, seed, "fail", witness={
                "property": "optimized execution changed the verdict",
                "default": verdicts[False], "optimized": verdicts[True]})
        else:
            rep.add(case, seed, "pass", execs=len(_exec_events(trace.events)))
    # exhaustive comparison over all interleavings up to depth
    ex = {opt: explore(load_process(order, prog.main, env), depth, mon, optimized=opt)
          for opt in (False, True)}
    same = ([(str(v.store), str(v.instance)) for v in ex[False].violations]
            == [(str(v.store), str(v.instance)) for v in ex[True].violations])
    rep.add(f"{name}/explore", None, "pass" if same else "fail",
            witness=None if same else {"default": ex[False].verdict,
                                       "optimized": ex[True].verdict})
    return rep


def gen_expression(rng: random.Random, order: LabelOrder, scope: tuple, n: int) -> Process:
    """A random expression satisfying the packing predicate."""
    g = _Gen(rng, order, (BOT,), tuple(order.labels()), "y")
    while True:
        f = g.proc(n, scope, expr=True)
        if box_pred(f, order):
            return f


def prop_monotonicity(n: int = 500, seed: int = 0, order: Optional[LabelOrder] = None,
                      budget: int = DEFAULT_BUDGET) -> Report:
    """If a packable expression has effect E at P', it has E meet P at each lower P."""
    from .checker_algo import Untypable, infer_process
    rep = Report("monotonicity")
    order = order or LabelOrder(["Low", "Medium", "High"])
    rng = random.Random(seed)
    effs = [Eff(t, e) for t in _hyp_types(order) for e in order.labels()]
    done = 0
    attempts = 0
    while done < n and attempts < 50 * n:
        attempts += 1
        env = {Var(f"h{i}"): rng.choice(effs) for i in range(2)}
        f = gen_expression(rng, order, tuple(env), rng.randint(1, 8))
        top = None
        for p2 in order.descending():
            try:
                t, _ = infer_process(env, p2, f, order)
            except Untypable:
                continue
            if t is not STUCK:
                top = (p2, t)
                break
        if top is None:
            continue
        done += 1
        p2, t = top
        failed = None
        for p in range(p2):
            want = order.meet(t.eff, p)
            try:
                tl, _ = infer_process(env, p, f, order)
            except Untypable as exc:
                failed = {"P": order.name(p), "reason": exc.message}
                break
            if tl is not STUCK and not order.eq(tl.eff, want):
                failed = {"P": order.name(p), "effect": show(tl, order),
                          "expected": order.name(want)}
                break
            try:
                if not derivable(env, p, f, order, budget):
                    failed = {"P": order.name(p), "reason": "no declarative derivation"}
                    break
            except BudgetExhausted:
                pass
        case = print_process(f, order).replace("\n", " ")
        if failed:
            failed.update({"P'": order.name(p2), "type": show(t, order)})
            rep.add(case, seed, "fail", witness=failed)
        else:
            rep.add(case, seed, "pass", top=order.name(p2))
    return rep


def _hyp_types(order: LabelOrder) -> list:
    from .corpus import hypothesis_types
    return hypothesis_types(order)


# -- oracle agreement

def oracle_agreement(max_nodes: int = 9, exhaustive_nodes: int = 3,
                     samples: int = 20_000, seed: int = 0,
                     budget: int = DEFAULT_BUDGET, order: Optional[LabelOrder] = None,
                     max_hyps: int = 2, envs: Optional[list] = None) -> Report:
    """Compare checker-algo against checker-decl on the small corpus.

    Every program of at most ``exhaustive_nodes`` nodes is checked in every
    environment of ``envs`` (all environments of up to ``max_hyps``
    hypotheses by default); beyond that, ``samples`` programs are drawn
    uniformly from the exact enumeration at each size up to ``max_nodes``,
    each in a uniformly drawn environment.
    """
    rep = Report("oracle")
    order = order or small_order()
    envs = envs if envs is not None else list(hypothesis_envs(order, max_hyps))
    rng = random.Random(seed)

    def one(env, p, case):
        try:
            d = derivable(dict(env), order.top, p, order, budget)
        except BudgetExhausted:
            rep.add(case, seed, "exhausted")
            return
        a = typecheck_process(dict(env), p, order).accepted
        if a == d:
            rep.add(case, seed, "agree", typable=d)
        else:
            rep.add(case, seed, "fail", witness={
                "program": print_process(p, order).replace("\n", " "),
                "env": {str(x): show(t, order) for x, t in env},
                "algo": a, "decl": d})

    grammars: dict = {}

    def grammar(env):
        k = len(env)
        if k not in grammars:
            grammars[k] = Grammar(order, [Var(f"h{i}") for i in range(k)])
        return grammars[k]

    for env in envs:
        g = grammar(env)
        for n in range(1, exhaustive_nodes + 1):
            for i in range(g.count(n)):
                one(env, g.unrank(n, i), f"n{n}/{len(env)}h/{i}")
    sizes = list(range(exhaustive_nodes + 1, max_nodes + 1))
    if sizes:
        for j in range(samples):
            env = envs[rng.randrange(len(envs))]
            n = sizes[j % len(sizes)]
            g = grammar(env)
            i = rng.randrange(g.count(n))
            one(env, g.unrank(n, i), f"n{n}/{len(env)}h/{i}")
    return rep


# -- complexity

def synth_program(n: int, order: LabelOrder) -> Process:
    """A well-typed program of roughly n nodes: a deep let spine of blocks
    that create, share, pack and run code at every label."""
    labels = [l for l in order.labels() if l != BOT]
    top = order.top
    blocks = []
    i = 0
    used = 0
    while used < n:
        l = labels[i % len(labels)]
        o, c, q, y, z = (Var(f"{s}{i}") for s in "ocqyz")
        block = [("let", o, Limit(l, New(UNIT, l))),
                 ("fork", Limit(l, Let(y, Read(o), Write(o, y)))),
                 ("let", c, Pack(Let(z, Read(o), Result(UNIT)))),
                 ("let", q, New(c, BOT)),
                 ("fork", Limit(BOT, Exec(q))),
                 ("fork", Limit(l, Fork(Relabel(l, o), Result(UNIT))))]
        blocks += block
        used += sum(1 + size(b[-1]) for b in block)
        i += 1
    p: Process = Result(UNIT)
    for b in reversed(blocks):
        p = Let(b[1], b[2], p) if b[0] == "let" else Fork(b[1], p)
    return p


def bench_scaling(sizes: Sequence[int] = (1000, 10_000, 100_000), labels: int = 4,
                  repeat: int = 1) -> dict:
    """Time checker-algo on synthesized programs and fit time ~ size^k."""
    order = LabelOrder([f"L{i}" for i in range(1, labels + 1)])
    rows = []
    for n in sizes:
        p = synth_program(n, order)
        nodes = size(p)
        best = math.inf
        for _ in range(repeat):
            t0 = time.perf_counter()
            v = typecheck_process({}, p, order)
            best = min(best, time.perf_counter() - t0)
            if not v.accepted:
                raise AssertionError(f"synthesized program rejected: {v.diagnostics}")
        rows.append({"size": nodes, "seconds": best})
    exponent = None
    if len(rows) >= 2:
        xs = [math.log(r["size"]) for r in rows]
        ys = [math.log(max(r["seconds"], 1e-9)) for r in rows]
        exponent = statistics.linear_regression(xs, ys).slope
    return {"labels": labels, "rows": rows, "exponent": exponent}
