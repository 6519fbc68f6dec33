"""Operational semantics: a normalized configuration, a stepper, and explorers.

Structural congruence is compiled away: forks become a thread soup, explicit
substitutions become one append-only environment ``sigma`` and stores live in
a global table.  Fresh names are ``Var(name, tid + (n,))`` where ``tid``
identifies the creating thread and ``n`` counts that thread's creations, so a
name never depends on how threads were interleaved.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional

from .labels import Label, LabelOrder
from .parser import ProgramFile
from .syntax import (UNIT, Exec, Fork, Let, Limit, New, ObjectInit, Pack,
                     Process, Read, Relabel, Result, SubstValue, Var, Write,
                     free_vars, rename)


@dataclass(frozen=True, slots=True)
class Frame:
    x: Var
    cont: Process
    resume: Label


@dataclass(frozen=True, slots=True)
class Thread:
    tid: tuple
    plabel: Label
    frames: tuple
    redex: Process
    root: Label
    n: int = 0        # fresh names created so far
    spawned: int = 0  # children forked so far

    def fresh(self, name: str) -> tuple[Var, "Thread"]:
        return Var(name, self.tid + (self.n,)), replace(self, n=self.n + 1)


@dataclass(frozen=True, slots=True)
class Event:
    rule: str
    tid: tuple
    plabel: Label
    details: dict = field(default_factory=dict, compare=False, hash=False)


@dataclass(frozen=True, slots=True)
class WriteEvent:
    """A store received content (``kind`` is 'write' or 'create'), or a new
    name was bound to it (``kind`` 'link')."""
    store: Var
    content: Var
    tid: tuple
    plabel: Label
    kind: str


@dataclass(frozen=True, slots=True)
class Next:
    cfg: "Config"
    events: tuple


@dataclass(frozen=True, slots=True)
class Blocked:
    reason: str
    detail: str = ""


@dataclass(frozen=True, slots=True)
class Terminal:
    pass


TERMINAL = Terminal()

GLOBAL = (Read, Write, Relabel, Exec)


class Config:
    """sigma: Var -> (mu, src); stores: Var -> (olabel, content); threads by tid."""

    __slots__ = ("order", "sigma", "stores", "threads", "hyps", "_key")

    def __init__(self, order: LabelOrder, sigma: dict, stores: dict, threads: dict,
                 hyps: frozenset = frozenset()):
        self.order = order
        self.sigma = sigma
        self.stores = stores
        self.threads = threads
        self.hyps = hyps
        self._key = None

    def key(self):
        if self._key is None:
            self._key = (frozenset(self.sigma.items()), frozenset(self.stores.items()),
                         frozenset(self.threads.values()))
        return self._key

    def with_(self, sigma=None, stores=None, threads=None) -> "Config":
        return Config(self.order,
                      self.sigma if sigma is None else sigma,
                      self.stores if stores is None else stores,
                      self.threads if threads is None else threads,
                      self.hyps)

    def __repr__(self) -> str:
        return (f"Config(sigma={len(self.sigma)}, stores={len(self.stores)}, "
                f"threads={len(self.threads)})")


def load(pf: ProgramFile) -> Config:
    top = pf.order.top
    root = Thread((0,), top, (), pf.main, top)
    return Config(pf.order, {}, {}, {root.tid: root},
                  frozenset(x for x, _ in pf.hypotheses))


def load_process(order: LabelOrder, main: Process, hyps: Iterable[Var] = ()) -> Config:
    top = order.top
    root = Thread((0,), top, (), main, top)
    return Config(order, {}, {}, {root.tid: root}, frozenset(hyps))


# -- sigma queries

def chain(sigma: dict, x) -> list:
    """x followed by the values it is an instance of (variable entries are unfolded)."""
    out = [x]
    seen = {x}
    while isinstance(x, Var) and x in sigma:
        x = sigma[x][0]
        if x in seen:
            break
        seen.add(x)
        out.append(x)
    return out


def sigma_values(sigma: dict, x: Var) -> set:
    return set(chain(sigma, x))


def same_object(sigma: dict, w1: Var, w2: Var) -> bool:
    return not sigma_values(sigma, w1).isdisjoint(sigma_values(sigma, w2))


def resolve_store(cfg: Config, w: Var) -> list[Var]:
    """Stores that w may denote.  Chains are linear, so at most one matches."""
    stores = cfg.stores
    found = [v for v in chain(cfg.sigma, w) if isinstance(v, Var) and v in stores]
    if found:
        return found[:1]
    # fall back to the general definition (never needed for machine-built sigma)
    vals = sigma_values(cfg.sigma, w)
    return [s for s in stores if not vals.isdisjoint(sigma_values(cfg.sigma, s))]


def packs_of(sigma: dict, x: Var) -> list[Pack]:
    return [v for v in chain(sigma, x) if isinstance(v, Pack)]


# -- stepping

def is_global(p: Process) -> bool:
    return isinstance(p, GLOBAL)


def _bind_value(sigma: dict, th: Thread, x: Var, u) -> tuple[Thread, Var]:
    """Record u under a fresh instance of x at the thread's label."""
    if isinstance(u, Result):
        u = u.r
    elif isinstance(u, Pack):
        fvs = sorted(free_vars(u), key=str)
        ren = {}
        for y in fvs:
            z, th = th.fresh(y.name)
            sigma[z] = (y, th.plabel)
            ren[y] = z
        u = rename(u, ren)
    x2, th = th.fresh(x.name)
    sigma[x2] = (u, th.plabel)
    return th, x2


def _store_content(sigma: dict, th: Thread, r) -> tuple[Thread, Var]:
    if isinstance(r, Var):
        return th, r
    u, th = th.fresh("u")
    sigma[u] = (UNIT, th.plabel)
    return th, u


def step(cfg: Config, tid: tuple, optimized: bool = False, pick: int = 0):
    """One reduction of thread ``tid``: Next, Blocked or Terminal."""
    th = cfg.threads[tid]
    p = th.redex
    order = cfg.order
    ev = []

    def done(th2: Thread, sigma=None, stores=None, extra: Optional[dict] = None):
        threads = dict(cfg.threads)
        threads[tid] = th2
        if extra:
            threads.update(extra)
        return Next(cfg.with_(sigma=sigma, stores=stores, threads=threads), tuple(ev))

    if isinstance(p, (Result, Pack)):
        if not th.frames:
            return TERMINAL
        fr = th.frames[-1]
        sigma = dict(cfg.sigma)
        th2, x2 = _bind_value(sigma, th, fr.x, p)
        cont = rename(fr.cont, {fr.x: x2})
        ev.append(Event("evaluate", tid, th.plabel, {"x": x2}))
        for v in chain(sigma, x2):
            if isinstance(v, Var) and v in cfg.stores:
                # a new name for an existing object: monitors see its content again
                ev.append(WriteEvent(v, cfg.stores[v][1], tid, th.plabel, "link"))
                break
        return done(replace(th2, frames=th.frames[:-1], plabel=fr.resume, redex=cont),
                    sigma=sigma)

    if isinstance(p, Let):
        fr = Frame(p.x, p.body, th.plabel)
        return done(replace(th, frames=th.frames + (fr,), redex=p.head))

    if isinstance(p, Fork):
        ctid = th.tid + (th.spawned,)
        child = Thread(ctid, th.plabel, (), p.child, th.plabel)
        ev.append(Event("fork", tid, th.plabel, {"child": ctid}))
        return done(replace(th, spawned=th.spawned + 1, redex=p.cont), extra={ctid: child})

    if isinstance(p, Limit):
        if not order.leq(p.p, th.plabel):
            return Blocked("EscalationDenied", f"{order.name(p.p)} above {order.name(th.plabel)}")
        ev.append(Event("limit", tid, p.p, {}))
        return done(replace(th, plabel=p.p, redex=p.body))

    if isinstance(p, New):
        sigma = dict(cfg.sigma)
        stores = dict(cfg.stores)
        w, th2 = th.fresh("o")
        sigma[w] = (ObjectInit(p.init, p.trust, w), th.plabel)
        th2, content = _store_content(sigma, th2, p.init)
        stores[w] = (th.plabel, content)
        ev.append(Event("new", tid, th.plabel, {"store": w, "trust": p.trust}))
        ev.append(WriteEvent(w, content, tid, th.plabel, "create"))
        return done(replace(th2, redex=Result(w)), sigma=sigma, stores=stores)

    if isinstance(p, (Read, Write, Relabel, Exec)):
        found = resolve_store(cfg, p.target)
        if not found:
            return Blocked("NoSuchObject", str(p.target))
        w = found[pick if pick < len(found) else 0]
        olabel, content = cfg.stores[w]
        if isinstance(p, Read):
            ev.append(Event("read", tid, th.plabel, {"store": w, "content": content}))
            return done(replace(th, redex=Result(content)))
        if isinstance(p, Write):
            if not order.leq(olabel, th.plabel):
                return Blocked("AccessDenied", f"write {w}")
            sigma = dict(cfg.sigma)
            th2, new = _store_content(sigma, th, p.value)
            stores = dict(cfg.stores)
            stores[w] = (olabel, new)
            ev.append(Event("write", tid, th.plabel, {"store": w, "content": new}))
            ev.append(WriteEvent(w, new, tid, th.plabel, "write"))
            return done(replace(th2, redex=Result(UNIT)), sigma=sigma, stores=stores)
        if isinstance(p, Relabel):
            if not order.leq(order.join(olabel, p.o), th.plabel):
                return Blocked("AccessDenied", f"relabel {w}")
            stores = dict(cfg.stores)
            stores[w] = (p.o, content)
            ev.append(Event("relabel", tid, th.plabel, {"store": w, "olabel": p.o}))
            return done(replace(th, redex=Result(UNIT)), stores=stores)
        packs = packs_of(cfg.sigma, content)
        if not packs:
            return Blocked("NotExecutable", str(w))
        body = packs[0].body
        lowered = th.plabel if optimized else order.meet(th.plabel, olabel)
        ev.append(Event("execute", tid, th.plabel,
                        {"store": w, "olabel": olabel, "runs_at": lowered}))
        return done(replace(th, plabel=lowered, redex=body))

    raise TypeError(f"cannot reduce {p!r}")


def thread_status(cfg: Config, tid: tuple, optimized: bool = False):
    return step(cfg, tid, optimized)


# -- runs

@dataclass
class Trace:
    events: list
    end: str
    cfg: Config
    violations: list = field(default_factory=list)
    steps: int = 0


Monitor = Callable[[WriteEvent, Config], Optional[object]]


def run(cfg: Config, max_steps: int = 200, seed: Optional[int] = 0,
        scheduler: str = "random", optimized: bool = False,
        monitor: Optional[Monitor] = None,
        on_step: Optional[Callable[[Config], None]] = None) -> Trace:
    """Run one interleaving.

    Schedulers: 'random' gives each thread a seeded random priority and always
    runs the most urgent runnable thread, so long uninterrupted stretches
    (and hence ordering races) are likely; 'uniform' picks a runnable thread
    uniformly at every step; 'round-robin' cycles deterministically.
    """
    if scheduler not in ("random", "uniform", "round-robin"):
        raise ValueError(f"unknown scheduler {scheduler!r}")
    rng = random.Random(seed)
    prio: dict = {}
    events: list = []
    violations: list = []
    reported: set = set()
    rr = 0
    steps = 0
    while True:
        runnable = []
        for tid in sorted(cfg.threads):
            out = step(cfg, tid, optimized)
            if isinstance(out, Next):
                runnable.append((tid, out))
            elif isinstance(out, Blocked):
                key = (tid, cfg.threads[tid].redex, out.reason)
                if key not in reported:
                    reported.add(key)
                    events.append(Event("blocked", tid, cfg.threads[tid].plabel,
                                        {"reason": out.reason, "detail": out.detail}))
        if not runnable:
            blocked = any(not isinstance(step(cfg, t, optimized), Terminal)
                          for t in cfg.threads)
            return Trace(events, "AllBlocked" if blocked else "Terminal", cfg,
                         violations, steps)
        if steps >= max_steps:
            return Trace(events, "StepLimit", cfg, violations, steps)
        if scheduler == "round-robin":
            tid, out = runnable[rr % len(runnable)]
            rr += 1
        elif scheduler == "uniform":
            tid, out = runnable[rng.randrange(len(runnable))]
        else:
            for t, _ in runnable:
                if t not in prio:
                    prio[t] = rng.random()
            tid, out = max(runnable, key=lambda r: prio[r[0]])
        cfg = out.cfg
        steps += 1
        for e in out.events:
            if isinstance(e, WriteEvent):
                if monitor is not None:
                    v = monitor(e, cfg)
                    if v is not None:
                        violations.append(v)
                        events.append(Event("violation", e.tid, e.plabel, {"violation": v}))
            else:
                events.append(e)
        if on_step is not None:
            on_step(cfg)


# -- exhaustive exploration

def fuse(cfg: Config, optimized: bool = False):
    """Run every thread through its thread-local steps (let, fork, limit, new, pops).

    These commute with everything else, so exploration only branches on
    store accesses.  Returns the new configuration and the write events seen.
    """
    writes = []
    changed = True
    while changed:
        changed = False
        for tid in list(cfg.threads):
            while True:
                if is_global(cfg.threads[tid].redex):
                    break
                out = step(cfg, tid, optimized)
                if not isinstance(out, Next):
                    break
                cfg = out.cfg
                changed = True
                writes.extend((e, cfg) for e in out.events if isinstance(e, WriteEvent))
    return cfg, writes


@dataclass
class Exploration:
    states: int
    violations: list
    depth_reached: int
    exhausted: bool    # state budget hit
    closed: bool       # no new states at the last level: the bound was not binding

    @property
    def verdict(self) -> str:
        if self.violations:
            return "violation"
        if self.exhausted:
            return "budget exhausted"
        return "proved pass" if self.closed else "bounded pass"


def explore(cfg: Config, depth: int = 12, monitor: Optional[Monitor] = None,
            budget: int = 10 ** 6, optimized: bool = False, fused: bool = True,
            stop_at_first: bool = False, keep_states: bool = False) -> Exploration:
    """Breadth-first closure up to ``depth`` store accesses (or raw steps when
    ``fused`` is False), deduplicating equal configurations."""
    violations: list = []
    vkeys: set = set()

    def record(writes):
        if monitor is None:
            return
        for e, c in writes:
            v = monitor(e, c)
            if v is not None:
                k = (e.store, e.content)
                if k not in vkeys:
                    vkeys.add(k)
                    violations.append(v)

    if fused:
        start, w = fuse(cfg, optimized)
        record(w)
    else:
        start = cfg
    seen = {start.key()}
    states = [start] if keep_states else None
    frontier = [start]
    level = 0
    exhausted = False
    while frontier and level < depth:
        nxt = []
        for s in frontier:
            for tid in sorted(s.threads):
                th = s.threads[tid]
                if fused and not is_global(th.redex):
                    continue
                npick = max(1, len(resolve_store(s, th.redex.target))) if is_global(th.redex) else 1
                for pick in range(npick):
                    out = step(s, tid, optimized, pick)
                    if not isinstance(out, Next):
                        continue
                    c = out.cfg
                    writes = [(e, c) for e in out.events if isinstance(e, WriteEvent)]
                    if fused:
                        c, w2 = fuse(c, optimized)
                        writes += w2
                    record(writes)
                    k = c.key()
                    if k in seen:
                        continue
                    seen.add(k)
                    if keep_states:
                        states.append(c)
                    nxt.append(c)
                    if len(seen) >= budget:
                        exhausted = True
                        break
                if exhausted:
                    break
            if exhausted or (stop_at_first and violations):
                break
        frontier = nxt
        level += 1
        if exhausted or (stop_at_first and violations):
            break
    result = Exploration(len(seen), violations, level, exhausted, not frontier)
    if keep_states:
        result.states_list = states  # type: ignore[attr-defined]
    return result
