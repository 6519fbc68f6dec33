"""Reference checker: bounded proof search over the declarative typing rules.

Every rule is a generator of derivable approximations.  Choices that the
rules leave open (types assumed for hypotheses at ``bot``, run labels of
packed code, shapes chosen for stuck verdicts) are represented by unbound
type and label variables, bound by unification and enumerated on demand.
Bindings live on a trail and are undone on backtracking, so a generator
yields with its bindings in force and retracts them when resumed.

This module favours fidelity over speed; ``checker_algo`` is the fast one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping

from .labels import BOT, Label, LabelOrder
from .machine import Config, Thread
from .syntax import (UNIT, Exec, Fork, Let, Limit, New, ObjectInit, Pack,
                     Process, Read, Relabel, Result, Var, Write, box_pred)
from .types import (STUCK, UNIT_T, Bin, Eff, LVar, Obj, TVar, Unifier, show)


class BudgetExhausted(Exception):
    """The search ran out of steps before finding or refuting a derivation."""


DEFAULT_BUDGET = 200_000


class Search:
    def __init__(self, order: LabelOrder, budget: int = DEFAULT_BUDGET):
        self.order = order
        self.u = Unifier(order)
        self.budget = budget
        self.steps = 0
        self.classes = order.classes()

    def tick(self) -> None:
        self.steps += 1
        if self.steps > self.budget:
            raise BudgetExhausted(f"search budget of {self.budget} steps exhausted")

    # -- small generators over the unifier

    def force(self, l) -> Iterator[Label]:
        """Enumerate concrete values of a label (one per equivalence class)."""
        u = self.u
        l = u.walk(l)
        if not isinstance(l, LVar):
            yield l
            return
        for c in self.classes:
            m = u.mark()
            u.bind(l, c)
            yield c
            u.undo(m)

    def obj(self, ty) -> Iterator[Eff]:
        u = self.u
        ty = u.walk(ty)
        if isinstance(ty, Obj):
            yield ty.inner
        elif isinstance(ty, TVar):
            m = u.mark()
            inner = Eff(TVar(), LVar())
            u.bind(ty, Obj(inner))
            yield inner
            u.undo(m)

    def nonobj(self, ty) -> Iterator[None]:
        u = self.u
        ty = u.walk(ty)
        if isinstance(ty, TVar):
            for shape in (UNIT_T, Bin(LVar(), Eff(TVar(), LVar()))):
                m = u.mark()
                u.bind(ty, shape)
                yield None
                u.undo(m)
        elif not isinstance(ty, Obj):
            yield None

    def bin(self, ty) -> Iterator[Bin]:
        u = self.u
        ty = u.walk(ty)
        if isinstance(ty, Bin):
            yield ty
        elif isinstance(ty, TVar):
            m = u.mark()
            b = Bin(LVar(), Eff(TVar(), LVar()))
            u.bind(ty, b)
            yield b
            u.undo(m)

    def nonbin(self, ty) -> Iterator[None]:
        u = self.u
        ty = u.walk(ty)
        if isinstance(ty, TVar):
            for shape in (UNIT_T, Obj(Eff(TVar(), LVar()))):
                m = u.mark()
                u.bind(ty, shape)
                yield None
                u.undo(m)
        elif not isinstance(ty, Bin):
            yield None

    def unify(self, a, b) -> Iterator[None]:
        u = self.u
        m = u.mark()
        if u.unify(a, b):
            yield None
        u.undo(m)

    # -- hypotheses

    def hyp(self, env: Mapping, x: Var) -> Iterator[tuple]:
        """The hypothesis for x as (type, effect); at bot the type is free."""
        t = env[x]
        for e in self.force(t.eff):
            if self.order.star(e):
                yield t.ty, e
            else:
                yield TVar(), e

    def content(self, inner: Eff) -> Iterator[tuple]:
        """Content (type, trust) of an object type; at trust bot the type is free."""
        for s in self.force(inner.eff):
            yield (inner.ty if self.order.star(s) else TVar()), s

    def value(self, env: Mapping, p: Label, r) -> Iterator[Eff]:
        if r is UNIT:
            yield Eff(UNIT_T, p)
            return
        order = self.order
        for ty, e in self.hyp(env, r):
            yield Eff(ty, order.meet(e, p))

    # -- processes

    def proc(self, env: Mapping, p: Label, a: Process) -> Iterator:
        """All approximations T with env |-_p a : T (STUCK stands for every T)."""
        self.tick()
        m = self.u.mark()
        for t in self._proc(env, p, a):
            final = t is STUCK and self.u.mark() == m
            yield t
            if final:
                # an unconditional stuck verdict subsumes every other answer
                return

    def _proc(self, env, p, a):
        order = self.order
        star = order.star
        if isinstance(a, Result):
            yield from self.value(env, p, a.r)
        elif isinstance(a, Let):
            for t1 in self.proc(env, p, a.head):
                if t1 is STUCK:
                    yield STUCK
                    continue
                env2 = dict(env)
                env2[a.x] = t1
                yield from self.proc(env2, p, a.body)
        elif isinstance(a, Fork):
            m = self.u.mark()
            for _ in self.proc(env, p, a.child):
                clean = self.u.mark() == m
                yield from self.proc(env, p, a.cont)
                if clean:
                    return
        elif isinstance(a, Limit):
            if order.lt(p, a.p):
                yield STUCK
                return
            yield from self.proc(env, a.p, a.body)
        elif isinstance(a, New):
            for v in self.value(env, p, a.init):
                for e in self.force(v.eff):
                    if order.leq(a.trust, e):
                        yield Eff(Obj(Eff(v.ty, a.trust)), p)
        elif isinstance(a, Pack):
            if not box_pred(a.body, order):
                return
            for p2 in reversed(self.classes):
                for t in self.proc(env, p2, a.body):
                    inner = Eff(TVar(), LVar()) if t is STUCK else t
                    yield Eff(Bin(p2, inner), p)
        elif isinstance(a, Relabel):
            for ty, e in self.hyp(env, a.target):
                if star(e):
                    for _ in self.nonobj(ty):
                        yield STUCK                                   # bogus stuck-I
                    for inner in self.obj(ty):
                        for s in self.force(inner.eff):
                            if order.lt(p, order.join(s, a.o)):
                                yield STUCK                           # un/protect stuck
                if star(p) and not star(e):
                    continue
                for inner in self.obj(ty):
                    for s in self.force(inner.eff):
                        if order.leq(s, a.o):
                            yield Eff(UNIT_T, p)
        elif isinstance(a, Read):
            for ty, e in self.hyp(env, a.target):
                if star(e):
                    for _ in self.nonobj(ty):
                        yield STUCK
                for inner in self.obj(ty):
                    for tc, s in self.content(inner):
                        if star(order.meet(p, s)) and not star(e):
                            continue
                        yield Eff(tc, order.meet(s, p))
        elif isinstance(a, Write):
            for ty, e in self.hyp(env, a.target):
                if star(e):
                    for _ in self.nonobj(ty):
                        yield STUCK
                    for inner in self.obj(ty):
                        for s in self.force(inner.eff):
                            if order.lt(p, s):
                                yield STUCK                           # write stuck
                if star(p) and not star(e):
                    continue
                for inner in self.obj(ty):
                    for tc, s in self.content(inner):
                        for v in self.value(env, p, a.value):
                            for _ in self.unify(tc, v.ty):
                                for e2 in self.force(v.eff):
                                    if order.leq(s, e2):
                                        yield Eff(UNIT_T, p)
        elif isinstance(a, Exec):
            for ty, e in self.hyp(env, a.target):
                if star(e):
                    for _ in self.nonobj(ty):
                        yield STUCK
                    for inner in self.obj(ty):
                        for s in self.force(inner.eff):
                            if star(s):
                                for _ in self.nonbin(inner.ty):
                                    yield STUCK                       # bogus stuck-II
                if star(p) and not star(e):
                    continue
                for inner in self.obj(ty):
                    for tc, s in self.content(inner):
                        for b in self.bin(tc):
                            for run in self.force(b.run):
                                if not order.leq(p, order.meet(run, s)):
                                    continue
                                res = b.inner
                                if not star(p):
                                    yield Eff(res.ty, BOT)
                                    continue
                                for e2 in self.force(res.eff):
                                    yield Eff(res.ty, order.meet(e2, p))
        else:
            raise TypeError(f"no typing rule for {type(a).__name__}")

    # -- runtime configurations

    def entry(self, env: Mapping, mu, src: Label) -> Iterator[Eff]:
        """Type a substituted value at the label recorded with it."""
        if isinstance(mu, ObjectInit):
            yield from self.proc(env, src, New(mu.init, mu.trust))
        elif isinstance(mu, Pack):
            for t in self.proc(env, src, mu):
                if t is not STUCK:
                    yield t
        else:
            yield from self.value(env, src, mu)

    def store(self, env: Mapping, w: Var, olabel: Label, x: Var) -> Iterator[None]:
        order = self.order
        for ty, _ in self.hyp(env, w):
            for inner in self.obj(ty):
                for tc, s in self.content(inner):
                    for tx, ex in self.hyp(env, x):
                        for _ in self.unify(tc, tx):
                            if order.leq(s, order.meet(olabel, ex)):
                                yield None

    def configuration(self, env: Mapping, cfg: Config) -> Iterator[dict]:
        items = [("sigma", x, mu, src) for x, (mu, src) in cfg.sigma.items()]
        items += [("store", w, o, c) for w, (o, c) in cfg.stores.items()]
        items += [("thread", tid, th, None) for tid, th in sorted(cfg.threads.items())]
        yield from self._items(items, 0, dict(env))

    def _items(self, items, i, env):
        self.tick()
        if i == len(items):
            yield env
            return
        kind, a, b, c = items[i]
        if kind == "sigma":
            for t in self.entry(env, b, c):
                if t is STUCK:
                    continue
                env2 = dict(env)
                env2[a] = t
                yield from self._items(items, i + 1, env2)
        elif kind == "store":
            for _ in self.store(env, a, b, c):
                yield from self._items(items, i + 1, env)
        else:
            for _ in self.proc(env, self.order.top, thread_process(b)):
                yield from self._items(items, i + 1, env)


def thread_process(th: Thread) -> Process:
    """Rebuild the process a thread stands for, wrapped so it types at the top."""
    proc = th.redex
    cur = th.plabel
    for fr in reversed(th.frames):
        if cur != fr.resume:
            proc = Limit(cur, proc)
        proc = Let(fr.x, proc, fr.cont)
        cur = fr.resume
    if cur != th.root:
        proc = Limit(cur, proc)
    return Limit(th.root, proc)


# -- public interface

@dataclass
class DeclResult:
    types: list = field(default_factory=list)   # rendered approximations
    exhausted: bool = False
    steps: int = 0

    @property
    def typable(self) -> bool:
        return bool(self.types)


def check_decl(env: Mapping[Var, Eff], plabel: Label, p: Process, order: LabelOrder,
               budget: int = DEFAULT_BUDGET, limit: int = 16) -> DeclResult:
    """Derivable approximations of p (up to ``limit`` distinct ones).

    The result lists rendered types; 'Stuck' means every approximation.
    """
    s = Search(order, budget)
    out: list[str] = []
    res = DeclResult()
    try:
        for t in s.proc(env, plabel, p):
            text = show(t, order)
            if text not in out:
                out.append(text)
                if t is STUCK or len(out) >= limit:
                    break
    except BudgetExhausted:
        res.exhausted = True
    res.types = out
    res.steps = s.steps
    return res


def derivable(env: Mapping[Var, Eff], plabel: Label, p: Process, order: LabelOrder,
              budget: int = DEFAULT_BUDGET) -> bool:
    """Whether some T is derivable.  Raises BudgetExhausted when undecided."""
    s = Search(order, budget)
    for _ in s.proc(env, plabel, p):
        return True
    return False


def check_despite(env: Mapping[Var, Eff], p: Process, c: Label, order: LabelOrder,
                  budget: int = DEFAULT_BUDGET) -> bool:
    o = order.compromise(c)
    return derivable(env, o.top, p, o, budget)


def check_runtime(env: Mapping[Var, Eff], cfg: Config,
                  budget: int = DEFAULT_BUDGET) -> bool:
    """Whether some extension of env types sigma, every store and every thread."""
    s = Search(cfg.order, budget)
    for _ in s.configuration(env, cfg):
        return True
    return False


def runtime_failure(env: Mapping[Var, Eff], cfg: Config,
                    budget: int = DEFAULT_BUDGET):
    """None if check_runtime holds, else (rule, subject) for the first item
    (in checking order) that cannot be added to a consistent typing."""
    s = Search(cfg.order, budget)
    items = [("sigma", x, mu, src) for x, (mu, src) in cfg.sigma.items()]
    items += [("store", w, o, c) for w, (o, c) in cfg.stores.items()]
    items += [("thread", tid, th, None) for tid, th in sorted(cfg.threads.items())]
    rules = {"sigma": "substitute", "store": "store", "thread": "process"}
    for k in range(len(items) + 1):
        s.steps = 0
        if not any(True for _ in s._items(items[:k], 0, dict(env))):
            kind, subject = items[k - 1][0], items[k - 1][1]
            return rules[kind], subject
    return None
