"""Constraint-based typechecking with an unknown label for packed code.

Processes are checked at a known label in one deterministic pass.  Packed
code is checked once per label class; the results form the family of a
type variable ``chi`` standing for the code's type.  The family is resolved
lazily: executing the code picks a member that may run at the executing
label, equating it with a known binary type picks that run label, and
equating two families intersects them.  Members that were not demanded are
resolved at the end, highest label first.

Stuck verdicts are preferred whenever a stuck rule applies, since a stuck
process may be given any type.  Hypotheses whose effect (or, for objects,
whose content trust) is bot are flexible: every use sees fresh types.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

from .labels import BOT, Label, LabelOrder
from .parser import ProgramFile
from .syntax import (UNIT, Exec, Fork, Let, Limit, New, Pack, Process, Read,
                     Relabel, Result, Var, Write, box_pred)
from .types import (STUCK, UNIT_T, Bin, Eff, LVar, Obj, TVar, Unifier, UnitT,
                    show, show_label)


class Untypable(Exception):
    def __init__(self, rule: str, node: Optional[Process], message: str):
        super().__init__(message)
        self.rule = rule
        self.node = node
        self.message = message


# -- packed-code families

@dataclass
class Member:
    """The result of checking packed code at one label."""
    stuck: bool
    ty: Optional[Eff]          # for core members
    log: list                  # bindings made while checking: (var, value)
    subs: list = field(default_factory=list)


class Chi(TVar):
    """Type of packed code whose run label is not chosen yet.

    ``alts`` maps a label class to the members that must all hold there
    (several when families were equated).
    """
    __slots__ = ("alts", "node")

    def __init__(self, alts: dict, node=None):
        super().__init__()
        self.alts = alts
        self.node = node

    def __repr__(self) -> str:
        return f"chi{self.id}"


# -- label constraints for expression mode

class Q:
    """The unknown process label of packed code."""
    __slots__ = ()

    def __repr__(self) -> str:
        return "?"


QMARK = Q()
LabelTerm = Union[Label, Q]


@dataclass(frozen=True)
class Atom:
    lo: LabelTerm
    hi: LabelTerm


@dataclass(frozen=True)
class And:
    parts: tuple


@dataclass(frozen=True)
class Or:
    parts: tuple


TRUE = And(())
FALSE = Or(())


def holds(formula, order: LabelOrder, q: Label) -> bool:
    if isinstance(formula, Atom):
        lo = q if formula.lo is QMARK else formula.lo
        hi = q if formula.hi is QMARK else formula.hi
        return order.leq(lo, hi)
    if isinstance(formula, And):
        return all(holds(p, order, q) for p in formula.parts)
    if isinstance(formula, Or):
        return any(holds(p, order, q) for p in formula.parts)
    if isinstance(formula, bool):
        return formula
    raise TypeError(f"not a label constraint: {formula!r}")


@dataclass
class ConstraintSet:
    subs: list = field(default_factory=list)   # (lhs, rhs) subtype constraints
    labelc: object = TRUE


def models(cs: ConstraintSet, order: LabelOrder) -> Optional[Label]:
    """The greatest label satisfying the label constraint, scanning downwards."""
    for l in order.descending():
        if holds(cs.labelc, order, l):
            return l
    return None


# -- satisfiability of subtype constraints

@dataclass
class Sat:
    ok: bool
    chain: list = field(default_factory=list)
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


def _bin_key(t, order: LabelOrder):
    # (run, effect) ranks of a binary type with concrete labels, else None
    if not isinstance(t, Bin):
        return None
    run, eff = Unifier.walk(t.run), Unifier.walk(t.inner.eff)
    if isinstance(run, LVar) or isinstance(eff, LVar):
        return None
    return order.rank(run), order.rank(eff)


def _dedup(chain: tuple) -> tuple:
    return tuple(dict.fromkeys(chain))


def _close(u: Unifier, subs, order: LabelOrder) -> Sat:
    walk = u.walk
    lower: dict = {}
    upper: dict = {}
    succ: dict = {}
    pred: dict = {}
    work = [(a, b, ((a, b),)) for a, b in subs]
    seen: set = set()

    def var(t):
        return isinstance(t, TVar)

    def reaches(a, b) -> Optional[tuple]:
        # path of variables from a to b along succ edges, with the edges' chains
        stack = [(a, [a], ())]
        visited = {a}
        while stack:
            v, path, why = stack.pop()
            if v is b:
                return path, why
            for w, c in succ.get(v, ()):
                w = walk(w)
                if var(w) and w not in visited:
                    visited.add(w)
                    stack.append((w, path + [w], why + c))
        return None

    def ordered(x, y):
        # orient two bounds so that the first may be a subtype of the second
        kx, ky = _bin_key(x, order), _bin_key(y, order)
        if kx is not None and ky is not None and kx < ky:
            return y, x
        return x, y

    def equate(v, t, chain) -> bool:
        # bind v to t and replay everything known about v
        if v is walk(t):
            return True
        lo, hi = lower.pop(v, []), upper.pop(v, [])
        sc, pc = succ.pop(v, []), pred.pop(v, [])
        if not u.unify(v, t):
            return False
        # replayed facts now also rest on the reason for the binding
        work.extend([(x, v, _dedup(c + chain)) for x, c in lo]
                    + [(v, x, _dedup(c + chain)) for x, c in hi])
        work.extend([(v, w, _dedup(c + chain)) for w, c in sc]
                    + [(w, v, _dedup(c + chain)) for w, c in pc])
        return True

    while work:
        a, b, chain = work.pop()
        a, b = walk(a), walk(b)
        if a is b:
            continue
        key = (id(a), id(b))
        if key in seen:
            continue
        seen.add(key)
        if var(a) and var(b):
            found = reaches(b, a)
            if found is not None:
                # cycle: every member is equal
                path, why = found
                chain = _dedup(chain + why)
                for v in path:
                    if not equate(walk(v), a, chain):
                        return Sat(False, list(chain), "cycle through a variable")
                continue
            succ.setdefault(a, []).append((b, chain))
            pred.setdefault(b, []).append((a, chain))
            work += [(lo, b, c + chain) for lo, c in lower.get(a, [])]
            work += [(a, hi, chain + c) for hi, c in upper.get(b, [])]
            continue
        if var(a) or var(b):
            v, t = (a, b) if var(a) else (b, a)
            if u.occurs(v, t):
                return Sat(False, list(chain), "a variable would have to contain itself")
            if not isinstance(t, Bin):
                # subtyping keeps the shape, and only binary types vary
                if not equate(v, t, chain):
                    return Sat(False, list(chain), "incompatible shapes")
                continue
        if var(a):
            for hi, c in upper.get(a, []):
                x, y = ordered(b, hi)
                work.append((x, y, chain + c))                          # left
            for lo, c in lower.get(a, []):
                work.append((lo, b, c + chain))                         # middle
            for p, c in pred.get(a, []):
                work.append((p, b, c + chain))
            upper.setdefault(a, []).append((b, chain))
            continue
        if var(b):
            for lo, c in lower.get(b, []):
                x, y = ordered(a, lo)
                work.append((x, y, chain + c))                          # right
            for hi, c in upper.get(b, []):
                work.append((a, hi, chain + c))                         # middle
            for s_, c in succ.get(b, []):
                work.append((a, s_, chain + c))
            lower.setdefault(b, []).append((a, chain))
            continue
        if isinstance(a, UnitT) and isinstance(b, UnitT):
            continue
        if isinstance(a, Obj) and isinstance(b, Obj):
            if not u.unify(a, b):
                return Sat(False, list(chain), "object types are invariant")
            continue
        if isinstance(a, Bin) and isinstance(b, Bin):
            p, p2 = walk(a.run), walk(b.run)
            if isinstance(p, LVar) or isinstance(p2, LVar):
                if not u.unify_label(p, p2):
                    return Sat(False, list(chain), "run labels differ")
                p = p2 = walk(p)
            if not order.leq(p2, p):
                return Sat(False, list(chain),
                           f"run label would rise from {order.name(p)} to {order.name(p2)}")
            ia, ib = a.inner, b.inner
            ea, eb = walk(ia.eff), walk(ib.eff)
            if isinstance(ea, LVar) or isinstance(eb, LVar):
                ok = u.unify_label(eb, order.meet(ea, p2)) if not isinstance(ea, LVar) \
                    else u.unify_label(ea, eb)
            else:
                ok = (order.eq(eb, order.meet(ea, p2))
                      or (order.eq(p, p2) and order.eq(ea, eb)))
            if not ok:
                return Sat(False, list(chain), "effect must be lowered to the run label")
            work.append((ia.ty, ib.ty, chain))
            continue
        return Sat(False, list(chain), "incompatible shapes")
    return Sat(True)


def satisfiable(subs, order: LabelOrder) -> Sat:
    """Close a set of subtype constraints and look for a contradiction.

    Objects are invariant.  A binary type is a subtype of another when the
    run label does not increase and the inner effect is lowered to the new
    run label (or when the two are identical).  Concrete bounds on a
    variable are related pairwise: lower to upper, two uppers (the one with
    the higher run label below the other) and two lowers likewise.
    Variable-to-variable constraints form a graph; a cycle makes its members
    equal, and a variable that must contain itself is a contradiction.
    """
    u = Unifier(order)
    try:
        return _close(u, subs, order)
    finally:
        u.undo(0)


# -- the checker

class _Unifier(Unifier):
    """Unification that understands packed-code families."""

    def __init__(self, order: LabelOrder, checker: "Checker"):
        super().__init__(order)
        self.checker = checker

    def unify(self, a, b) -> bool:
        a, b = self.walk(a), self.walk(b)
        if a is b:
            return True
        if isinstance(a, Chi) or isinstance(b, Chi):
            if not isinstance(a, Chi):
                a, b = b, a
            if isinstance(b, Chi):
                return self.checker.merge(a, b)
            if isinstance(b, TVar):
                return self.bind_type(b, a)
            if isinstance(b, Bin):
                run = self.walk(b.run)
                if isinstance(run, LVar):
                    return False
                return (self.checker.resolve(a, self.checker.rep(run))
                        and self.unify(a, b))
            return False
        return super().unify(a, b)


class Checker:
    def __init__(self, order: LabelOrder, positions: Optional[Mapping] = None):
        self.order = order
        self.u = _Unifier(order, self)
        self.classes = order.classes()
        self.chis: list[Chi] = []
        self.subs: list = []
        self.positions = positions or {}

    # -- helpers

    def rep(self, l: Label) -> Label:
        return BOT if not self.order.star(l) else l

    def lab(self, l) -> Label:
        """A concrete label; free labels default to the top."""
        l = self.u.walk(l)
        if isinstance(l, LVar):
            self.u.bind(l, self.order.top)
            return self.order.top
        return l

    def value(self, env: Mapping, p: Label, r) -> Eff:
        if r is UNIT:
            return Eff(UNIT_T, p)
        t = self.lookup(env, r)
        e = t.eff
        if not self.order.star(e):
            return Eff(TVar(), BOT)
        return Eff(t.ty, self.order.meet(e, p))

    def fail(self, rule: str, node, message: str):
        raise Untypable(rule, node, message)

    def lookup(self, env: Mapping, x, node=None) -> Eff:
        try:
            return env[x]
        except KeyError:
            self.fail("variable", node if node is not None else x, f"unbound variable {x}")

    def name(self, l) -> str:
        return self.order.name(self.lab(l))

    # -- families

    def members_at(self, chi: Chi, l: Label) -> Optional[list]:
        return chi.alts.get(l)

    def resolve(self, chi: Chi, l: Label) -> bool:
        """Fix the run label of a family, replaying what its members needed."""
        chi = self.u.walk(chi)
        if not isinstance(chi, Chi):
            return isinstance(chi, Bin) and self.order.eq(self.u.walk(chi.run), l)
        ms = chi.alts.get(l)
        if not ms:
            return False
        u = self.u
        m = u.mark()
        inner = None
        n = len(self.subs)
        for mem in ms:
            self.subs.extend(mem.subs)
            for v, val in mem.log:
                if v.ref is None:
                    u.bind(v, val)
                elif not u.unify(v, val):
                    u.undo(m)
                    del self.subs[n:]
                    return False
            t = Eff(TVar(), LVar()) if mem.stuck else mem.ty
            if inner is None:
                inner = t
            elif not u.unify(inner, t):
                u.undo(m)
                del self.subs[n:]
                return False
        u.bind(chi, Bin(l, inner))
        return True

    def merge(self, a: Chi, b: Chi) -> bool:
        common = {l: a.alts[l] + b.alts[l] for l in a.alts if l in b.alts}
        if not common:
            return False
        c = Chi(common, a.node)
        self.chis.append(c)
        self.u.bind(a, c)
        self.u.bind(b, c)
        return True

    def pick(self, chi: Chi, p: Label) -> Optional[Label]:
        """Member for running the code at p: a stuck one if possible, else the highest."""
        cands = [l for l in chi.alts if self.order.leq(p, l)]
        if not cands:
            return None
        stuck = [l for l in cands if all(m.stuck for m in chi.alts[l])]
        return max(stuck) if stuck else max(cands)

    # -- processes

    def infer(self, env: dict, p: Label, a: Process):
        """Approximation of a at label p: STUCK or a type-and-effect."""
        order = self.order
        restore: list = []
        try:
            while True:
                if isinstance(a, Let):
                    t1 = self.infer(env, p, a.head)
                    if t1 is STUCK:
                        return STUCK
                    restore.append((a.x, env.get(a.x, _MISSING)))
                    env[a.x] = t1
                    a = a.body
                elif isinstance(a, Fork):
                    m, n = self.u.mark(), len(self.subs)
                    wm = TVar().id
                    self.infer(env, p, a.child)
                    if any(v.id < wm for v in self.u.trail[m:]):
                        return self.fork_rest(env, p, a, m, n)
                    a = a.cont
                elif isinstance(a, Limit):
                    if order.lt(p, a.p):
                        return STUCK
                    p = a.p
                    a = a.body
                else:
                    return self.action(env, p, a)
        finally:
            for x, old in reversed(restore):
                if old is _MISSING:
                    del env[x]
                else:
                    env[x] = old

    def fork_rest(self, env, p, a, m, n):
        """The child constrained shared variables; should the continuation
        then fail, try checking it first instead."""
        u = self.u
        try:
            return self.infer(env, p, a.cont)
        except Untypable as first:
            u.undo(m)
            del self.subs[n:]
            try:
                t = self.infer(env, p, a.cont)
                self.infer(env, p, a.child)
                return t
            except Untypable:
                u.undo(m)
                del self.subs[n:]
                raise first from None

    def action(self, env: dict, p: Label, a: Process):
        order = self.order
        star = order.star
        u = self.u
        if isinstance(a, Result):
            return self.value(env, p, a.r)
        if isinstance(a, New):
            v = self.value(env, p, a.init)
            if not order.leq(a.trust, v.eff):
                self.fail("new", a, f"initial content has effect {self.name(v.eff)}, "
                          f"below the trust {order.name(a.trust)}")
            return Eff(Obj(Eff(v.ty, a.trust)), p)
        if isinstance(a, Pack):
            return Eff(self.pack(env, a), p)
        t = self.lookup(env, a.target, a)
        e = t.eff
        if not star(e):
            return self.flexible(env, p, a)
        ty = u.walk(t.ty)
        if isinstance(ty, TVar) and not isinstance(ty, Chi):
            u.bind(ty, UNIT_T)                         # bogus stuck-I
            return STUCK
        if not isinstance(ty, Obj):
            return STUCK                               # bogus stuck-I
        inner = ty.inner
        s = self.lab(inner.eff)
        if isinstance(a, Relabel):
            if order.lt(p, order.join(s, a.o)):
                return STUCK                           # un/protect stuck
            if not order.leq(s, a.o):
                self.fail("un/protect", a, f"relabelling to {order.name(a.o)} would go "
                          f"below the object's trust {order.name(s)}")
            return Eff(UNIT_T, p)
        if isinstance(a, Read):
            if not star(s):
                return Eff(TVar(), BOT)
            return Eff(inner.ty, order.meet(s, p))
        if isinstance(a, Write):
            if order.lt(p, s):
                return STUCK                           # write stuck
            v = self.value(env, p, a.value)
            if not star(s):
                return Eff(UNIT_T, p)
            if not u.unify(inner.ty, v.ty):
                self.fail("write", a, f"cannot store {show(v.ty, order)} in an object "
                          f"holding {show(inner.ty, order)}")
            self.subs.append((v.ty, inner.ty))
            if not order.leq(s, v.eff):
                self.fail("write", a, f"the value may flow from {self.name(v.eff)}, "
                          f"below the object's trust {order.name(s)}")
            return Eff(UNIT_T, p)
        if isinstance(a, Exec):
            if not star(s):
                if star(p):
                    self.fail("execute", a, "the code's contents are untrusted, so it "
                              f"cannot run at {order.name(p)}")
                return Eff(TVar(), BOT)
            c = u.walk(inner.ty)
            if isinstance(c, TVar) and not isinstance(c, Chi):
                u.bind(c, UNIT_T)                      # bogus stuck-II
                return STUCK
            if isinstance(c, Chi):
                if not order.leq(p, s):
                    self.fail("execute", a, f"running at {order.name(p)} needs code trusted "
                              f"at least that much, but the object's trust is {order.name(s)}")
                l = self.pick(c, p)
                if l is None or not self.resolve(c, l):
                    self.fail("execute", a, f"the packed code cannot run at {order.name(p)}")
                c = u.walk(c)
            if not isinstance(c, Bin):
                return STUCK                           # bogus stuck-II
            run = self.lab(c.run)
            if not order.leq(p, order.meet(run, s)):
                self.fail("execute", a, f"running at {order.name(p)} needs code trusted at "
                          f"least that much, but the object's trust is {order.name(s)} and "
                          f"the code runs at {order.name(run)}")
            res = c.inner
            self.subs.append((c, Bin(p, Eff(res.ty, order.meet(self.lab(res.eff), p)))))
            return Eff(res.ty, order.meet(self.lab(res.eff), p))
        raise TypeError(f"no rule for {type(a).__name__}")

    def flexible(self, env, p, a):
        """Store operations on a name whose effect is bot: any object type fits,
        but the process label must be untrusted too."""
        star = self.order.star
        rule = {Relabel: "un/protect", Read: "read", Write: "write", Exec: "execute"}[type(a)]
        if isinstance(a, Read):
            return Eff(TVar(), BOT)
        if star(p):
            self.fail(rule, a, f"{a.target} is untrusted, so a process at "
                      f"{self.order.name(p)} may not rely on it")
        if isinstance(a, Exec):
            return Eff(TVar(), BOT)
        if isinstance(a, Write):
            self.value(env, p, a.value)
        return Eff(UNIT_T, p)

    def pack(self, env: dict, a: Pack) -> Chi:
        if not box_pred(a.body, self.order):
            self.fail("pack", a, "packed code creates objects with trusted annotations")
        u = self.u
        alts: dict = {}
        errors: list = []
        for l in reversed(self.classes):
            m = u.mark()
            n = len(self.subs)
            try:
                t = self.infer(env, l, a.body)
            except Untypable as exc:
                errors.append(exc)
                u.undo(m)
                del self.subs[n:]
                continue
            log = [(v, v.ref) for v in u.trail[m:]]
            subs = self.subs[n:]
            u.undo(m)
            del self.subs[n:]
            alts[l] = [Member(t is STUCK, None if t is STUCK else t, log, subs)]
        if not alts:
            raise errors[0]
        chi = Chi(alts, a)
        self.chis.append(chi)
        return chi

    def settle(self) -> None:
        """Resolve families nobody demanded, highest member first."""
        for chi in self.chis:
            c = self.u.walk(chi)
            if not isinstance(c, Chi):
                continue
            for l in sorted(c.alts, reverse=True):
                if self.resolve(c, l):
                    break
            else:
                self.fail("pack", c.node, "no run label is consistent with the "
                          "constraints on this packed code")

    def position(self, node) -> tuple:
        return self.positions.get(id(node), (0, 0))


_MISSING = object()


# -- public interface

@dataclass
class Verdict:
    accepted: bool
    ty: Optional[str] = None
    effect: Optional[str] = None
    diagnostics: list = field(default_factory=list)
    constraints: Optional[ConstraintSet] = None

    def record(self) -> dict:
        return {"accepted": self.accepted, "type": self.ty, "effect": self.effect,
                "diagnostics": self.diagnostics}


def _approx_parts(t, order: LabelOrder) -> tuple:
    if t is STUCK:
        return "Stuck", None
    return show(t.ty, order), show_label(Unifier.walk(t.eff), order)


def infer_process(env: Mapping[Var, Eff], plabel: Label, p: Process,
                  order: LabelOrder):
    """(approximation, constraints) for p at a known label; raises Untypable."""
    ck = Checker(order)
    t = _run(ck, dict(env), plabel, p)
    return ck.u.zonk(t) if t is not STUCK else STUCK, ConstraintSet(ck.subs, TRUE)


def infer_expression(env: Mapping[Var, Eff], f: Process, order: LabelOrder):
    """Check an expression under every instantiation of the unknown label.

    Returns the approximation at the label chosen by ``models`` and the
    constraint set whose label constraint holds exactly at the labels where
    f is typable.
    """
    ck = Checker(order)
    if not box_pred(f, order):
        raise Untypable("pack", f, "expression creates objects with trusted annotations")
    chi = ck.pack(dict(env), Pack(f))
    ok = [Atom(QMARK, l) if not order.star(l) else And((Atom(QMARK, l), Atom(l, QMARK)))
          for l in chi.alts]
    cs = ConstraintSet([], Or(tuple(ok)))
    best = models(cs, order)
    mem = chi.alts[ck.rep(best)][0]
    t = STUCK if mem.stuck else mem.ty
    ck.resolve(chi, ck.rep(best))
    cs.subs.append((ck.u.zonk(Unifier.walk(chi)), chi))
    return (ck.u.zonk(t) if t is not STUCK else STUCK), cs


def _run(ck: Checker, env: dict, plabel: Label, p: Process):
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 20000))
    try:
        t = ck.infer(env, plabel, p)
        ck.settle()
        return t
    finally:
        sys.setrecursionlimit(old)


def typecheck(prog: ProgramFile, despite: Optional[Label] = None) -> Verdict:
    order = prog.order if despite is None else prog.order.compromise(despite)
    return typecheck_process(prog.env(), prog.main, order, prog.positions)


def typecheck_process(env: Mapping[Var, Eff], p: Process, order: LabelOrder,
                      positions: Optional[Mapping] = None) -> Verdict:
    ck = Checker(order, positions)
    try:
        t = _run(ck, dict(env), order.top, p)
    except Untypable as exc:
        line, col = ck.position(exc.node)
        return Verdict(False, diagnostics=[{
            "code": "untypable", "rule": exc.rule, "line": line, "col": col,
            "message": exc.message}])
    cs = ConstraintSet(ck.subs, TRUE)
    sat = satisfiable(cs.subs, order)
    if not sat:
        return Verdict(False, diagnostics=[{
            "code": "unsatisfiable", "rule": "constraints", "line": 0, "col": 0,
            "message": sat.reason}], constraints=cs)
    ty, eff = _approx_parts(t, order)
    return Verdict(True, ty, eff, [], cs)
