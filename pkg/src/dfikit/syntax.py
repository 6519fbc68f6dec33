"""Abstract syntax of processes, expressions and values."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping, Union

from .labels import Label, LabelOrder


@dataclass(frozen=True, slots=True)
class Var:
    name: str
    uid: tuple = ()  # empty for source identifiers; machine names carry an ordinal

    @property
    def fresh(self) -> bool:
        return bool(self.uid)

    def __str__(self) -> str:
        if not self.uid:
            return self.name
        return self.name + "~" + ".".join(str(u) for u in self.uid)


class UnitValue:
    __slots__ = ()
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self) -> str:
        return "unit"

    def __reduce__(self):
        return (UnitValue, ())


UNIT = UnitValue()
Res = Union[Var, UnitValue]


class Process:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Fork(Process):
    child: Process
    cont: Process


@dataclass(frozen=True, slots=True)
class Let(Process):
    x: Var
    head: Process
    body: Process


@dataclass(frozen=True, slots=True)
class Limit(Process):
    p: Label
    body: Process


@dataclass(frozen=True, slots=True)
class New(Process):
    init: Res
    trust: Label


@dataclass(frozen=True, slots=True)
class Relabel(Process):
    o: Label
    target: Var


@dataclass(frozen=True, slots=True)
class Read(Process):
    target: Var


@dataclass(frozen=True, slots=True)
class Write(Process):
    target: Var
    value: Res


@dataclass(frozen=True, slots=True)
class Exec(Process):
    target: Var


@dataclass(frozen=True, slots=True)
class Pack(Process):
    body: Process


@dataclass(frozen=True, slots=True)
class Result(Process):
    r: Res


@dataclass(frozen=True, slots=True)
class ObjectInit:
    """The substituted value recorded when an object is created.

    ``tag`` is the created object's name: two initializations with equal
    text are still different objects.
    """
    init: Res
    trust: Label
    tag: Var


SubstValue = Union[Var, UnitValue, Pack, ObjectInit]


@dataclass(frozen=True, slots=True)
class Store(Process):
    name: Var
    olabel: Label
    content: Var


@dataclass(frozen=True, slots=True)
class Subst(Process):
    x: Var
    mu: SubstValue
    src: Label
    body: Process


ACTIONS = (New, Relabel, Read, Write, Exec, Limit)


def is_value(p: Process) -> bool:
    return isinstance(p, (Result, Pack))


def is_expression(p: Process) -> bool:
    """Expressions exclude bare packs; a pack may only sit under ``[P]``."""
    while True:
        if isinstance(p, (Fork, Let)):
            a, b = (p.child, p.cont) if isinstance(p, Fork) else (p.head, p.body)
            if not is_expression(a):
                return False
            p = b
            continue
        if isinstance(p, Limit):
            return well_formed(p.body)
        return isinstance(p, (Result, New, Relabel, Read, Write, Exec))


def well_formed(p: Process) -> bool:
    """Every pack body in p is an expression (which rules out pack(pack(...)))."""
    for node in walk(p):
        if isinstance(node, Pack) and not is_expression(node.body):
            return False
    return True


def box_pred(f: Process, order: LabelOrder) -> bool:
    """Every trust annotation reachable through let/fork is the least label."""
    stack = [f]
    while stack:
        p = stack.pop()
        if isinstance(p, Fork):
            stack += [p.child, p.cont]
        elif isinstance(p, Let):
            stack += [p.head, p.body]
        elif isinstance(p, New) and order.star(p.trust):
            return False
    return True


def children(p: Process) -> tuple[Process, ...]:
    if isinstance(p, Fork):
        return (p.child, p.cont)
    if isinstance(p, Let):
        return (p.head, p.body)
    if isinstance(p, (Limit, Pack)):
        return (p.body,)
    if isinstance(p, Subst):
        return (p.body,) if not isinstance(p.mu, Pack) else (p.mu, p.body)
    return ()


def walk(p: Process) -> Iterator[Process]:
    stack = [p]
    while stack:
        q = stack.pop()
        yield q
        stack.extend(reversed(children(q)))


def size(p: Process) -> int:
    """Number of process nodes (each constructor occurrence counts once)."""
    return sum(1 for _ in walk(p))


def _res_vars(r: object) -> set[Var]:
    return {r} if isinstance(r, Var) else set()


def _mu_vars(mu: SubstValue) -> set[Var]:
    if isinstance(mu, Var):
        return {mu}
    if isinstance(mu, Pack):
        return free_vars(mu)
    if isinstance(mu, ObjectInit):
        return _res_vars(mu.init)
    return set()


def free_vars(p: Process) -> set[Var]:
    if isinstance(p, Fork):
        return free_vars(p.child) | free_vars(p.cont)
    if isinstance(p, Let):
        return free_vars(p.head) | (free_vars(p.body) - {p.x})
    if isinstance(p, (Limit, Pack)):
        return free_vars(p.body)
    if isinstance(p, New):
        return _res_vars(p.init)
    if isinstance(p, (Relabel, Read, Exec)):
        return {p.target}
    if isinstance(p, Write):
        return {p.target} | _res_vars(p.value)
    if isinstance(p, Result):
        return _res_vars(p.r)
    if isinstance(p, Store):
        return {p.name, p.content}
    if isinstance(p, Subst):
        return _mu_vars(p.mu) | (free_vars(p.body) - {p.x})
    raise TypeError(f"not a process: {p!r}")


def bound_vars(p: Process) -> set[Var]:
    out: set[Var] = set()
    for q in walk(p):
        if isinstance(q, (Let, Subst)):
            out.add(q.x)
    return out


def _rn(r, m: Mapping[Var, Var]):
    return m.get(r, r) if isinstance(r, Var) else r


def rename(p: Process, m: Mapping[Var, Var]) -> Process:
    """Substitute variables for variables, respecting let/nu shadowing.

    Callers only pass machine-fresh replacements, which no binder can capture.
    """
    if not m:
        return p
    if isinstance(p, Fork):
        return Fork(rename(p.child, m), rename(p.cont, m))
    if isinstance(p, Let):
        inner = m
        if p.x in m:
            inner = {k: v for k, v in m.items() if k != p.x}
        return Let(p.x, rename(p.head, m), rename(p.body, inner))
    if isinstance(p, Limit):
        return Limit(p.p, rename(p.body, m))
    if isinstance(p, Pack):
        return Pack(rename(p.body, m))
    if isinstance(p, New):
        return New(_rn(p.init, m), p.trust)
    if isinstance(p, Relabel):
        return Relabel(p.o, _rn(p.target, m))
    if isinstance(p, Read):
        return Read(_rn(p.target, m))
    if isinstance(p, Write):
        return Write(_rn(p.target, m), _rn(p.value, m))
    if isinstance(p, Exec):
        return Exec(_rn(p.target, m))
    if isinstance(p, Result):
        return Result(_rn(p.r, m))
    if isinstance(p, Store):
        return Store(_rn(p.name, m), p.olabel, _rn(p.content, m))
    if isinstance(p, Subst):
        mu = p.mu
        if isinstance(mu, Var):
            mu = _rn(mu, m)
        elif isinstance(mu, Pack):
            mu = rename(mu, m)
        elif isinstance(mu, ObjectInit):
            mu = ObjectInit(_rn(mu.init, m), mu.trust, _rn(mu.tag, m))
        inner = {k: v for k, v in m.items() if k != p.x} if p.x in m else m
        return Subst(p.x, mu, p.src, rename(p.body, inner))
    raise TypeError(f"not a process: {p!r}")


def let_spine(p: Process) -> tuple[list[tuple[Var, Process]], Process]:
    """Split ``let x1 = a1 in ... let xn = an in b`` into its bindings and b."""
    binds = []
    while isinstance(p, Let):
        binds.append((p.x, p.head))
        p = p.body
    return binds, p


def build_spine(binds: list[tuple[Var, Process]], tail: Process) -> Process:
    for x, head in reversed(binds):
        tail = Let(x, head, tail)
    return tail
