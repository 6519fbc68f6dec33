"""Static approximations shared by both checkers, plus a trail-based unifier."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Union

from .labels import Label, LabelOrder


class Ty:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class UnitT(Ty):
    pass


UNIT_T = UnitT()


@dataclass(frozen=True, slots=True)
class Obj(Ty):
    inner: "Eff"


@dataclass(frozen=True, slots=True)
class Bin(Ty):
    run: "LabelT"
    inner: "Approx"


@dataclass(frozen=True, slots=True)
class Eff:
    ty: "TyT"
    eff: "LabelT"


class StuckT:
    __slots__ = ()
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self) -> str:
        return "Stuck"


STUCK = StuckT()

_ids = itertools.count(1)


class TVar:
    """A type variable; ``ref`` is set while it is bound."""
    __slots__ = ("id", "ref")

    def __init__(self):
        self.id = next(_ids)
        self.ref = None

    def __repr__(self) -> str:
        return f"t{self.id}"


class LVar:
    __slots__ = ("id", "ref")

    def __init__(self):
        self.id = next(_ids)
        self.ref = None

    def __repr__(self) -> str:
        return f"l{self.id}"


LabelT = Union[Label, LVar]
TyT = Union[Ty, TVar]
Approx = Union[Eff, StuckT]


class Unifier:
    """Mutable substitution with an undo trail (Prolog style)."""

    def __init__(self, order: LabelOrder):
        self.order = order
        self.trail: list = []

    def mark(self) -> int:
        return len(self.trail)

    def undo(self, mark: int) -> None:
        trail = self.trail
        while len(trail) > mark:
            trail.pop().ref = None

    def bind(self, v, val) -> None:
        v.ref = val
        self.trail.append(v)

    @staticmethod
    def walk(t):
        while isinstance(t, (TVar, LVar)) and t.ref is not None:
            t = t.ref
        return t

    def label(self, l: LabelT) -> LabelT:
        return self.walk(l)

    def unify_label(self, a: LabelT, b: LabelT) -> bool:
        a, b = self.walk(a), self.walk(b)
        if a is b:
            return True
        if isinstance(a, LVar):
            self.bind(a, b)
            return True
        if isinstance(b, LVar):
            self.bind(b, a)
            return True
        return self.order.eq(a, b)

    def occurs(self, v: TVar, t) -> bool:
        stack = [t]
        while stack:
            t = self.walk(stack.pop())
            if t is v:
                return True
            if isinstance(t, Obj):
                stack.append(t.inner)
            elif isinstance(t, Bin):
                stack.append(t.inner)
            elif isinstance(t, Eff):
                stack.append(t.ty)
        return False

    def bind_type(self, v: TVar, t) -> bool:
        if self.occurs(v, t):
            return False
        self.bind(v, t)
        return True

    def unify(self, a, b) -> bool:
        a, b = self.walk(a), self.walk(b)
        if a is b:
            return True
        if isinstance(a, TVar):
            return self.bind_type(a, b)
        if isinstance(b, TVar):
            return self.bind_type(b, a)
        if isinstance(a, Eff) and isinstance(b, Eff):
            return self.unify_label(a.eff, b.eff) and self.unify(a.ty, b.ty)
        if isinstance(a, StuckT) or isinstance(b, StuckT):
            return a is b
        if isinstance(a, UnitT) and isinstance(b, UnitT):
            return True
        if isinstance(a, Obj) and isinstance(b, Obj):
            return self.unify(a.inner, b.inner)
        if isinstance(a, Bin) and isinstance(b, Bin):
            return self.unify_label(a.run, b.run) and self.unify(a.inner, b.inner)
        return False

    def zonk(self, t):
        t = self.walk(t)
        if isinstance(t, Eff):
            return Eff(self.zonk(t.ty), self.walk(t.eff))
        if isinstance(t, Obj):
            return Obj(self.zonk(t.inner))
        if isinstance(t, Bin):
            return Bin(self.walk(t.run), self.zonk(t.inner))
        return t


def fresh_approx() -> Eff:
    return Eff(TVar(), LVar())


def show_label(l, order: LabelOrder | None) -> str:
    if isinstance(l, LVar):
        return "_" if l.ref is None else show_label(l.ref, order)
    if order is None:
        return str(l)
    return order.name(l)


def show(t, order: LabelOrder | None = None) -> str:
    """Render a type; unbound variables print as ``_``."""
    while isinstance(t, (TVar, LVar)) and t.ref is not None:
        t = t.ref
    if isinstance(t, StuckT):
        return "Stuck"
    if isinstance(t, Eff):
        return f"{show(t.ty, order)}^{show_label(t.eff, order)}"
    if isinstance(t, UnitT):
        return "Unit"
    if isinstance(t, Obj):
        return f"Obj({show(t.inner, order)})"
    if isinstance(t, Bin):
        return f"Bin[{show_label(t.run, order)}]({show(t.inner, order)})"
    if isinstance(t, (TVar, LVar)):
        return "_"
    return repr(t)


def is_ground(t) -> bool:
    t = Unifier.walk(t)
    if isinstance(t, (TVar, LVar)):
        return False
    if isinstance(t, Eff):
        return is_ground(t.ty) and is_ground(t.eff)
    if isinstance(t, Obj):
        return is_ground(t.inner)
    if isinstance(t, Bin):
        return is_ground(t.run) and is_ground(t.inner)
    return True


def type_depth(t) -> int:
    t = Unifier.walk(t)
    if isinstance(t, Eff):
        return type_depth(t.ty)
    if isinstance(t, Obj):
        return 1 + type_depth(t.inner)
    if isinstance(t, Bin):
        return 1 + (0 if isinstance(t.inner, StuckT) else type_depth(t.inner))
    return 0
