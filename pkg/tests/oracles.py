"""Independent reference implementations used as test oracles."""

import itertools
from functools import lru_cache

from dfikit.types import UNIT_T, Bin, Eff, Obj, TVar, UnitT


def subtype_rel(order):
    """Ground subtyping written from the rule text: objects are invariant;
    a binary type may lower its run label, its inner effect is then lowered
    to the new run label, and the inner type is covariant.  Identical types
    are always related."""

    @lru_cache(maxsize=None)
    def sub(a, b):
        if a == b:
            return True
        if isinstance(a, UnitT) and isinstance(b, UnitT):
            return True
        if isinstance(a, Bin) and isinstance(b, Bin):
            p, p2, ea, eb = a.run, b.run, a.inner.eff, b.inner.eff
            if not order.leq(p2, p):
                return False
            if not (order.eq(eb, order.meet(ea, p2)) or (order.eq(p, p2) and order.eq(ea, eb))):
                return False
            return sub(a.inner.ty, b.inner.ty)
        return False

    return sub


def ground_types(order, depth):
    """Every type of at most the given nesting depth."""
    ls = list(order.labels())
    out = [UNIT_T]
    for _ in range(depth):
        out = [UNIT_T] + [Obj(Eff(t, l)) for t in out for l in ls] \
            + [Bin(p, Eff(t, e)) for t in out for p in ls for e in ls]
    return out


def brute_satisfiable(subs, variables, order, depth=2):
    """Search every assignment of the variables over types of bounded depth."""
    sub = subtype_rel(order)
    dom = ground_types(order, depth)

    def val(t, asg):
        return asg[t] if isinstance(t, TVar) else t

    for combo in itertools.product(dom, repeat=len(variables)):
        asg = dict(zip(variables, combo))
        if all(sub(val(a, asg), val(b, asg)) for a, b in subs):
            return True
    return False
