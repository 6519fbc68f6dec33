"""Hypothesis strategies for well-scoped source programs."""

from hypothesis import strategies as st

from dfikit.syntax import (UNIT, Exec, Fork, Let, Limit, New, Pack, Read, Relabel,
                           Result, Var, Write)

NAMES = ("a", "b", "cmd.exe", "x1")


@st.composite
def programs(draw, labels, scope=(), depth=4, expr=False):
    """Source processes whose free variables lie in ``scope``; with ``expr``
    set, only expressions (a pack may appear only under a limit)."""
    labels = tuple(labels)

    def res(sc):
        return draw(st.sampled_from((UNIT,) + sc))

    def go(sc, d, ex):
        kinds = ["result", "new"]
        if sc:
            kinds += ["relabel", "read", "write", "exec"]
        if d > 0:
            kinds += ["fork", "let", "limit"] + ([] if ex else ["pack"])
        k = draw(st.sampled_from(kinds))
        if k == "result":
            return Result(res(sc))
        if k == "new":
            return New(res(sc), draw(st.sampled_from(labels)))
        if k in ("relabel", "read", "write", "exec"):
            v = draw(st.sampled_from(sc))
            if k == "relabel":
                return Relabel(draw(st.sampled_from(labels)), v)
            if k == "read":
                return Read(v)
            if k == "write":
                return Write(v, res(sc))
            return Exec(v)
        if k == "fork":
            return Fork(go(sc, d - 1, ex), go(sc, d - 1, ex))
        if k == "let":
            x = Var(draw(st.sampled_from(NAMES)))
            return Let(x, go(sc, d - 1, ex), go(sc + (x,), d - 1, ex))
        if k == "limit":
            return Limit(draw(st.sampled_from(labels)), go(sc, d - 1, False))
        return Pack(go(sc, d - 1, True))

    return go(tuple(scope), depth, expr)
