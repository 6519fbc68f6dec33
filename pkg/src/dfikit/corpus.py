"""Small-program corpus: exact counting, ranking and enumeration.

Programs are built over a fixed list of names in scope (hypotheses first,
then let-bound names ``x0, x1, ...`` in binding order), so every program of
a given size has a unique index and the corpus can be enumerated in full or
sampled uniformly.
"""

from __future__ import annotations

import itertools
import random
from functools import lru_cache
from typing import Iterator, Sequence

from .labels import LabelOrder
from .syntax import (UNIT, Exec, Fork, Let, Limit, New, Pack, Process, Read,
                     Relabel, Result, Var, Write)
from .types import UNIT_T, Bin, Eff, Obj

PROC, EXPR = "proc", "expr"


class Grammar:
    """Process grammar over a label order, with ``k`` hypotheses in scope."""

    def __init__(self, order: LabelOrder, hyps: Sequence[Var]):
        self.order = order
        self.hyps = tuple(hyps)
        self.labels = tuple(order.labels())
        self._count = lru_cache(maxsize=None)(self._count_uncached)

    def scope(self, k: int) -> tuple:
        h = len(self.hyps)
        return self.hyps[:k] if k <= h else self.hyps + tuple(Var(f"x{i}") for i in range(k - h))

    def atoms(self, k: int) -> list:
        vs = self.scope(k)
        rs = (UNIT,) + vs
        out: list = [Result(r) for r in rs]
        out += [New(r, s) for r in rs for s in self.labels]
        out += [Relabel(o, v) for v in vs for o in self.labels]
        out += [Read(v) for v in vs]
        out += [Write(v, r) for v in vs for r in rs]
        out += [Exec(v) for v in vs]
        return out

    def n_atoms(self, k: int) -> int:
        nl = len(self.labels)
        return (k + 1) * (1 + nl) + k * (nl + 1 + (k + 1) + 1)

    # -- counting: the order of alternatives here fixes the ranking

    def _parts(self, n: int, k: int, ctx: str):
        """(tag, sub-counts...) for every way to split a node of size n > 1."""
        nl = len(self.labels)
        yield ("limit", nl * self._count(n - 1, k, PROC))
        if ctx == PROC:
            yield ("pack", self._count(n - 1, k, EXPR))
        for a in range(1, n - 1):
            b = n - 1 - a
            yield (("let", a), self._count(a, k, ctx) * self._count(b, k + 1, ctx))
        for a in range(1, n - 1):
            b = n - 1 - a
            yield (("fork", a), self._count(a, k, ctx) * self._count(b, k, ctx))

    def _count_uncached(self, n: int, k: int, ctx: str) -> int:
        if n < 1:
            return 0
        if n == 1:
            return self.n_atoms(k)
        return sum(c for _, c in self._parts(n, k, ctx))

    def count(self, n: int, k: int | None = None, ctx: str = PROC) -> int:
        return self._count(n, len(self.hyps) if k is None else k, ctx)

    def unrank(self, n: int, i: int, k: int | None = None, ctx: str = PROC) -> Process:
        k = len(self.hyps) if k is None else k
        if not 0 <= i < self._count(n, k, ctx):
            raise IndexError(i)
        return self._unrank(n, k, ctx, i)

    def _unrank(self, n: int, k: int, ctx: str, i: int) -> Process:
        if n == 1:
            return self.atoms(k)[i]
        for tag, c in self._parts(n, k, ctx):
            if i >= c:
                i -= c
                continue
            if tag == "limit":
                sub = self._count(n - 1, k, PROC)
                li, j = divmod(i, sub)
                return Limit(self.labels[li], self._unrank(n - 1, k, PROC, j))
            if tag == "pack":
                return Pack(self._unrank(n - 1, k, EXPR, i))
            kind, a = tag
            b = n - 1 - a
            if kind == "let":
                cb = self._count(b, k + 1, ctx)
                ia, ib = divmod(i, cb)
                x = self.scope(k + 1)[k]
                return Let(x, self._unrank(a, k, ctx, ia), self._unrank(b, k + 1, ctx, ib))
            cb = self._count(b, k, ctx)
            ia, ib = divmod(i, cb)
            return Fork(self._unrank(a, k, ctx, ia), self._unrank(b, k, ctx, ib))
        raise AssertionError("rank out of range")

    def programs(self, n: int) -> Iterator[Process]:
        """Every program of exactly n nodes, in rank order."""
        for i in range(self.count(n)):
            yield self.unrank(n, i)

    def sample(self, n: int, rng: random.Random) -> Process:
        return self.unrank(n, rng.randrange(self.count(n)))


def hypothesis_types(order: LabelOrder) -> list:
    """Hypothesis types of depth at most two built from Unit."""
    ls = list(order.labels())
    unit = [Eff(UNIT_T, e) for e in ls]
    out = [UNIT_T]
    out += [Obj(Eff(UNIT_T, s)) for s in ls]
    out += [Bin(r, t) for r in ls for t in unit]
    out += [Obj(Eff(Obj(Eff(UNIT_T, s1)), s)) for s in ls for s1 in ls]
    out += [Obj(Eff(Bin(r, t), s)) for s in ls for r in ls for t in unit]
    return out


def hypothesis_envs(order: LabelOrder, max_hyps: int = 2) -> Iterator[list]:
    """Every environment of up to ``max_hyps`` hypotheses h0, h1, ..."""
    effs = [Eff(t, e) for t in hypothesis_types(order) for e in order.labels()]
    for k in range(max_hyps + 1):
        for combo in itertools.product(effs, repeat=k):
            yield [(Var(f"h{i}"), t) for i, t in enumerate(combo)]


def small_order() -> LabelOrder:
    """Three labels: bot < L < H."""
    return LabelOrder(["L", "H"])
