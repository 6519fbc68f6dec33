"""Integrity labels: a finite total order with an explicit bottom element."""

from __future__ import annotations

from typing import Iterable, Sequence

Label = int
BOT: Label = 0
BOT_NAME = "bot"


class LabelOrder:
    """Declared labels in ascending trust, with ``bot`` materialized at index 0.

    A compromised order keeps the same indices but maps every label at or
    below the compromise point to rank 0, so all comparisons see the collapse.
    """

    __slots__ = ("_names", "_index", "_cut")

    def __init__(self, names: Sequence[str], cut: Label = BOT):
        names = tuple(names)
        if not names:
            raise ValueError("a label order needs at least one declared label")
        if len(set(names)) != len(names):
            raise ValueError("duplicate label name")
        if BOT_NAME in names:
            raise ValueError("'bot' is reserved for the least label")
        self._names = (BOT_NAME,) + names
        self._index = {n: i for i, n in enumerate(self._names)}
        self._cut = cut

    # -- construction helpers
    @property
    def names(self) -> tuple[str, ...]:
        return self._names[1:]

    @property
    def cut(self) -> Label:
        return self._cut

    @property
    def top(self) -> Label:
        return len(self._names) - 1

    @property
    def bottom(self) -> Label:
        return BOT

    def labels(self) -> range:
        """All labels including bot, ascending."""
        return range(len(self._names))

    def descending(self) -> range:
        return range(len(self._names) - 1, -1, -1)

    def classes(self) -> list[Label]:
        """One representative per equivalence class, ascending: bot, then
        every label above the compromise point."""
        return [BOT] + list(range(self._cut + 1, len(self._names)))

    def __len__(self) -> int:
        return len(self._names)

    def label(self, name: str) -> Label:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown label {name!r}") from None

    def name(self, l: Label) -> str:
        return self._names[l]

    def valid(self, l: object) -> bool:
        return isinstance(l, int) and 0 <= l < len(self._names)

    # -- the order itself
    def rank(self, l: Label) -> int:
        return 0 if l <= self._cut else l

    def leq(self, a: Label, b: Label) -> bool:
        return self.rank(a) <= self.rank(b)

    def lt(self, a: Label, b: Label) -> bool:
        return self.rank(a) < self.rank(b)

    def eq(self, a: Label, b: Label) -> bool:
        return self.rank(a) == self.rank(b)

    def meet(self, a: Label, b: Label) -> Label:
        return a if self.rank(a) <= self.rank(b) else b

    def join(self, a: Label, b: Label) -> Label:
        return a if self.rank(a) >= self.rank(b) else b

    def meet_all(self, ls: Iterable[Label]) -> Label:
        out = self.top
        for l in ls:
            out = self.meet(out, l)
        return out

    def star(self, l: Label) -> bool:
        return self.rank(l) > 0

    def compromise(self, c: Label) -> "LabelOrder":
        if not self.valid(c):
            raise ValueError(f"label index {c!r} is not in the order")
        return LabelOrder(self.names, max(self._cut, c))

    def base(self) -> "LabelOrder":
        """The same declared labels without any compromise."""
        return LabelOrder(self.names)

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, LabelOrder) and self._names == other._names
                and self._cut == other._cut)

    def __hash__(self) -> int:
        return hash((self._names, self._cut))

    def __repr__(self) -> str:
        text = " < ".join(self.names)
        if self._cut:
            text += f" despite {self.name(self._cut)}"
        return f"LabelOrder({text})"


def leq(order: LabelOrder, a: Label, b: Label) -> bool:
    return order.leq(a, b)


def meet(order: LabelOrder, a: Label, b: Label) -> Label:
    return order.meet(a, b)


def join(order: LabelOrder, a: Label, b: Label) -> Label:
    return order.join(a, b)


def star(order: LabelOrder, l: Label) -> bool:
    return order.star(l)


def compromise(order: LabelOrder, c: Label) -> LabelOrder:
    return order.compromise(c)
