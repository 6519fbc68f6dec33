import itertools

import pytest
from hypothesis import given, strategies as st

from dfikit.labels import BOT, LabelOrder, compromise, join, leq, meet, star


def test_leq_examples(order4):
    low, high, medium = order4.label("Low"), order4.label("High"), order4.label("Medium")
    assert leq(order4, low, high)
    assert leq(order4, BOT, low)
    assert not leq(order4, high, medium)


def test_meet_join_examples(order4):
    low, med, high, top = (order4.label(n) for n in ("Low", "Medium", "High", "Top"))
    assert meet(order4, med, high) == med
    assert join(order4, low, BOT) == low
    assert meet(order4, top, top) == top


def test_bottom_and_top(order4):
    assert order4.name(BOT) == "bot"
    assert order4.top == order4.label("Top")
    assert order4.bottom == BOT
    assert list(order4.labels()) == [0, 1, 2, 3, 4]


def test_star(order4):
    low = order4.label("Low")
    assert not star(order4, BOT)
    assert star(order4, low)
    assert not star(compromise(order4, low), low)


def test_compromise_examples(order3):
    low, med, high = (order3.label(n) for n in ("Low", "Medium", "High"))
    c = compromise(order3, low)
    assert not c.star(low) and c.leq(low, BOT)
    assert compromise(order3, BOT) == order3
    c = compromise(order3, med)
    assert not c.star(low) and not c.star(med) and c.star(high)


def test_compromise_rejects_unknown_label(order3):
    with pytest.raises(ValueError):
        compromise(order3, 17)


def test_unknown_name(order3):
    with pytest.raises(KeyError):
        order3.label("Nope")


def test_classes_one_per_collapsed_block(order4):
    c = order4.compromise(order4.label("Medium"))
    assert c.classes() == [BOT, order4.label("High"), order4.label("Top")]
    assert order4.classes() == list(order4.labels())


def test_duplicate_names_rejected():
    with pytest.raises(ValueError):
        LabelOrder(["A", "A"])


def _orders(max_labels=8):
    out = []
    for n in range(1, max_labels + 1):
        base = LabelOrder([f"L{i}" for i in range(n)])
        out += [base.compromise(c) for c in base.labels()]
    return out


def test_total_order_exhaustive():
    for o in _orders():
        ls = list(o.labels())
        for a, b, c in itertools.product(ls, repeat=3):
            assert o.leq(a, a)
            if o.leq(a, b) and o.leq(b, c):
                assert o.leq(a, c)
            assert o.leq(a, b) or o.leq(b, a)
            assert sum((o.lt(a, b), o.eq(a, b), o.lt(b, a))) == 1
        for a in ls:
            assert o.leq(BOT, a)
            assert o.leq(a, o.top)


orders = st.integers(1, 8).flatmap(
    lambda n: st.tuples(st.just(n), st.integers(0, n)))


@given(orders, st.data())
def test_meet_join_agree_with_leq(nc, data):
    n, c = nc
    o = LabelOrder([f"L{i}" for i in range(n)]).compromise(c)
    a = data.draw(st.integers(0, n))
    b = data.draw(st.integers(0, n))
    assert (o.meet(a, b) == a) == o.leq(a, b)
    assert o.eq(o.meet(a, b), o.meet(b, a))
    assert o.eq(o.join(a, b), o.join(b, a))
    assert o.leq(o.meet(a, b), a) and o.leq(a, o.join(a, b))


@given(orders, st.data())
def test_compromise_only_destroys_trust(nc, data):
    n, c = nc
    base = LabelOrder([f"L{i}" for i in range(n)])
    o = base.compromise(c)
    for l in base.labels():
        if o.star(l):
            assert base.star(l)
        if l <= c and base.star(l):
            # a collapsed label no longer sits above bot
            assert not o.star(l) and o.leq(l, BOT)
    c2 = data.draw(st.integers(0, n))
    # compromising twice collapses everything up to the larger label
    assert o.compromise(c2) == base.compromise(max(c, c2))
