from hypothesis import given

from dfikit.labels import BOT, LabelOrder
from dfikit.syntax import (UNIT, Exec, Fork, Let, Limit, New, Pack, Read, Result,
                           Subst, Var, Write, bound_vars, box_pred, free_vars,
                           is_expression, rename, size, well_formed)

from strategies import programs

ORDER = LabelOrder(["Low", "High"])
LOW, HIGH = 1, 2
w, x, y, f_body = Var("w"), Var("x"), Var("y"), Read(Var("w"))


def test_bare_pack_is_not_an_expression():
    assert not is_expression(Pack(f_body))


def test_limited_pack_is_an_expression():
    assert is_expression(Limit(HIGH, Pack(f_body)))


def test_nested_pack_is_ill_formed():
    assert not well_formed(Pack(Pack(Result(UNIT))))
    assert not well_formed(Let(x, Pack(Pack(Result(UNIT))), Result(x)))
    assert well_formed(Pack(Limit(LOW, Pack(Result(UNIT)))))


def test_expression_grammar():
    assert is_expression(Fork(Read(w), Let(x, Read(w), Write(w, x))))
    assert not is_expression(Let(x, Pack(f_body), Result(x)))


def test_box_pred():
    assert box_pred(New(x, BOT), ORDER)
    assert not box_pred(New(x, LOW), ORDER)
    assert box_pred(Let(x, Read(w), Write(w, x)), ORDER)
    # annotations under a limit are not reached by the predicate
    assert box_pred(Limit(LOW, New(x, HIGH)), ORDER)


def test_box_pred_under_compromise():
    assert box_pred(New(x, LOW), ORDER.compromise(LOW))


def test_free_vars_examples():
    assert free_vars(Write(w, x)) == {w, x}
    assert free_vars(Let(x, Result(UNIT), Result(x))) == set()
    assert free_vars(Subst(x, y, HIGH, Result(x))) == {y}


def test_bound_vars():
    p = Let(x, Read(w), Fork(Let(y, Result(x), Result(y)), Exec(w)))
    assert bound_vars(p) == {x, y}


def test_let_shadowing_in_rename():
    z = Var("z", (0, 1))
    p = Let(x, Read(x), Result(x))
    assert rename(p, {x: z}) == Let(x, Read(z), Result(x))


def test_size_counts_every_node():
    assert size(Result(UNIT)) == 1
    assert size(Let(x, Pack(Read(w)), Fork(Exec(x), Result(UNIT)))) == 6


@given(programs(ORDER.labels(), (w,)))
def test_box_pred_distributes(p):
    q = Fork(p, p)
    assert box_pred(q, ORDER) == box_pred(p, ORDER)
    assert box_pred(Let(x, p, Result(x)), ORDER) == box_pred(p, ORDER)


@given(programs(ORDER.labels(), (w,)))
def test_generated_programs_are_well_formed(p):
    assert well_formed(p)
    assert free_vars(p) <= {w}


@given(programs(ORDER.labels(), (w,), expr=True))
def test_generated_expressions(f):
    assert is_expression(f)
    assert not is_expression(Pack(f))
    assert is_expression(Limit(LOW, Pack(f)))
