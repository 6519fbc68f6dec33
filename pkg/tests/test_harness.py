import json

import pytest

from dfikit.harness import (AdversarySpec, Report, bench_scaling, compose, gen_adversary,
                            gen_program, insert_at, oracle_agreement, prop_adversary_completeness,
                            prop_exec_redundancy, prop_monotonicity, prop_preservation,
                            prop_strong_dfi, spine_points, synth_program)
from dfikit.labels import BOT, LabelOrder
from dfikit.parser import parse
from dfikit.syntax import UNIT, Fork, Let, Limit, New, Result, Var, size, walk

from conftest import program

ORDER = LabelOrder(["Low", "Medium", "High", "Top"])
LOW, MED, HIGH, TOP = 1, 2, 3, 4


def _trusts(p):
    return [q.trust if isinstance(q, New) else q.p for q in walk(p)
            if isinstance(q, (New, Limit))]


# -- reports

def test_report_lines_are_json():
    rep = Report("demo")
    rep.add("a", 1, "pass")
    rep.add("b", 2, "fail", witness={"why": "x"}, states=3)
    lines = [json.loads(s) for s in rep.lines().splitlines()]
    assert lines[1] == {"suite": "demo", "case": "b", "seed": 2, "result": "fail",
                        "witness": {"why": "x"}, "states": 3}
    assert not rep.ok and rep.count("pass") == 1 and len(rep.failures) == 1


# -- adversaries

def test_smallest_adversary():
    assert gen_adversary(AdversarySpec(LOW, 1), [], ORDER) == Limit(LOW, Result(UNIT))


@pytest.mark.parametrize("c", [BOT, LOW, MED])
def test_adversaries_stay_below_c(c):
    for seed in range(200):
        adv = gen_adversary(AdversarySpec(c, 1 + seed % 40, seed), [Var("h")], ORDER)
        assert isinstance(adv, Limit) and adv.p == c
        assert all(ORDER.leq(l, c) for l in _trusts(adv))


def test_adversaries_are_deterministic():
    spec = AdversarySpec(LOW, 20, 7)
    assert gen_adversary(spec, [Var("h")], ORDER) == gen_adversary(spec, [Var("h")], ORDER)


def test_insertion_keeps_the_program():
    x = Var("x")
    p = Let(x, Result(UNIT), Fork(Result(x), Result(UNIT)))
    points = spine_points(p)
    assert [path for path, _ in points] == [(), ("body",), ("body", "cont")]
    assert points[1][1] == (x,)
    q = insert_at(p, ("body",), Result(UNIT))
    assert q == Let(x, Result(UNIT), Fork(Result(UNIT), Fork(Result(x), Result(UNIT))))


def test_compose_grows_the_program():
    pf = program("example1")
    p = compose(pf, AdversarySpec(LOW, 10, 3))
    assert size(p) > size(pf.main)


def test_adversary_completeness_small():
    rep = prop_adversary_completeness(ORDER, [BOT, LOW, MED], n=60)
    assert rep.ok and rep.count("pass") == 180


# -- generated programs

def test_generated_programs_are_accepted_and_deterministic():
    from dfikit.checker_algo import typecheck_process
    for seed in range(3):
        p = gen_program(seed, ORDER)
        assert p == gen_program(seed, ORDER)
        assert typecheck_process({}, p, ORDER).accepted


# -- soundness properties

def test_preservation_on_examples():
    rep = prop_preservation(program("example1"), steps=60, seeds=range(3),
                            despite=LOW)
    assert rep.ok and rep.count("pass") == 3


def test_preservation_catches_a_bad_store():
    # negative control: a trust annotation the initial content cannot meet
    src = "labels Low < Top; do let v = [Low] unit in let o = new(v # {}) in unit"
    assert prop_preservation(parse(src.format("Low")), steps=20, seeds=range(2)).ok
    rep = prop_preservation(parse(src.format("Top")), steps=20, seeds=range(2))
    assert len(rep.failures) == 2
    assert rep.failures[0]["witness"]["step"] == 0


def test_strong_dfi_small():
    pf = program("example1")
    rep = prop_strong_dfi(pf, LOW, LOW, n_adv=5)
    assert rep.ok and len(rep.records) == 5


def test_strong_dfi_rejects_c_above_threshold():
    with pytest.raises(ValueError):
        prop_strong_dfi(program("example1"), MED, LOW, n_adv=1)


def test_exec_redundancy_on_lowexec():
    pf = program("example2_lowexec")
    rep = prop_exec_redundancy(pf, LOW, seeds=range(5))
    assert rep.ok and len(rep.records) == 6


def test_monotonicity_small():
    rep = prop_monotonicity(n=40, seed=3)
    assert rep.ok and len(rep.records) == 40


# -- oracle and benchmark

def test_oracle_agreement_small():
    rep = oracle_agreement(max_nodes=5, exhaustive_nodes=2, samples=60, max_hyps=1)
    assert rep.ok and rep.count("exhausted") == 0
    # frozen for these parameters
    typable = sum(1 for r in rep.records if r["typable"])
    assert (len(rep.records), typable) == FROZEN_ORACLE


FROZEN_ORACLE = (11105, 7802)


def test_synth_program_size():
    for n in (200, 1000):
        assert n <= size(synth_program(n, ORDER)) < n + 30


def test_bench_scaling_small():
    res = bench_scaling(sizes=(2000, 16000), labels=4, repeat=2)
    assert res["rows"][0]["size"] < res["rows"][1]["size"]
    assert res["exponent"] is not None and res["exponent"] < 1.5


def test_doubling_labels_keeps_time_close():
    a = bench_scaling(sizes=(4000,), labels=4, repeat=2)["rows"][0]
    b = bench_scaling(sizes=(4000,), labels=8, repeat=2)["rows"][0]
    assert b["seconds"] / a["seconds"] <= 2.5
