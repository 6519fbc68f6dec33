"""End-to-end acceptance checks, one per criterion.

Each test prints a single ``criterion N: PASS|FAIL ...`` line (visible in the
``pytest -v`` log) and then asserts.  Tolerances are the contract's; sizes
are full scale, so this file dominates the suite's runtime.
"""

import random
import time

import pytest

from dfikit.checker_algo import typecheck
from dfikit.corpus import hypothesis_envs, hypothesis_types, small_order
from dfikit.dfi import make_monitor
from dfikit.harness import (bench_scaling, gen_program, monitor_policy, oracle_agreement,
                            prop_adversary_completeness, prop_exec_redundancy,
                            prop_monotonicity, prop_no_adversary, prop_preservation,
                            prop_strong_dfi)
from dfikit.labels import BOT, LabelOrder
from dfikit.machine import explore, load
from dfikit.parser import ProgramFile
from dfikit.syntax import Var
from dfikit.types import Eff

from conftest import ATTACKS, GOLDEN_ACCEPTED, program

ORDER = LabelOrder(["Low", "Medium", "High", "Top"])
LOW, MED = 1, 2
GENERATED = 50


def report(capsys, n: int, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def corpus():
    """The accepted corpus: golden programs plus generated well-typed ones."""
    progs = [(name, program(name)) for name in GOLDEN_ACCEPTED]
    for seed in range(GENERATED):
        progs.append((f"gen{seed}", ProgramFile(ORDER, [], gen_program(seed, ORDER,
                                                                       despite=LOW))))
    return progs


def test_criterion_1_golden_examples(capsys):
    notes = []
    ok = True
    for name, want in (("example1", True), ("example2", False)):
        t0 = time.perf_counter()
        pf = program(name)
        v = typecheck(pf, pf.order.label("Low"))
        dt = time.perf_counter() - t0
        ok &= v.accepted == want and dt < 1.0
        if not want:
            d = v.diagnostics[0] if v.diagnostics else {}
            # the exec of setup.exe by the High administrator
            ok &= (d.get("rule"), d.get("line"), d.get("col")) == ("execute", 15, 59)
            notes.append(f"{name} rejected by ({d.get('rule')}) at "
                         f"{d.get('line')}:{d.get('col')} in {dt:.3f}s")
        else:
            notes.append(f"{name} accepted in {dt:.3f}s")
    report(capsys, 1, ok, "; ".join(notes))


def test_criterion_2_example2_variants(capsys):
    t0 = time.perf_counter()
    notes = []
    ok = True
    for name in ("example2_lowexec", "example2_highsetup"):
        pf = program(name)
        ok &= typecheck(pf, LOW).accepted
        home = prop_strong_dfi(pf, LOW, MED, n_adv=100, depth=12, watch={"home"}, name=name)
        trusted = prop_strong_dfi(pf, LOW, LOW, n_adv=100, depth=12, name=name)
        ok &= home.ok and trusted.ok and len(home.records) == len(trusted.records) == 100
        notes.append(f"{name}: typechecks, {len(home.failures)} violations on home@Medium, "
                     f"{len(trusted.failures)} on trusted@Low "
                     f"({home.count('bounded') + trusted.count('bounded')} bounded)")
    dt = time.perf_counter() - t0
    ok &= dt < 120
    report(capsys, 2, ok, "; ".join(notes) + f"; {dt:.1f}s")


def test_criterion_3_attack_corpus(capsys):
    notes = []
    ok = True
    for name, rule in sorted(ATTACKS.items()):
        pf = program(name)
        v = typecheck(pf, LOW)
        got = v.diagnostics[0]["rule"] if v.diagnostics else None
        ex = explore(load(pf), 12, make_monitor(monitor_policy(pf, LOW)))
        ok &= (not v.accepted) and got == rule and bool(ex.violations)
        notes.append(f"{name}: ({got}), violation at depth {ex.depth_reached}"
                     if ex.violations else f"{name}: ({got}), no violation")
    report(capsys, 3, ok, "; ".join(notes))


def test_criterion_4_adversary_completeness(capsys):
    t0 = time.perf_counter()
    rng = random.Random(4)
    types = hypothesis_types(ORDER)
    envs = [{}] + [{Var(f"h{i}"): Eff(rng.choice(types), rng.choice(list(ORDER.labels())))
                    for i in range(3)} for _ in range(2)]
    total = bad = 0
    for k, env in enumerate(envs):
        rep = prop_adversary_completeness(ORDER, [BOT, LOW, MED], n=1000, seed=k, env=env)
        total += len(rep.records)
        bad += len(rep.failures)
    dt = time.perf_counter() - t0
    # 1000 per compromised label in each environment (the first is empty)
    ok = bad == 0 and total == 3000 * len(envs) and dt < 60 * len(envs)
    report(capsys, 4, ok, f"{total - bad}/{total} adversaries typecheck despite C "
                          f"(C in bot, Low, Medium; {len(envs)} environments) in {dt:.1f}s")


def test_criterion_5_monotonicity(capsys):
    rep = prop_monotonicity(n=500, seed=5)
    ok = rep.ok and len(rep.records) == 500
    report(capsys, 5, ok, f"{rep.count('pass')}/{len(rep.records)} expressions keep "
                          f"effect E meet P at every lower P")


def test_criterion_6_preservation(capsys, corpus):
    t0 = time.perf_counter()
    runs = bad = 0
    first = None
    for name, pf in corpus:
        rep = prop_preservation(pf, steps=100, seeds=range(20), despite=LOW, name=name)
        runs += len(rep.records)
        bad += len(rep.failures)
        first = first or (rep.failures[0] if rep.failures else None)
    ok = bad == 0 and runs == 20 * len(corpus)
    detail = f"{runs - bad}/{runs} runs well-typed at every step ({len(corpus)} programs)"
    if first:
        detail += f"; first failure {first}"
    report(capsys, 6, ok, detail + f" in {time.perf_counter() - t0:.1f}s")


def test_criterion_7_strong_dfi(capsys, corpus):
    t0 = time.perf_counter()
    explored = bad = bounded = 0
    for name, pf in corpus:
        rep = prop_strong_dfi(pf, LOW, LOW, n_adv=1000, depth=12, budget=10 ** 6, name=name)
        explored += len(rep.records)
        bad += len(rep.failures)
        bounded += rep.count("bounded")
    control = prop_no_adversary(program("example2"), LOW, depth=12)
    ok = bad == 0 and explored == 1000 * len(corpus) and not control.ok
    report(capsys, 7, ok, f"{bad} violations over {explored} compositions "
                          f"({bounded} bounded, rest proved); example2 control "
                          f"{'violates' if not control.ok else 'DOES NOT violate'}; "
                          f"{time.perf_counter() - t0:.1f}s")


def test_criterion_8_exec_redundancy(capsys, corpus):
    checked = bad = 0
    for name, pf in corpus:
        for n_adv in (0, 1):
            rep = prop_exec_redundancy(pf, LOW, seeds=range(20), n_adv=n_adv, name=name)
            checked += len(rep.records)
            bad += len(rep.failures)
    ok = bad == 0
    report(capsys, 8, ok, f"{checked - bad}/{checked} traces and explorations: trusted "
                          f"execs never above their object, optimized verdicts identical")


def test_criterion_9_complexity(capsys):
    t0 = time.perf_counter()
    res = bench_scaling((1000, 10_000, 100_000), labels=4)
    dt = time.perf_counter() - t0
    ok = res["exponent"] <= 1.3 and dt < 60
    rows = ", ".join(f"{r['size']}:{r['seconds']:.3f}s" for r in res["rows"])
    report(capsys, 9, ok, f"exponent {res['exponent']:.3f} ({rows}); bench {dt:.1f}s")


def test_criterion_10_oracle_equivalence(capsys):
    # Enumerating every program of up to 9 nodes is out of reach (tens of
    # billions per environment), so this is a bounded substitute: every
    # program of up to 4 nodes in a spread of environments, then programs
    # drawn uniformly from the exact enumeration at each size up to 9, each
    # in a uniformly drawn environment of at most two hypotheses.
    t0 = time.perf_counter()
    order = small_order()
    envs = list(hypothesis_envs(order, 2))
    rng = random.Random(10)
    spread = ([e for e in envs if len(e) == 0]
              + rng.sample([e for e in envs if len(e) == 1], 5)
              + rng.sample([e for e in envs if len(e) == 2], 5))
    small = oracle_agreement(max_nodes=4, exhaustive_nodes=4, samples=0, envs=spread)
    sampled = oracle_agreement(max_nodes=9, exhaustive_nodes=0, samples=60_000, seed=10)
    total = len(small.records) + len(sampled.records)
    bad = len(small.failures) + len(sampled.failures)
    exhausted = small.count("exhausted") + sampled.count("exhausted")
    ok = bad == 0 and exhausted == 0
    report(capsys, 10, ok, f"bounded: {total - bad - exhausted}/{total} agree, "
                           f"{exhausted} budget-exhausted ({len(small.records)} exhaustive "
                           f"to 4 nodes in {len(spread)} environments, "
                           f"{len(sampled.records)} uniform samples to 9 nodes); "
                           f"{time.perf_counter() - t0:.1f}s")
