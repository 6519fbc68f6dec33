import json
import shutil
import subprocess

import pytest

from dfikit.cli import main
from dfikit.parser import parse

from conftest import PROGRAMS


def path(name):
    return str(PROGRAMS / f"{name}.dfi")


def dfi(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_typecheck_accepts_example1(capsys):
    code, out, _ = dfi(capsys, "typecheck", path("example1"), "--despite", "Low")
    assert code == 0 and out.startswith("accepted")


def test_typecheck_rejects_example2_with_a_position(capsys):
    code, out, _ = dfi(capsys, "typecheck", path("example2"), "--despite", "Low")
    assert code == 1
    assert ":15:59: rejected by (execute)" in out


def test_typecheck_json(capsys):
    code, out, _ = dfi(capsys, "typecheck", path("example2"), "--despite", "Low", "--json")
    rec = json.loads(out)
    assert code == 1 and rec["accepted"] is False
    assert rec["diagnostics"][0]["rule"] == "execute"


def test_oracle_agrees_on_example1(capsys):
    code, out, _ = dfi(capsys, "oracle", path("example1"), "--despite", "Low", "--json")
    rec = json.loads(out)
    assert code == 0 and rec["typable"] and rec["algo_accepted"]


def test_run_example2_violates_at_some_seed(capsys):
    code, out, _ = dfi(capsys, "run", path("example2"), "--monitor", "Low", "--seed", "20")
    assert code == 1 and "VIOLATION" in out


def test_run_without_monitor_succeeds(capsys):
    code, out, _ = dfi(capsys, "run", path("example1"), "--scheduler", "round-robin")
    assert code == 0 and out.splitlines()[-1].startswith("-- ")


def test_run_json_lines(capsys):
    code, out, _ = dfi(capsys, "run", path("example1"), "--json")
    recs = [json.loads(s) for s in out.splitlines()]
    assert recs[-1]["end"] in {"Terminal", "AllBlocked", "StepLimit"}
    assert all("event" in r for r in recs[:-1])


def test_explore_finds_example2_violation(capsys):
    code, out, _ = dfi(capsys, "explore", path("example2"), "--monitor", "Low",
                       "--watch", "home")
    assert code == 1 and "VIOLATION" in out


def test_fuzz_example1_is_clean(capsys):
    code, out, _ = dfi(capsys, "fuzz", path("example1"), "--despite", "Low",
                       "--adversaries", "10")
    assert code == 0 and "0 with violations" in out


def test_fuzz_rejects_threshold_below_compromise(capsys):
    code, _, err = dfi(capsys, "fuzz", path("example1"), "--despite", "Medium",
                       "--monitor", "Low")
    assert code == 2 and "at least" in err


def test_fmt_round_trips(capsys):
    code, out, _ = dfi(capsys, "fmt", path("example1"))
    assert code == 0
    again = parse(out)
    assert again.main == parse((PROGRAMS / "example1.dfi").read_text()).main


def test_parse_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.dfi"
    bad.write_text("labels A; do let x = unit x")
    code, _, err = dfi(capsys, "typecheck", str(bad))
    assert code == 2 and "bad.dfi:" in err
    code, out, _ = dfi(capsys, "typecheck", str(bad), "--json")
    assert code == 2 and json.loads(out)["error"]["code"] == "syntax"


def test_unknown_label_and_missing_file(capsys):
    assert dfi(capsys, "typecheck", path("example1"), "--despite", "Nope")[0] == 2
    assert dfi(capsys, "typecheck", "/nonexistent.dfi")[0] == 2
    assert dfi(capsys, "frobnicate")[0] == 2


def test_bench(capsys):
    code, out, _ = dfi(capsys, "bench", "--sizes", "500,2000", "--json")
    res = json.loads(out)
    assert code == 0 and len(res["rows"]) == 2


@pytest.mark.skipif(shutil.which("dfi") is None, reason="console script not installed")
def test_console_script():
    proc = subprocess.run(["dfi", "typecheck", path("example2"), "--despite", "Low"],
                          capture_output=True, text=True)
    assert proc.returncode == 1
