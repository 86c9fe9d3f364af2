import json
import re
import subprocess
import sys

import pytest

from golden_cases import CASES, GOLDEN, run

FLOAT = re.compile(r"(?<![\w/])\d+\.\d+(?![\w/])")


@pytest.mark.parametrize("name", sorted(CASES))
def test_golden_output(name):
    code, text = run(CASES[name])
    assert code == 0
    assert text == (GOLDEN / name).read_text(encoding="utf-8")


def test_repeat_runs_identical():
    argv = ["scan", "--A", "base(3)", "--B", "base(3)", "--from", "0", "--to", "30"]
    assert run(argv) == run(argv)


def test_outputs_have_no_floats():
    for name in CASES:
        body = (GOLDEN / name).read_text(encoding="utf-8")
        # the version string is the only dotted number allowed
        body = body.replace("0.1.0", "")
        assert not FLOAT.search(body), name


def test_json_reports_parse():
    for name in CASES:
        if name.endswith(".json"):
            doc = json.loads((GOLDEN / name).read_text(encoding="utf-8"))
            assert doc.get("format", "rankone-report") == "rankone-report"


def test_scheme_parse(capsys):
    assert run(["scheme", "parse", "--scheme", "chacon3"])[0] == 0


def test_tower_show_csv():
    code, text = run(["tower", "show", "--stage", "2"])
    assert code == 0
    lines = text.splitlines()
    assert lines[0] == "# rankone-report v1 tower"
    assert "h=4" in lines[1] and "w=2/9" in lines[1]
    assert sum(1 for x in lines if x.startswith("pool,")) >= 1


def test_liminf_label_is_quoted():
    code, text = run(["liminf", "--A", "base(2)", "--B", "base(2)", "--from", "1", "--to", "5"])
    assert code == 0
    assert text.splitlines()[-1].endswith('"finite-horizon minimum, not a liminf certificate"')


def test_out_file(tmp_path):
    path = tmp_path / "scan.json"
    code, text = run(["scan", "--from", "0", "--to", "3", "--format", "json", "--out", str(path)])
    assert code == 0 and text == ""
    assert json.loads(path.read_text())["rows"]


@pytest.mark.parametrize("argv", [
    ["scan", "--A", "base("],
    ["scan", "--scheme", "block:3"],
    ["scan", "--eps", "0.5"],
    ["demo", "nosuch"],
    ["demo", "thm6", "--A", "interval(0,1/4)"],
    ["sweep", "--seq", "arith:1,2"],
    ["joining", "--target", "1/2,x"],
])
def test_usage_errors_exit_1(argv):
    try:
        code = run(argv)[0]
    except SystemExit as exc:
        code = exc.code
    assert code == 1


def test_argparse_error_exit_1():
    proc = subprocess.run([sys.executable, "-m", "rankone.cli", "scan", "--bogus"],
                          capture_output=True, text=True)
    assert proc.returncode == 1


def test_resource_cap_exit_3():
    code, _ = run(["scan", "--A", "interval(0,1/2)", "--B", "base(2)", "--from", "5", "--to", "5",
                   "--stage-cap", "2", "--eps", "1/1000000000"])
    assert code == 3


def test_refuted_exit_2(monkeypatch):
    import rankone.cli as cli
    from rankone.experiments import DemoResult

    monkeypatch.setattr(cli, "run_demo", lambda name, engine, params:
                        DemoResult(name, {}, ["forced"], refuted=["forced"]))
    assert run(["demo", "thm1"])[0] == 2
