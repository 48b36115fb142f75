from __future__ import annotations

import json

import pytest

from crnspace.cli import main
from crnspace.io import corpus_path


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_validate_ok_and_missing_file(capsys):
    code, out, _ = run(capsys, "validate", "gene0", "--samples", "50")
    assert code == 0 and "support rule: ok" in out
    code, _, err = run(capsys, "validate", "no_such_network")
    assert code == 2 and "error" in err


def test_parse_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.crn"
    bad.write_text("species A\nreaction A -> @ mass_action(1)\n")
    code, _, err = run(capsys, "decompose", str(bad))
    assert code == 2 and "line 2" in err


def test_unknown_flag_is_input_error(capsys):
    assert main(["decompose", "gene0", "--nope"]) == 2


def test_decompose_text(capsys):
    code, out, _ = run(capsys, "decompose", "atp")
    assert code == 0
    assert "restricted: S2" in out and "|E_b| = 1" in out


def test_decompose_error_code(tmp_path, capsys):
    f = tmp_path / "big.crn"
    f.write_text("species A B\ninit A=300000\nreaction A -> B @ mass_action(1)\nreaction B -> A @ mass_action(1)\n")
    out = tmp_path / "r.json"
    code, _, _ = run(capsys, "decompose", str(f), "--json", str(out))
    assert code == 2
    assert json.loads(out.read_text())["error"]["code"] == "state-space-too-large"


def test_irreducible_exit_codes(capsys):
    code, out, _ = run(capsys, "irreducible", "gene0")
    assert code == 0 and "verdict: Complete" in out
    code, out, _ = run(capsys, "irreducible", "twoS", "--oracle-box", "40")
    assert code == 1
    assert "verdict: Partial" in out
    assert out.count("boundary-open: size") == 2


def test_report_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["report", "vilar", "--json", str(a)]) == 0
    assert main(["report", "vilar", "--json", str(b)]) == 0
    capsys.readouterr()
    ra = json.loads(a.read_text())
    assert a.read_text() == b.read_text()
    assert ra["schema_version"] == 1
    assert ra["classification"]["dims"] == [4, 5, 0]
    assert ra["verdict"] == "Complete"


def test_report_from_path(capsys):
    code, out, _ = run(capsys, "report", str(corpus_path("gene4.crn")), "--json", "-")
    assert code == 0 and json.loads(out)["certificates"][0]["A"] == ["M"]


def test_stationary(capsys):
    code, out, _ = run(capsys, "stationary", "birth_death")
    assert code == 0 and "ComplexBalanced" in out and "S=3" in out
    code, out, _ = run(capsys, "stationary", "gene0")
    assert code == 1


def test_simulate_single_and_ensemble(tmp_path, capsys):
    out = tmp_path / "t.txt"
    assert main(["simulate", "gene0", "--t", "2", "--seed", "5", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# seed 5") and lines[1] == "# time G_off G_on M P"
    assert lines[2] == "0.0 1 0 0 0"
    code, text, _ = run(capsys, "simulate", "gene0", "--t", "2", "--traj", "20", "--threads", "2")
    data = json.loads(text)
    assert code == 0 and data["trajectories"] == 20 and data["method"] == "SSA"


def test_simulate_sssa_needs_fast_directive(capsys):
    code, _, err = run(capsys, "simulate", "gene0", "--t", "1", "--sssa")
    assert code == 2 and "fast" in err


def test_verify(capsys):
    code, out, _ = run(capsys, "verify", "gene4")
    assert code == 0 and "Consistent" in out


@pytest.mark.parametrize("box", ["a,b", "-1"])
def test_bad_box(box, capsys):
    assert main(["verify", "gene0", "--box", box]) == 2
