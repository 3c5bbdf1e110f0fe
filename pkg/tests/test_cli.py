import json
import subprocess
import sys

import pytest

from bieberbach.cli import main


def run(*args):
    return subprocess.run([sys.executable, "-m", "bieberbach", *args], capture_output=True, text=True)


def test_spectrum_golden_csv():
    p = run("spectrum", "--manifold", "T3", "--phi", "pi/2", "--eps1", "0.5", "--eps2", "0.5",
            "--eps3", "0.5", "--lambda-max", "1", "--format", "csv")
    assert p.returncode == 0, p.stderr
    assert p.stdout.splitlines() == ["eigenvalue,multiplicity_num,multiplicity_den",
                                     "-0.8660254037844386,8,1", "0.8660254037844386,8,1"]


def test_eta_g4():
    p = run("eta", "--manifold", "G4", "--eps2", "0", "--eps3", "0", "--delta", "+1")
    assert p.returncode == 0, p.stderr
    rec = json.loads(p.stdout)
    assert rec["formula"] == "3/2" and rec["oracle"] == "3/2"
    assert rec["discrepancy_flag"] is False


def test_eta_g2_flagged():
    rec = json.loads(run("eta", "--manifold", "G2", "--eps2", "0", "--eps3", "0", "--delta", "1").stdout)
    assert rec["formula"] == "-1" and rec["printed_table"] == "1" and rec["discrepancy_flag"] is True


def test_negative_fraction_argument(capsys):
    assert main(["eta", "--alpha", "2", "--beta", "-1/2"]) == 0
    assert json.loads(capsys.readouterr().out)["formula"] == "-1/2"


def test_output_byte_identical(tmp_path):
    args = ["spectrum", "--manifold", "G4", "--eps2", "0.5", "--eps3", "0.5",
            "--delta", "-1", "--lambda-max", "6", "--format", "json"]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(args + ["--output", str(a)]) == 0
    assert main(args + ["--output", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("args", [
    ["spectrum", "--manifold", "G3", "--eps1", "0.3", "--lambda-max", "2"],
    ["spectrum", "--manifold", "G3", "--eps1", "0.5", "--delta", "-1", "--lambda-max", "2"],
    ["spectrum", "--manifold", "T3", "--lambda-max", "2"],
    ["spectrum", "--manifold", "G3", "--phi", "pi/4", "--eps1", "0.5", "--lambda-max", "2"],
    ["eta", "--alpha", "1"],
    ["action", "--manifold", "G5", "--delta", "1"],
])
def test_usage_errors_exit_2(args):
    with pytest.raises(SystemExit) as exc:
        main(args)
    assert exc.value.code == 2


def test_computation_error_exit_1():
    p = run("action", "--manifold", "G5", "--delta", "-1", "--lambda", "5", "--lambda-max", "10")
    assert p.returncode == 1
    assert "TruncationTooTight" in p.stderr


def test_action_record(capsys):
    assert main(["action", "--manifold", "G3", "--eps1", "0.5", "--lambda", "5"]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["manifold"] == "G3" and rec["kind"] == "gaussian"
    assert abs(rec["residual"]) < 1e-9 * rec["value"]


def test_action_odd_leading_term_is_eta(capsys):
    assert main(["action", "--manifold", "G4", "--eps2", "0", "--eps3", "0", "--delta", "1",
                 "--lambda", "2", "--kind", "exp_odd"]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["leading_term"] == 1.5
    assert abs(rec["residual"]) < 0.2


def test_table(capsys):
    assert main(["table", "--which", "both"]) == 0
    out = json.loads(capsys.readouterr().out)
    flags = {(r["manifold"], r["column"]): r["discrepancy_flag"] for r in out["eta_table"]}
    assert flags[("G2", "A")] and not flags[("G3", "A")]
    for row in out["leading"]["rows"]:
        assert abs(row["scaled_difference"]) < 1e-6 * row["torus_leading"]


def test_verify_exit_status_tracks_failures():
    p = run("verify", "--suite", "all", "--lambda", "10")
    reps = [json.loads(line) for line in p.stdout.splitlines()]
    statuses = {r["check_name"]: r["status"] for r in reps}
    assert p.returncode == (1 if "fail" in statuses.values() else 0)
    assert statuses["eta_table"] == "flagged"
    assert all(s in ("pass", "flagged") for name, s in statuses.items() if name != "odd_eta_term")


def test_verify_single_suite_passes():
    p = run("verify", "--suite", "even", "--format", "csv")
    assert p.returncode == 0
    assert p.stdout.splitlines()[0] == "check_name,status,inputs,metrics,notes"
