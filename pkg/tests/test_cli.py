import csv
import io
import json
import subprocess
import sys

import pytest

from stochastic_chaining import cli
from stochastic_chaining.phase_retrieval import TABLE1_EPSILONS

PRINTED_STOCHASTIC = (0.4951, 0.3387, 0.2581, 0.2088, 0.1074, 0.0548, 0.0278)


def run(capsys, *argv):
    code = cli.run(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_help(capsys):
    code, out, _ = run(capsys, "--help")
    assert code == 0 and "usage" in out


def test_unknown_flag(capsys):
    code, _, err = run(capsys, "gaussian", "--sigma", "1", "--n", "5", "--bogus")
    assert code == 2 and "usage" in err


def test_missing_subcommand(capsys):
    assert run(capsys)[0] == 2


def test_gaussian(capsys):
    code, out, _ = run(capsys, "gaussian", "--sigma", "1", "--n", "100")
    result = json.loads(out)
    assert code == 0
    assert result["thm1"]["total"] < 0.13
    assert result["thm2"]["total"] < 0.11
    assert result["true_value"] == 0.02
    assert result["seed"] == cli.DEFAULT_SEED


def test_gaussian_with_trials(capsys):
    code, out, _ = run(capsys, "gaussian", "--sigma", "1", "--n", "50", "--trials", "20000", "--seed", "3")
    mc = json.loads(out)["mc"]
    assert code == 0 and mc["seed"] == 3 and mc["trials"] == 20000


def test_gaussian_bad_sigma(capsys):
    code, _, err = run(capsys, "gaussian", "--sigma", "-1", "--n", "10")
    assert code == 1 and "sigma" in err


@pytest.mark.parametrize("argv", [("phase", "--table1"), ("table1",)])
def test_table(capsys, argv):
    code, out, _ = run(capsys, *argv)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == len(TABLE1_EPSILONS) == 7
    for row, printed in zip(rows, PRINTED_STOCHASTIC):
        assert abs(float(row["stochastic_375"]) - printed) <= 5e-4


def test_phase_optimize(capsys):
    code, out, _ = run(capsys, "phase", "--epsilon", "0.05", "--optimize", "--baseline", "--true")
    result = json.loads(out)
    assert code == 0
    assert 3.5 <= result["gamma_star"] <= 4.0
    assert result["true_value"] < result["bound"]["total"] < result["baseline"]


def test_phase_requires_epsilon(capsys):
    assert run(capsys, "phase")[0] == 1


def test_phase_bad_bracket(capsys):
    assert run(capsys, "phase", "--epsilon", "0.05", "--optimize", "--bracket", "nonsense")[0] == 2
    assert run(capsys, "phase", "--epsilon", "0.05", "--optimize", "--bracket", "4,3")[0] == 1


def test_vc(capsys, tmp_path):
    out_file = tmp_path / "vc.csv"
    code, out, _ = run(capsys, "vc", "--n", "16,64", "--trials", "20", "--seed", "7", "--out", str(out_file))
    assert code == 0 and out == ""
    lines = out_file.read_text().splitlines()
    assert lines[0] == "# seed=7"
    rows = list(csv.DictReader(lines[1:]))
    assert [r["n"] for r in rows] == ["16", "64"]
    assert set(rows[0]) == {"n", "covering_bound_over_sqrt_n", "mc_gen_estimate", "mc_std_error"}


def test_vc_custom_class(capsys, tmp_path):
    path = tmp_path / "cls.txt"
    path.write_text("0 0 1\n0 1 1\n1 1 1\n")
    code, out, _ = run(capsys, "vc", "--class", f"custom:{path}", "--n", "8", "--trials", "10")
    assert code == 0 and out.splitlines()[1].startswith("n,")


def test_vc_unknown_class(capsys):
    assert run(capsys, "vc", "--class", "circles", "--n", "8")[0] == 1


def test_validate(capsys):
    code, out, _ = run(capsys, "validate", "--suite", "dv", "--example", "gaussian", "--trials", "20000", "--seed", "2")
    report = json.loads(out)
    assert code == 0 and report["passed"] and report["seed"] == 2
    assert [c["k"] for c in report["checks"]] == [-2, 0, 2]


def test_validate_bad_suite(capsys):
    assert run(capsys, "validate", "--suite", "all", "--example", "gaussian")[0] == 2


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "stochastic_chaining.cli", "gaussian", "--sigma", "2", "--n", "4"],
        capture_output=True,
        text=True,
        check=True,
    )
    assert json.loads(proc.stdout)["true_value"] == 2.0
