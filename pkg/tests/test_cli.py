import csv
import io
import json
import math
import subprocess
import sys

import pytest

from varbound.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_REPRODUCE, EXIT_USAGE, fmt, main, parse_scan, UsageError


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def test_bound_oscillator_human():
    code, text = run("bound", "-V", "r^2", "-d", "3", "-l", "0", "-n", "1", "-p", "2", "-t", "1", "-s", "1")
    assert code == EXIT_OK
    assert "E[0]  3.00000000000" in text
    assert "conditioning" in text


def test_bound_auto_basis_optimizes():
    code, text = run("bound", "-V", "r^2+1/r^2", "-n", "1", "--output", "json")
    report = json.loads(text)
    assert code == EXIT_OK
    assert report["diagnostics"]["optimize"] == "full"
    assert report["eigenvalues"][0] == pytest.approx(4.236067978, abs=1e-9)


def test_bound_perturbed_coulomb():
    code, text = run("bound", "-V", "-1/r + 1*r + 2*r^2", "-n", "8", "--optimize", "full", "--output", "json")
    assert code == EXIT_OK
    assert json.loads(text)["eigenvalues"][0] <= 3.656525 + 1e-5


def test_bound_scale_mode_and_csv():
    code, text = run("bound", "-V", "r^2", "-n", "2", "-p", "2", "-t", "1", "-s", "0.4", "--optimize", "scale", "--output", "csv")
    rows = list(csv.reader(io.StringIO(text)))
    assert code == EXIT_OK
    assert rows[0] == ["k", "eigenvalue"]
    assert float(rows[1][1]) == pytest.approx(3.0, abs=1e-10)


def test_json_round_trip(tmp_path):
    code, text = run("bound", "-V", "r^2 + 0.1/r^2.5", "-n", "3", "-p", "2", "-t", "1", "-s", "1", "--optimize", "full", "--output", "json")
    assert code == EXIT_OK
    path = tmp_path / "run.json"
    path.write_text(text)
    code, again = run("bound", "--from-json", str(path), "--output", "json")
    assert code == EXIT_OK
    assert again == text
    first, second = json.loads(text), json.loads(again)
    assert first["eigenvalues"] == second["eigenvalues"]


def test_human_numbers_have_nine_digits():
    for x in (3.0, 0.05, 4.236067977499, 201.21487, 1e-7):
        digits = fmt(x).replace(".", "").replace("-", "").split("e")[0].lstrip("0")
        assert len(digits) >= 9


@pytest.mark.parametrize(
    "argv, flag",
    [
        (["bound", "-V", "r^2 +* 1"], "-V/--potential"),
        (["bound", "-V", "r^2", "-d", "1"], "-d/-l"),
        (["bound", "-V", "r^2", "-n", "0"], "-n"),
        (["bound", "-V", "r^2", "-n", "2", "-k", "2"], "-k"),
        (["bound", "-V", "r^2", "-s", "-1"], "-s"),
        (["bound", "-V", "r^2 + 1/r^4", "-p", "2", "-t", "1"], "-n/-p/-t/-s"),
        (["bound"], "-V/--potential"),
    ],
)
def test_usage_errors_name_the_flag(argv, flag, capsys):
    code, _ = run(*argv)
    assert code == EXIT_USAGE
    assert flag in capsys.readouterr().err


def test_argparse_errors_exit_one():
    with pytest.raises(SystemExit) as info:
        main(["bound", "--bogus"])
    assert info.value.code == EXIT_USAGE


def test_numerical_failure_exit_code(capsys):
    code, _ = run("bound", "--potential=-1*r^2", "-n", "2", "-p", "2", "-t", "1", "--optimize", "scale")
    assert code == EXIT_NUMERICAL
    assert "numerical failure" in capsys.readouterr().err


def test_oracle_examples():
    code, text = run("oracle", "-V", "r^2+2/r^2", "-d", "3", "-l", "0", "-k", "0")
    assert code == EXIT_OK and float(text.split()[1]) == pytest.approx(5.0, abs=1e-6)
    code, text = run("oracle", "-V", "-1*r^2 + r^4", "-d", "3", "-l", "0", "-k", "1", "--output", "json")
    assert json.loads(text)["energy"] == pytest.approx(10.03865, abs=1e-5)
    code, text = run("oracle", "--exact", "-V", "r^2 + 0.140625/r^6", "--output", "json")
    report = json.loads(text)
    assert report["energy"] == 4.0 and report["method"] == "singular-anharmonic"


def test_oracle_exact_families():
    _, text = run("oracle", "--exact", "-V", "r^2 + 3/r^2", "-l", "2", "-k", "1", "--output", "json")
    assert json.loads(text)["energy"] == pytest.approx(2 * (3 + math.sqrt(9.25)))
    _, text = run("oracle", "--exact", "-V", "-1/r + 2*r + 4*r^2", "--output", "json")
    assert json.loads(text)["energy"] == pytest.approx(5.75)
    # kinetic factor 1/2: doubling gives -R'' - 2/r + 2B r + 2A r^2, solvable at B = sqrt(2A)
    _, text = run("oracle", "--exact", "--kinetic-factor", "0.5", "-V", "-1/r + 1*r + 0.5*r^2", "--output", "json")
    assert json.loads(text)["energy"] == pytest.approx(1.0)


def test_oracle_exact_rejects(capsys):
    assert run("oracle", "--exact", "-V", "r^3")[0] == EXIT_USAGE
    assert run("oracle", "--exact", "-V", "r^2 - 7/r^4 + 49/r^6")[0] == EXIT_USAGE
    assert "not satisfied" in capsys.readouterr().err


def test_scan_oscillator_minimum():
    code, text = run("scan", "-V", "r^2", "-n", "1", "-p", "2", "-t", "1", "--scan", "s:0.5:2:7")
    rows = list(csv.DictReader(io.StringIO(text)))
    assert code == EXIT_OK and len(rows) == 7
    best = min(rows, key=lambda r: float(r["E0"]))
    assert float(best["s"]) == 1.0 and float(best["E0"]) == 3.0
    assert [float(r["s"]) for r in rows] == sorted(float(r["s"]) for r in rows)


def test_scan_alpha2_dish():
    code, text = run("scan", "-V", "r^2 + 10/r^2", "-n", "1", "-p", "2", "-t", "6.4", "--scan", "s:0.8:1.2:41")
    rows = list(csv.DictReader(io.StringIO(text)))
    best = min(rows, key=lambda r: float(r["E0"]))
    assert abs(float(best["s"]) - 1.0) <= 0.011
    assert float(best["E0"]) == pytest.approx(8.403124, abs=1e-3)


def test_scan_coefficient_monotone():
    code, text = run("scan", "-V", "r^2 + 1/r^2.5", "-n", "4", "--scan", "a(-2.5):0.001:1000:7", "--log")
    values = [float(r["E0"]) for r in csv.DictReader(io.StringIO(text))]
    assert code == EXIT_OK and len(values) == 7
    assert all(b > a for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("spec", ["s:2:1:3", "s:0:1:3", "q:1:2:3", "s:1:2", "s:1:2:0", "s:1:2:x"])
def test_scan_invalid_grids(spec):
    with pytest.raises(UsageError):
        parse_scan(spec)


def test_scan_over_s_cannot_optimize():
    code, _ = run("scan", "-V", "r^2", "--scan", "s:0.5:2:3", "--optimize", "scale")
    assert code == EXIT_USAGE


def test_reproduce_alpha2_column():
    code, text = run("reproduce", "table1", "--only", "alpha=2")
    assert code == EXIT_OK
    assert "6/6 rows ok" in text


def test_reproduce_json_and_csv():
    code, text = run("reproduce", "--table", "table1", "--only", "alpha=2", "--only", "lam=1", "--output", "json")
    rows = json.loads(text)
    assert code == EXIT_OK and len(rows) == 1
    assert abs(rows[0]["computed"] - rows[0]["oracle"]) <= 1e-8
    code, text = run("reproduce", "table1", "--only", "alpha=2", "--only", "lam=10", "--output", "csv")
    parsed = list(csv.DictReader(io.StringIO(text)))
    assert parsed[0]["status"] == "pass"


def test_reproduce_failure_exit_code():
    code, _ = run("reproduce", "table1", "--only", "alpha=2", "--only", "lam=1", "--tol=-1e-3")
    assert code == EXIT_REPRODUCE


def test_reproduce_flagged_row_does_not_fail():
    code, text = run("reproduce", "table1", "--only", "alpha=0.5", "--only", "lam=1")
    assert code == EXIT_OK
    assert "[typo]" in text


def test_reproduce_unknown_table(capsys):
    assert run("reproduce", "table9")[0] == EXIT_USAGE
    assert run("reproduce")[0] == EXIT_USAGE
    assert run("reproduce", "table1", "--only", "alpha=7")[0] == EXIT_USAGE


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "varbound.cli", "bound", "-V", "r^2", "-p", "2", "-t", "1", "-s", "1", "--output", "json"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["eigenvalues"] == [3.0]
