import csv
import io

import pytest

from hjbgll.cli import FIELDS, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_single_run(capsys):
    code, out, _ = run(capsys, "--case", "1", "--scheme", "sl", "--order", "2", "--nbm", "4", "--h", "0.01",
                       "--controls", "8", "--tol", "1e-6")
    assert code == 0
    assert out.splitlines()[0] == ",".join(FIELDS)
    (row,) = rows(out)
    assert row["case"] == "1" and row["scheme"] == "sl" and row["hhat"] == ""
    assert float(row["err"]) < 0.5 and row["converged"] == "true"


def test_output_is_stable(capsys, tmp_path):
    args = ["--case", "4", "--scheme", "fd", "--order", "2", "--nbm", "2", "--h", "0.1", "--controls", "5",
            "--max-iter", "50"]
    _, first, _ = run(capsys, *args)
    code, _, _ = run(capsys, *args, "--out", str(tmp_path / "o.csv"))
    second = (tmp_path / "o.csv").read_text()
    assert code == 0
    strip = lambda t: [{k: v for k, v in r.items() if k != "seconds"} for r in rows(t)]
    assert strip(first) == strip(second)
    assert rows(first)[0]["converged"] == "false" and rows(first)[0]["hhat"] == "0.1"


@pytest.mark.parametrize(
    "argv",
    [["--case", "9"], [], ["--case", "1", "--scheme", "xx"], ["study", "--case", "1", "--nbm", ""],
     ["study", "--case", "1"], ["--case", "1", "--h", "-1"], ["--case", "1", "--controls", "1"]],
)
def test_usage_errors(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 2 and out == "" and err


def test_missing_problem_file(capsys, tmp_path):
    code, _, err = run(capsys, "--problem", str(tmp_path / "nope.txt"))
    assert code == 2 and "error" in err


def test_solver_failure(capsys):
    code, out, err = run(capsys, "--case", "1", "--h", "2.5", "--nbm", "2", "--controls", "3")
    assert code == 3 and out == "" and "StepTooLargeError" in err


def test_problem_file(capsys, tmp_path):
    path = tmp_path / "heat.txt"
    path.write_text("dim = 1\nlower = 0\nupper = 1\ncontrols = 0, 1\nsigma[1,1] = 0.5\nc = 1\nf = 1\n"
                    "dirichlet = 1\nexact = 1\n")
    code, out, _ = run(capsys, "--problem", str(path), "--nbm", "4", "--h", "0.05", "--controls", "2")
    assert code == 0
    (row,) = rows(out)
    assert row["case"] == "heat" and float(row["err"]) < 1e-5


def test_study_rows_and_refinement(capsys):
    code, out, _ = run(capsys, "study", "--case", "1", "--orders", "1,2", "--nbm", "4,8", "--h", "0.005",
                       "--controls", "16", "--tol", "1e-6")
    assert code == 0
    table = rows(out)
    assert [(r["nbm"], r["order"]) for r in table] == [("4", "1"), ("4", "2"), ("8", "1"), ("8", "2")]
    err = {(r["order"], r["nbm"]): float(r["err"]) for r in table}
    for order in ("1", "2"):
        assert err[(order, "8")] < err[(order, "4")]
