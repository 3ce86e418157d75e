import json
import subprocess
import sys

import pytest
import scipy.io

from wg3d.analysis import StudyReport
from wg3d.cli import EXIT_CONFIG, EXIT_MISMATCH, EXIT_OK, EXIT_SOLVER, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_run_csv_matches_table1(capsys, tmp_path):
    code, out, _ = run(capsys, "run", "--case", "1", "--mesh", "uniform:4x4x4", "--rho", "6", "--h-def", "diag",
                       "--levels", "3")
    assert code == EXIT_OK
    rep = StudyReport.from_csv(out)
    assert [r.mesh for r in rep.rows] == ["4x4x4", "8x8x8", "16x16x16"]
    assert rep.rows[1].norms.h1_db == pytest.approx(4.8626e-02, rel=1e-4)


def test_run_perturbed_table_to_file(capsys, tmp_path):
    path = tmp_path / "t.txt"
    code, out, _ = run(capsys, "run", "--case", "2", "--mesh", "uniform:4x4x4", "--boundary", "perturbed",
                       "--levels", "2", "--format", "table", "-o", str(path))
    assert code == EXIT_OK and out == ""
    text = path.read_text()
    assert "3.5512e-02" in text and "Rate (last)" in text


def test_compare_round_trip(capsys, tmp_path):
    report = tmp_path / "r.csv"
    run(capsys, "run", "--case", "1", "--mesh", "uniform:4x4x4", "--rho", "6", "--h-def", "diag", "--levels", "4",
        "-o", str(report))
    code, out, _ = run(capsys, "compare", str(report), "table01")
    assert code == EXIT_OK and out.startswith("PASS")
    code, out, _ = run(capsys, "compare", str(report), str(report), "--rtol", "0")
    assert code == EXIT_OK
    code, out, _ = run(capsys, "compare", str(report), "table07")
    assert code == EXIT_MISMATCH and out.startswith("FAIL")
    code, _, err = run(capsys, "compare", str(report), "table01", "--column-rtol", "nope=1")
    assert code == EXIT_CONFIG
    code, _, err = run(capsys, "compare", str(report), "no-such-table")
    assert code == EXIT_CONFIG and "table01" in err


def test_compare_schema_mismatch_is_config_error(capsys, tmp_path):
    report = tmp_path / "r.csv"
    run(capsys, "run", "--case", "1", "--mesh", "uniform:2x2x2", "-o", str(report))
    code, _, err = run(capsys, "compare", str(report), "table01")
    assert code == EXIT_CONFIG and "row count" in err


def test_solver_failure_flushes_partial_report(capsys):
    code, out, err = run(capsys, "run", "--case", "2", "--mesh", "uniform:4x4x4", "--levels", "3",
                         "--max-iter", "30")
    assert code == EXIT_SOLVER
    assert "level 1" in err
    rows = StudyReport.from_csv(out).rows
    assert [r.mesh for r in rows] == ["4x4x4"]


@pytest.mark.parametrize("argv", [
    ["run", "--case", "1", "--mesh", "cube:4"],
    ["run", "--case", "1", "--mesh", "uniform:4x4x4", "--rho", "0"],
    ["run", "--case", "11", "--mesh", "uniform:4x4x4"],
    ["run", "--case", "1", "--mesh", "uniform:4x4x4", "--levels", "0"],
    ["run", "--case", "1", "--mesh", "uniform:4x4x4", "--refine", "1"],
    ["run", "--case", "4", "--mesh", "uniform:2x2x2", "--boundary", "perturbed"],
    ["run", "--case", "7", "--mesh", "uniform:3x3x3"],
    ["run", "--mesh", "uniform:2x2x2"],
    ["run", "--problem", "/nonexistent.json", "--mesh", "uniform:2x2x2"],
    ["frobnicate"],
])
def test_config_errors(capsys, argv):
    with pytest.raises(SystemExit) as info:
        raise SystemExit(main(argv))
    assert info.value.code == EXIT_CONFIG


def test_bad_thread_setting(capsys, monkeypatch):
    monkeypatch.setenv("WG3D_THREADS", "many")
    code, _, err = run(capsys, "references")
    assert code == EXIT_CONFIG and "WG3D_THREADS" in err
    monkeypatch.setenv("WG3D_THREADS", "1")
    code, out, _ = run(capsys, "references")
    assert code == EXIT_OK and "table01_case1_rho6_uniform_l2" in out


def test_problem_file(capsys, tmp_path):
    path = tmp_path / "lin.json"
    path.write_text(json.dumps({"u": "1 + 2*x - 3*y + z", "A": [[2, 0, 0], [0, 1, 0], [0, 0, 3]]}))
    code, out, _ = run(capsys, "run", "--problem", str(path), "--mesh", "random:4:seed=1", "--rho", "0.5")
    assert code == EXIT_OK
    assert max(StudyReport.from_csv(out).rows[0].norms.as_tuple()) < 1e-9


def test_dump_matrix(capsys, tmp_path):
    path = tmp_path / "a.mtx"
    code, out, _ = run(capsys, "dump-matrix", "--case", "1", "--mesh", "uniform:3x3x3", str(path))
    assert code == EXIT_OK and "nonzeros" in out
    assert scipy.io.mmread(str(path)).shape == (54, 54)
    other = tmp_path / "b.mtx"
    run(capsys, "run", "--case", "1", "--mesh", "uniform:3x3x3", "--dump-matrix", str(other))
    assert (scipy.io.mmread(str(other)) != scipy.io.mmread(str(path))).nnz == 0


def test_selftest(capsys):
    code, out, _ = run(capsys, "selftest", "--trials", "50")
    assert code == EXIT_OK
    assert out.strip().endswith("6/6 checks passed")
    assert out.count("[PASS]") == 6


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "wg3d", "run", "--case", "9", "--mesh", "graded:2x2x2"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.startswith("level,mesh,h,dofs")
