import csv
import json
import subprocess
import sys

import pytest

from gradcurl_vem import build_cube_mesh, save_mesh
from gradcurl_vem.cli import main


def test_run_csv(tmp_path, capsys):
    out = tmp_path / "r.csv"
    assert main(["run", "--mesh", "builtin:cube:4", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 1
    assert rows[0]["mesh"] == "cube4" and int(rows[0]["ndof_with_faces"]) == 1040
    assert rows[0]["rate_b"] == ""
    assert "cube4" in capsys.readouterr().out


def test_study_csv(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["study", "--meshes", "builtin:cube:2,builtin:cube:3", "--out", str(out),
                 "--solver", "direct"]) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 2
    assert rows[0]["rate_b"] == "" and rows[1]["rate_b"] != ""


def test_study_json(tmp_path):
    out = tmp_path / "s.json"
    assert main(["study", "--meshes", "builtin:cube:2,builtin:cube:3", "--out", str(out)]) == 0
    assert len(json.loads(out.read_text())["rows"]) == 2


def test_verify(capsys):
    assert main(["verify", "--mesh", "builtin:cube:2"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines and all(line.startswith("PASS") for line in lines)


def test_meshinfo_file(tmp_path, capsys):
    p = tmp_path / "m.json"
    save_mesh(build_cube_mesh(2), p)
    assert main(["meshinfo", "--mesh", str(p)]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["n_cells"] == 8 and info["regularity_pass"]


def test_dump_and_vtk(tmp_path):
    dump, vtu = tmp_path / "s.txt", tmp_path / "c.vtu"
    assert main(["run", "--mesh", "builtin:cube:2", "--dump-matrix", str(dump), "--vtk", str(vtu)]) == 0
    assert dump.read_text().startswith("# ")
    text = vtu.read_text()
    assert 'Name="curl_psi_h"' in text and 'NumberOfCells="8"' in text


@pytest.mark.parametrize("argv", [
    [],
    ["bogus"],
    ["run"],
    ["run", "--mesh", "nope.json"],
    ["run", "--mesh", "builtin:cube:0"],
    ["run", "--mesh", "builtin:cube:2", "--tol", "-1"],
    ["run", "--mesh", "builtin:cube:2", "--quad", "0"],
    ["run", "--mesh", "builtin:cube:2", "--maxiter", "0"],
    ["study", "--meshes", "builtin:cube:2"],
    ["run", "--mesh", "builtin:cube:2", "--stab-edge-power", "3"],
])
def test_usage_errors(argv, capsys):
    assert main(argv) == 2


def test_bad_mesh_file(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{")
    assert main(["meshinfo", "--mesh", str(p)]) == 2


def test_solver_failure_exit_1(capsys):
    assert main(["run", "--mesh", "builtin:cube:3", "--maxiter", "1"]) == 1
    assert "error" in capsys.readouterr().err


def test_help_exit_0():
    assert main(["--help"]) == 0


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "gradcurl_vem", "verify", "--mesh", "builtin:cube:2"],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
