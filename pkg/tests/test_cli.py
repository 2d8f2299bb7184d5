import subprocess
import sys

import numpy as np
import pytest

from hodgehx.cli import main
from hodgehx.experiments import ExperimentConfig, check_manufactured_identities, run_table
from hodgehx.mesh import read_mesh


def test_solve_rerun_byte_identical(tmp_path, capsys):
    args = ["solve", "--levels", "2", "--out", str(tmp_path)]
    assert main(args) == 0
    first = (tmp_path / "torus_curl_c1.csv").read_bytes()
    assert main(args) == 0
    assert (tmp_path / "torus_curl_c1.csv").read_bytes() == first
    text = first.decode()
    assert text.startswith("# hodgehx curl table\n# config: surface=torus,levels=2,problem=curl,c=1.0,")
    header = text.splitlines()[2].split(",")
    assert header == ["level", "N", "n_dofs", "family", "iterations", "criterion", "converged"]
    assert "seed=20240101" in text
    assert capsys.readouterr().out == 2 * text


def test_div_problem_and_c(tmp_path):
    assert main(["solve", "--problem", "div", "--levels", "1", "--c", "10000", "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "torus_div_c10000.csv").read_text().splitlines()
    assert rows[3].split(",")[3] == "RT0" and rows[3].endswith("true")


def test_nonconvergence_exit_code(tmp_path):
    assert main(["solve", "--levels", "1", "--maxit", "2", "--out", str(tmp_path)]) == 1


def test_invalid_arguments(tmp_path, capsys):
    assert main(["solve", "--c", "0", "--out", str(tmp_path)]) == 2
    assert "c must be positive" in capsys.readouterr().err
    assert main(["harmonic", "--surface", "s3", "--out", str(tmp_path)]) == 2
    assert main(["convergence", "--surface", "torus", "--out", str(tmp_path)]) == 2
    with pytest.raises(SystemExit):
        main(["solve", "--surface", "klein"])


def test_mesh_command(tmp_path):
    assert main(["mesh", "--surface", "s3", "--levels", "2", "--out", str(tmp_path)]) == 0
    m = read_mesh(tmp_path / "s3_level2.mesh")
    assert m.n_elements == 1024
    assert "s3_meshes.csv" in {p.name for p in tmp_path.iterdir()}


def test_export_harmonic_vtk(tmp_path):
    assert main(["export", "--levels", "2", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "torus_level1.vtk").read_text()
    assert "CELLS 768 " in text
    assert text.count("VECTORS harmonic_") == 2


def test_export_mesh_only_and_3d(tmp_path):
    assert main(["export", "--problem", "none", "--levels", "1", "--out", str(tmp_path)]) == 0
    assert "CELL_DATA" not in (tmp_path / "torus_level0.vtk").read_text()
    assert main(["export", "--surface", "s3", "--problem", "curl", "--levels", "1", "--out", str(tmp_path)]) == 0
    vals = np.loadtxt(tmp_path / "s3_level1_u_N0.csv", delimiter=",")
    assert vals.shape == (128, 4)


def test_harmonic_table(tmp_path):
    rows, text, _ = run_table(ExperimentConfig(problem="harmonic", levels=1, output_dir=str(tmp_path)))
    assert rows[0]["n_fields"] == 2 and rows[0]["converged"]
    assert 30 <= rows[0]["iterations"] <= 60


def test_convergence_table_small(tmp_path):
    cfg = ExperimentConfig(surface="s3", problem="convergence", levels=2, output_dir=str(tmp_path))
    rows, _, path = run_table(cfg)
    assert path.name == "s3_convergence_c1.csv"
    assert np.isnan(rows[0]["order_N0"]) and rows[1]["order_N0"] > 0.5
    assert rows[1]["error_N0"] < rows[0]["error_N0"]


def test_manufactured_identities():
    dev = check_manufactured_identities()
    assert max(dev.values()) < 1e-4


def test_console_script(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "hodgehx.cli", "solve", "--levels", "1", "--out", str(tmp_path)],
        capture_output=True,
        text=True,
        env={"HODGEHX_THREADS": "1", "PATH": ""},
    )
    assert out.returncode == 0 and "# hodgehx curl table" in out.stdout
