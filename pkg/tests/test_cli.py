import csv
import json
import subprocess
import sys
from importlib import resources

import pytest

from igabem.cli import EXIT_ASSEMBLY, EXIT_OK, EXIT_PARSE, EXIT_VERIFY, main
from igabem.model_io import read_results


def run_json(capsys, argv):
    code = main(argv + ["--json"])
    out = capsys.readouterr().out.strip().splitlines()
    return code, json.loads(out[-1]) if out else None


def test_solve_writes_files(tmp_path, capsys):
    code, out = run_json(capsys, ["solve", "example1", "-o", str(tmp_path), "--vtk"])
    assert code == EXIT_OK
    for name in ("results.json", "probes.csv", "timing.json", "boundary.vtk"):
        assert (tmp_path / name).exists()
    res = read_results(tmp_path / "results.json")
    assert res["model_hash"] == out["model_hash"]
    assert 0.98 < out["probes"]["top"][2] < 1.0
    assert (tmp_path / "boundary.vtk").read_text().startswith("# vtk DataFile Version 3.0")


def test_method_override_recorded(tmp_path, capsys):
    code, _ = run_json(capsys, ["solve", "example1", "-o", str(tmp_path), "--method", "newton", "--tol", "1e-8"])
    assert code == EXIT_OK
    solver = read_results(tmp_path / "results.json")["solver"]
    assert solver["method"] == "newton" and solver["tol"] == 1e-8


def test_missing_file_exit_code(tmp_path, capsys):
    path = tmp_path / "absent.json"
    assert main(["solve", str(path), "-o", str(tmp_path)]) == EXIT_PARSE
    assert str(path) in capsys.readouterr().err


def test_invalid_model_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"schema_version": 1, "nme": "x"}')
    code, out = run_json(capsys, ["info", str(path)])
    assert code == EXIT_PARSE and out["code"] == EXIT_PARSE


def test_invalid_sweep_parameter(tmp_path):
    assert main(["sweep", "example1", "--parameter", "radius", "-o", str(tmp_path)]) == EXIT_PARSE


def test_single_value_sweep(tmp_path, capsys):
    code, out = run_json(capsys, ["sweep", "example1", "--values", "3", "-o", str(tmp_path)])
    assert code == EXIT_OK and len(out["rows"]) == 1
    rows = list(csv.reader(open(tmp_path / "convergence.csv")))
    assert len(rows) == 2 and rows[1][0] == "3"


def test_info(capsys):
    code, out = run_json(capsys, ["info", "example2"])
    assert code == EXIT_OK
    assert out["unknowns"] == 174 and out["inclusions"][0]["grid_points"] == 12


def test_verify_and_negative_control(capsys):
    code, out = run_json(capsys, ["verify"])
    assert code == EXIT_OK
    checks = {c["check"]: c for c in out["checks"]}
    assert "closed_box_T" in checks and checks["closed_box_T"]["error"] < 1e-4
    code, out = run_json(capsys, ["verify", "--perturb-kernel", "1.01"])
    assert code == EXIT_VERIFY
    failed = {c["check"] for c in out["checks"] if not c["passed"]}
    assert {"bar_regular", "bar_singular"} <= failed


def test_grid_point_outside_domain(tmp_path, capsys):
    data = json.loads(resources.files("igabem.models").joinpath("example1.json").read_text())
    data["inclusions"][0]["start"] = [0.5, 0.5, 0.5]
    data["inclusions"][0]["end"] = [0.5, 0.5, 1.5]
    path = tmp_path / "m.json"
    path.write_text(json.dumps(data))
    assert main(["solve", str(path), "-o", str(tmp_path / "o")]) == EXIT_ASSEMBLY
    assert "outside the domain" in capsys.readouterr().err


def test_console_script_version():
    out = subprocess.run([sys.executable, "-m", "igabem.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("igabem ")


def test_log_level_env(monkeypatch, tmp_path, capsys):
    monkeypatch.setenv("IGABEM_LOG", "INFO")
    assert main(["info", "example1"]) == EXIT_OK
    assert "example1" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [[], ["frobnicate"]])
def test_usage_errors(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 2
