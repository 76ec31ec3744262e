import csv
import io
import json
import subprocess
import sys

import jsonschema
import pytest

from kml import cli, hodge
from kml.errors import SolverError
from kml.mesh import build_box_mesh, save_mesh
from kml.schemas import report_schema

from conftest import side


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def report(argv, capsys):
    code, out, err = run(argv + ["--no-timestamp"], capsys)
    data = json.loads(out)
    jsonschema.validate(data, report_schema(data["command"]))
    return code, data


def test_betti_annulus(capsys):
    code, data = report(["betti", "--gen", "annulus:16,2", "--gt", "none"], capsys)
    assert code == 0
    assert data["result"]["dims"] == [1, 1, 0]


def test_constants_dirichlet_square(capsys):
    code, data = report(["constants", "--gen", "box:2,16", "--gt", "all", "--q", "0"], capsys)
    assert code == 0
    assert data["result"]["c_p"] == pytest.approx(0.22508, rel=0.02)
    assert data["result"]["c1"] is not None


def test_verify_case_i_exit_zero(capsys):
    code, data = report(["verify", "--gen", "box:2,16", "--gt", "side:y-", "--case", "i",
                         "--samples", "1000", "--seed", "7"], capsys)
    assert code == 0
    assert data["result"]["passed"]


def test_verify_violation_exit_two(capsys):
    # a slack of -99% shrinks the bound below the observed ratios
    code, data = report(["verify", "--gen", "box:2,4", "--gt", "side:y-", "--samples", "50", "--seed", "1",
                         "--slack", "-0.99", "--no-eigen"], capsys)
    assert code == 2
    assert data["exit_code"] == 2 and not data["result"]["passed"]


def test_mesh_and_decompose_reports(tmp_path, capsys):
    code, data = report(["mesh", "--gen", "annulus:8,1", "--gt", "none", "--save", str(tmp_path / "m.json")], capsys)
    assert code == 0 and data["result"]["counts"][2] == 16
    code, data = report(["mesh", "--mesh", str(tmp_path / "m.json")], capsys)
    assert code == 0 and data["result"]["betti"] == [1, 1, 0]
    code, data = report(["decompose", "--gen", "box:2,4", "--gt", "side:x-", "--q", "1",
                         "--parts-out", str(tmp_path / "parts")], capsys)
    assert code == 0 and data["result"]["reconstruction_residual"] < 1e-10
    assert (tmp_path / "parts" / "coexact.json").exists()


@pytest.mark.parametrize("argv", [
    ["betti", "--gen", "box:5,2", "--gt", "none"],
    ["betti", "--gen", "box:2,2", "--gt", "side:q+"],
    ["verify", "--gen", "box:2,4", "--gt", "none", "--case", "i", "--seed", "0"],
    ["verify", "--gen", "box:2,4", "--gt", "all", "--case", "ii", "--seed", "0", "--mu", "identity"],
    ["verify", "--gen", "box:2,4", "--gt", "all"],
    ["sweep"],
    ["nonsense"],
])
def test_usage_errors_exit_one(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 1
    assert err


def test_numerical_failure_exit_three(monkeypatch, capsys):
    def boom(*args, **kwargs):
        raise SolverError("eigensolver did not converge", {"iterations": 0})

    monkeypatch.setattr(hodge, "betti_pair", boom)
    code, _, err = run(["betti", "--gen", "box:2,2", "--gt", "none"], capsys)
    assert code == 3
    assert "iterations" in err


def test_mesh_parse_error_exit_one(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"dimension": 2, "vertices": [[0, 0]], "cells": [[0, 1, 2]]}')
    code, _, err = run(["betti", "--mesh", str(bad), "--gt", "none"], capsys)
    assert code == 1 and "cells[0]" in err


def test_mesh_file_with_tags_round_trip(tmp_path, capsys):
    cx = build_box_mesh(2, 4)
    (tmp_path / "box.json").write_bytes(save_mesh(cx, side(cx, 1, 0.0)))
    code, data = report(["betti", "--mesh", str(tmp_path / "box.json")], capsys)
    assert code == 0 and data["result"]["dims"] == [0, 0, 0]


def test_reproducible_bytes(tmp_path, capsys):
    argv = ["verify", "--gen", "box:2,8", "--gt", "side:y-", "--samples", "200", "--seed", "11", "--threads", "1",
            "--no-timestamp"]
    outs = []
    for name in ("a.json", "b.json"):
        assert cli.main(argv + ["--out", str(tmp_path / name)]) == 0
        outs.append((tmp_path / name).read_bytes())
    assert outs[0] == outs[1]


def test_timestamp_present_by_default(capsys):
    code, out, _ = run(["betti", "--gen", "box:2,2", "--gt", "all"], capsys)
    assert code == 0 and "timestamp" in json.loads(out)


def test_sweep_csv(tmp_path, capsys):
    path = tmp_path / "sweep.csv"
    code, data = report(["sweep", "--gen", "box:2,4", "--gen", "box:2,8", "--gen", "box:2,16", "--gt", "all",
                         "--q", "0", "--no-sharp", "--csv", str(path)], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(path.read_text())))
    assert [r["mesh"] for r in rows] == ["box:2,4", "box:2,8", "box:2,16"]
    cp = [float(r["c_p"]) for r in rows]
    target = 0.22507907903927651
    assert abs(cp[2] - target) < abs(cp[1] - target) < abs(cp[0] - target)
    assert all(b >= a - 1e-3 for a, b in zip(cp, cp[1:]))


def test_sweep_annulus_harmonic_column(capsys):
    code, data = report(["sweep", "--gen", "annulus:8,1", "--gen", "annulus:16,2", "--gt", "none", "--q", "0",
                         "--no-sharp"], capsys)
    assert code == 0
    assert [r["harmonic_dims"] for r in data["result"]["rows"]] == ["1;1;0", "1;1;0"]


@pytest.mark.parametrize("command", ["mesh", "betti", "constants", "decompose", "verify", "sweep"])
def test_schema_command_is_valid_schema(command, capsys):
    code, out, _ = run(["schema", command], capsys)
    assert code == 0
    jsonschema.Draft202012Validator.check_schema(json.loads(out))


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "kml.cli", "betti", "--gen", "box:2,2", "--gt", "all",
                           "--no-timestamp"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"]["dims"] == [0, 0, 1]
