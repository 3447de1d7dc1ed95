from __future__ import annotations

import json
import subprocess
import sys

import numpy as np
import pytest

from irframes.cli import SCHEMA_VERSION, main
from irframes.geometry import PointSet


def report(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def without_timestamp(path):
    return [line for line in path.read_text().splitlines() if '"generated_at"' not in line]


@pytest.mark.parametrize("name,extra", [
    ("shannon_1d", ["--ensemble", "40"]),
    ("bspline_1d", ["--ensemble", "40"]),
    ("spiral_2d", ["--ensemble", "8"]),
])
def test_build_analyze_reconstruct(tmp_path, name, extra):
    out = tmp_path / "build"
    assert main(["build", name, "--out", str(out), *extra]) == 0
    rep = report(out / "report.json")
    assert rep["schema_version"] == SCHEMA_VERSION and rep["passed"]
    for f in ("manifest.json", "example_signal.grid", "example_coefficients.csv", "atom_profiles.csv",
              "frequency_supports.csv", "coefficient_energy.csv"):
        assert (out / f).is_file()
    # analyse the example signal and reconstruct it against itself
    an = tmp_path / "an"
    assert main(["analyze", name, "--signal", str(out / "example_signal.grid"), "--out", str(an)]) == 0
    rec = tmp_path / "rec"
    assert main(["reconstruct", name, "--coefficients", str(an / "coefficients.csv"),
                 "--truth", str(out / "example_signal.grid"), "--out", str(rec)]) == 0
    r = report(rec / "reconstruct.json")
    assert r["passed"] and r["report"]["relative_error"][0] < r["tolerance"]
    assert (rec / "reconstruction.grid").is_file() and (rec / "reconstruction.csv").is_file()


def test_validate_reports_every_check(tmp_path):
    assert main(["validate", "shannon_1d", "--ensemble", "20", "--out", str(tmp_path)]) == 0
    rep = report(tmp_path / "report.json")
    names = {c["name"] for c in rep["checks"]}
    assert {"covering_index", "rpu_bounds", "frame_ratio_sandwich", "reconstruction_error", "tight"} <= names
    assert all("exp_bounds" in l for l in rep["levels"])


@pytest.mark.parametrize("d", [1, 3])
def test_density_of_lattice_csv(tmp_path, capsys, d):
    path = tmp_path / "lattice.csv"
    PointSet((np.arange(-100 * d, 100 * d + 1) / d)[:, None]).to_csv(path)
    assert main(["density", "--points", str(path), "--r", "20", "--out", str(tmp_path)]) == 0
    rep = report(tmp_path / "density.json")
    assert abs(rep["lower_density"] - d) <= 2 / 20 and abs(rep["upper_density"] - d) <= 2 / 20
    assert rep["separation"] == pytest.approx(1 / d)
    printed = capsys.readouterr().out
    assert "lower_density" in printed and "separation" in printed


def test_density_gap_of_square_lattice(tmp_path):
    g = np.arange(-20, 21, dtype=float)
    path = tmp_path / "z2.csv"
    PointSet(np.array([[a, b] for a in g for b in g])).to_csv(path)
    assert main(["density", "--points", str(path), "--r", "5", "--probe-step", "0.01", "--out", str(tmp_path)]) == 0
    assert report(tmp_path / "density.json")["gap"] == pytest.approx(np.sqrt(2) / 2, abs=0.01)


def test_reports_are_deterministic(tmp_path):
    runs = []
    for i in range(2):
        out = tmp_path / str(i)
        assert main(["build", "bspline_1d", "--ensemble", "10", "--seed", "7", "--out", str(out)]) == 0
        runs.append(out)
    for f in ("report.json", "manifest.json"):
        a, b = (r / f for r in runs)
        assert without_timestamp(a) == without_timestamp(b)
        assert sum('"generated_at"' in line for line in a.read_text().splitlines()) == 1
    for f in ("example_coefficients.csv", "atom_profiles.csv", "example_signal.grid"):
        assert (runs[0] / f).read_bytes() == (runs[1] / f).read_bytes()


def test_seed_changes_the_ensemble(tmp_path):
    for s in (1, 2):
        assert main(["frame-bounds", "shannon_1d", "--ensemble", "5", "--seed", str(s),
                     "--out", str(tmp_path / str(s))]) == 0
    assert (tmp_path / "1" / "ratios.csv").read_text() != (tmp_path / "2" / "ratios.csv").read_text()


def test_other_commands(tmp_path):
    assert main(["covering", "spiral_2d", "--out", str(tmp_path)]) == 0
    assert report(tmp_path / "covering.json")["covering_index_ae"] == 1
    assert main(["rpu-check", "bspline_1d", "--j-min", "-2", "--j-max", "2", "--out", str(tmp_path)]) == 0
    rep = report(tmp_path / "rpu.json")
    assert rep["levels"] == ["-2", "-1", "0", "1", "2"] and rep["rpu_bounds"]["p_hat"] > 0
    assert main(["frame-bounds", "shannon_1d", "--param", "jitter=0.125", "--ensemble", "10",
                 "--out", str(tmp_path)]) == 0
    assert len((tmp_path / "ratios.csv").read_text().splitlines()) == 11


def test_json_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"entry": "shannon_1d", "params": {"j_range": [-1, 1]}}))
    assert main(["rpu-check", str(cfg), "--out", str(tmp_path)]) == 0
    assert report(tmp_path / "rpu.json")["levels"] == ["-1", "0", "1"]


def test_failed_certificate_exits_one(tmp_path):
    an = tmp_path / "an"
    assert main(["build", "shannon_1d", "--ensemble", "3", "--out", str(tmp_path)]) == 0
    main(["analyze", "shannon_1d", "--signal", str(tmp_path / "example_signal.grid"), "--out", str(an)])
    head, *rows = (an / "coefficients.csv").read_text().splitlines()
    # halve every coefficient: the reconstruction is off by one half
    rows = [",".join(r.split(",")[:2] + [repr(0.5 * float(v)) for v in r.split(",")[2:]]) for r in rows]
    (an / "broken.csv").write_text("\n".join([head, *rows]) + "\n")
    code = main(["reconstruct", "shannon_1d", "--coefficients", str(an / "broken.csv"),
                 "--truth", str(tmp_path / "example_signal.grid"), "--out", str(tmp_path / "rec")])
    assert code == 1
    assert not report(tmp_path / "rec" / "reconstruct.json")["passed"]


@pytest.mark.parametrize("argv", [
    ["build", "nonexistent"],
    ["rpu-check", "shannon_1d", "--param", "density_factor=0.5"],
    ["density", "--points", "missing.csv", "--r", "2"],
    ["frame-bounds", "shannon_1d", "--ensemble", "0"],
    ["rpu-check", "shannon_1d", "--param", "nonsense"],
])
def test_input_errors_exit_two(tmp_path, argv):
    assert main([*argv, "--out", str(tmp_path)]) == 2


def test_signal_on_wrong_grid_is_rejected(tmp_path):
    assert main(["build", "shannon_1d", "--ensemble", "3", "--out", str(tmp_path)]) == 0
    code = main(["analyze", "shannon_1d", "--param", "j_range=[-1,1]", "--signal",
                 str(tmp_path / "example_signal.grid"), "--out", str(tmp_path / "an")])
    assert code == 2


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "irframes.cli", "rpu-check", "shannon_1d", "--j-min", "0",
                          "--j-max", "1", "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("PASS shannon_1d")
