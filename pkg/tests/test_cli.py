import json

import numpy as np
import pytest

from robust_lapline.cli import main


@pytest.fixture(scope="module")
def tlc_run(tmp_path_factory, data_dir):
    out = tmp_path_factory.mktemp("tlc")
    code = main(["plan", "--scene", str(data_dir / "circle.toml"), "--variant", "tlc",
                 "--gamma", "3", "--horizon", "4", "--out", str(out)])
    return code, out


def test_plan_writes_files_and_manifest(tlc_run):
    code, out = tlc_run
    assert code == 0
    for name in ("tlc_ref.csv", "tlc_ribbon.csv", "tlc_backoffs.csv", "tlc_plan.json",
                 "tlc_solver.log", "plan_manifest.json"):
        assert (out / name).exists(), name
    manifest = json.loads((out / "plan_manifest.json").read_text())
    for key in ("command", "config_hash", "seed", "versions", "started", "finished", "outputs"):
        assert key in manifest
    assert manifest["outputs"]["reference"]["sha256"]


def test_tlc_backoffs_positive(tlc_run):
    _, out = tlc_run
    rows = np.genfromtxt(out / "tlc_backoffs.csv", delimiter=",", names=True, dtype=None,
                         encoding="utf-8")
    tlc = rows[rows["constraint"] == "TLC"]
    assert np.all(tlc["beta"] > 0)


@pytest.mark.parametrize("args", [
    ["plan", "--scene", "x.toml", "--variant", "noref"],
    ["plan", "--scene", "x.toml", "--variant", "fast"],
    ["plan", "--variant", "nom"],
    ["bogus"],
])
def test_usage_errors_exit_3(args, tmp_path):
    assert main(args + ["--out", str(tmp_path)] if args[0] == "plan" else args) == 3


def test_missing_scene_is_a_config_error(tmp_path):
    assert main(["plan", "--scene", str(tmp_path / "none.toml"), "--variant", "nom",
                 "--out", str(tmp_path)]) == 3


def test_validate_needs_reference_columns(tmp_path, data_dir):
    bad = tmp_path / "bad.csv"
    bad.write_text("k,s\n0,0\n")
    assert main(["validate", "--plan", str(bad), "--scene", str(data_dir / "circle.toml"),
                 "--out", str(tmp_path)]) == 3


def test_fit_and_metrics(tlc_run, tmp_path, data_dir):
    from robust_lapline.reference import read_reference
    from robust_lapline.synthetic import synthetic_laps
    from robust_lapline.telemetry import write_telemetry
    from robust_lapline.vehicle import Car

    _, out = tlc_run
    ref = out / "tlc_ref.csv"
    laps = tmp_path / "laps.csv"
    write_telemetry(laps, synthetic_laps(read_reference(ref), Car(), laps=3))
    code = main(["fit", "--telemetry", str(laps), "--axle", "front", "--start",
                 str(data_dir / "table2_start.toml"), "--out", str(tmp_path)])
    assert code in (0, 2)
    assert (tmp_path / "fit_front.txt").exists()
    assert main(["metrics", "--telemetry", str(laps), "--reference", str(ref), "--scene",
                 str(data_dir / "circle.toml"), "--out", str(tmp_path)]) == 0
    text = (tmp_path / "laps_summary.md").read_text()
    assert "Lap time" in text
    assert len((tmp_path / "laps_laps.csv").read_text().splitlines()) == 4
