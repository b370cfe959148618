import numpy as np
import pytest

from robust_lapline.config import load_car, load_scene, load_tire, scene_from_dict
from robust_lapline.errors import ConfigError, SchemaError
from robust_lapline.telemetry import TelemetryLog, read_telemetry, write_telemetry
from robust_lapline.vehicle import TIRE_FRONT, TIRE_START


def test_demo_scene(data_dir):
    scene = load_scene(data_dir / "demo.toml")
    assert scene.track.total_length == pytest.approx(755.57, abs=0.01)
    assert scene.N == round(scene.track.total_length / 1.3)
    assert scene.horizon == 4 and scene.backoff.gamma == 3.0


def test_csv_scene(data_dir):
    scene = load_scene(data_dir / "oval.toml")
    assert scene.track.total_length == pytest.approx(600.0, rel=1e-6)


def test_vehicle_and_start_files(data_dir):
    car = load_car(data_dir / "vehicle.toml")
    assert car.front == TIRE_FRONT
    assert load_tire(data_dir / "table2_start.toml", "front") == TIRE_START


def test_digest_tracks_settings(data_dir):
    scene = load_scene(data_dir / "circle.toml")
    assert scene.digest() == load_scene(data_dir / "circle.toml").digest()
    assert scene.digest() != scene.with_(horizon=5).digest()


@pytest.mark.parametrize("data", [
    {},
    {"track": {"builder": "hexagon"}},
    {"track": {"builder": "circle"}, "backoff": {"horizon": 0}},
    {"track": {"builder": "circle"}, "noise": {"Q_diag": [1, 2]}},
    {"track": {"builder": "circle"}, "metrics": {"ey_frame": "wheel"}},
    {"track": {"builder": "circle"}, "vehicle": {"chassis": {"mass": 1}}},
])
def test_bad_scenes(data):
    with pytest.raises(ConfigError):
        scene_from_dict(data)


def test_telemetry_round_trip(tmp_path):
    log = TelemetryLog({"t": np.arange(5) * 0.1, "u": np.linspace(10, 11, 5)})
    write_telemetry(tmp_path / "t.csv", log)
    back = read_telemetry(tmp_path / "t.csv")
    assert np.allclose(back["u"], log["u"])


def test_telemetry_validation(tmp_path):
    with pytest.raises(SchemaError):
        TelemetryLog({"t": [0.0, 0.0, 1.0]})
    with pytest.raises(SchemaError):
        TelemetryLog({"t": [0.0, 1.0], "u": [1.0]})
    with pytest.raises(SchemaError):
        TelemetryLog({"t": [0.0, 1.0]})["u"]
