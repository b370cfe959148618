"""TOML scene and vehicle configuration.

A scene names a track (CSV file or analytic builder), the grid, the noise
model, the back-off settings and optional vehicle/tire files. Paths are
resolved relative to the scene file.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import tomli

from . import scenes
from .backoff import BackoffConfig
from .errors import ConfigError, LaplineError
from .planner.nlp import Limits, Weights
from .track import TrackGeometry, load_track
from .uncertainty import NoiseModel
from .vehicle import TIRE_FRONT, TIRE_REAR, AxleTireParams, Car, VehicleParams

BUILDERS = {"circle": scenes.circle, "oval": scenes.oval, "chicane": scenes.chicane,
            "straight": scenes.straight}

_CHASSIS_KEYS = ("m", "I_z", "L", "wd_front", "h_g", "brake_balance_front", "delta_max",
                 "X2a_max", "P_max", "g")


def read_toml(path) -> dict:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            return tomli.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def tire_from_table(table: dict, where: str = "tire") -> AxleTireParams:
    missing = [n for n in AxleTireParams.NAMES if n not in table]
    if missing:
        raise ConfigError(f"{where}: missing keys {missing}")
    extra = set(table) - set(AxleTireParams.NAMES)
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")
    p = AxleTireParams(*(float(table[n]) for n in AxleTireParams.NAMES))
    problems = p.validate()
    if problems:
        raise ConfigError(f"{where}: " + "; ".join(problems))
    return p


def load_tire(path, axle: str | None = None) -> AxleTireParams:
    """Tire vector from ``[tire]`` or ``[tire.<axle>]`` of a TOML file."""
    data = read_toml(path)
    table = data.get("tire", data)
    if axle is not None and axle in table and isinstance(table[axle], dict):
        table = table[axle]
    return tire_from_table(table, f"{path}")


def car_from_dict(data: dict) -> Car:
    chassis = dict(data.get("chassis", {}))
    unknown = set(chassis) - set(_CHASSIS_KEYS) - {"mu_x_front", "mu_x_rear"}
    if unknown:
        raise ConfigError(f"chassis: unknown keys {sorted(unknown)}")
    base = VehicleParams()
    kwargs = {k: float(chassis[k]) for k in _CHASSIS_KEYS if k in chassis}
    kwargs["mu_x"] = (float(chassis.get("mu_x_front", base.mu_x[0])),
                      float(chassis.get("mu_x_rear", base.mu_x[1])))
    try:
        vp = base.with_(**kwargs)
    except LaplineError as exc:
        raise ConfigError(str(exc)) from exc
    tires = data.get("tire", {})
    front = tire_from_table(tires["front"], "tire.front") if "front" in tires else TIRE_FRONT
    rear = tire_from_table(tires["rear"], "tire.rear") if "rear" in tires else TIRE_REAR
    return Car(vp, front, rear)


def load_car(path) -> Car:
    return car_from_dict(read_toml(path))


def _matrix(table: dict, key: str, default: np.ndarray) -> np.ndarray:
    if f"{key}_diag" in table:
        diag = np.asarray(table[f"{key}_diag"], dtype=float)
        if diag.shape != (6,):
            raise ConfigError(f"{key}_diag needs 6 entries")
        return np.diag(diag)
    if key in table:
        mat = np.asarray(table[key], dtype=float)
        if mat.size != 36:
            raise ConfigError(f"{key} needs 36 entries (row-major)")
        return mat.reshape(6, 6)
    return default


@dataclass(frozen=True)
class Scene:
    """Everything needed to plan one variant."""

    track: TrackGeometry = field(repr=False)
    car: Car
    N: int
    degree: int = 3
    horizon: int = 4
    noise: NoiseModel = field(default_factory=NoiseModel.default, repr=False)
    backoff: BackoffConfig = field(default_factory=BackoffConfig)
    weights: Weights = Weights()
    limits: Limits = Limits()
    max_sweeps: int = 5
    max_iter: int = 3000
    ey_frame: str = "com"
    driver_offset: float = 0.0
    source: dict = field(default_factory=dict, repr=False)

    def with_(self, **changes) -> "Scene":
        return replace(self, **changes)

    def digest(self) -> str:
        """Hash of the effective settings (track arrays included)."""
        h = hashlib.sha256()
        for arr in (self.track.s, self.track.x, self.track.y, self.track.w_left,
                    self.track.w_right, self.noise.Q, self.noise.P0_bar):
            h.update(np.ascontiguousarray(arr, dtype=float).tobytes())
        meta = dict(N=self.N, degree=self.degree, horizon=self.horizon,
                    variant=self.backoff.variant, p=self.backoff.p, gamma=self.backoff.gamma,
                    weights=asdict(self.weights), limits=asdict(self.limits),
                    vehicle=self.car.vp.to_dict(), front=asdict(self.car.front),
                    rear=asdict(self.car.rear), sweeps=self.max_sweeps,
                    max_iter=self.max_iter, closed=self.track.closed)
        h.update(json.dumps(meta, sort_keys=True).encode())
        return h.hexdigest()


def scene_from_dict(data: dict, base_dir: Path = Path(".")) -> Scene:
    tr = data.get("track")
    if not isinstance(tr, dict):
        raise ConfigError("scene needs a [track] table")
    closed = bool(tr.get("closed", True))
    if "path" in tr:
        track = load_track(base_dir / tr["path"], closed=closed,
                           width_deduction=float(tr.get("width_deduction", 0.0)))
    elif "builder" in tr:
        name = tr["builder"]
        if name not in BUILDERS:
            raise ConfigError(f"unknown track builder {name!r}; expected {sorted(BUILDERS)}")
        params = {k: v for k, v in tr.items() if k not in ("builder", "closed")}
        try:
            track = BUILDERS[name](**params)
        except TypeError as exc:
            raise ConfigError(f"track builder {name}: {exc}") from exc
    else:
        raise ConfigError("[track] needs either 'path' or 'builder'")

    grid = data.get("grid", {})
    if "N" in grid:
        N = int(grid["N"])
    else:
        N = int(round(track.total_length / float(grid.get("spacing", 1.3))))
    degree = int(grid.get("degree", 3))

    if "vehicle" in data and "path" in data["vehicle"]:
        car = load_car(base_dir / data["vehicle"]["path"])
    else:
        car = car_from_dict(data.get("vehicle", {}))

    nz = data.get("noise", {})
    default = NoiseModel.default()
    try:
        noise = NoiseModel(_matrix(nz, "Q", default.Q), _matrix(nz, "P0", default.P0_bar))
    except LaplineError as exc:
        raise ConfigError(str(exc)) from exc

    bo = data.get("backoff", {})
    gamma = bo.get("gamma", 3.0)
    p = bo.get("p", 0.99)
    backoff = BackoffConfig(variant=str(bo.get("variant", "NOM")),
                            p=p if isinstance(p, dict) else {"TLC": p, "FLC": p},
                            gamma=None if gamma in (None, "none", 0) else float(gamma))
    horizon = int(bo.get("horizon", 4))
    if horizon < 1:
        raise ConfigError("horizon must be at least 1")

    w = data.get("weights", {})
    weights = Weights(steer=float(w.get("steer", Weights.steer)),
                      slack=float(w.get("slack", Weights.slack)))
    solver = data.get("solver", {})
    out = data.get("output", {})
    ey_frame = str(data.get("metrics", {}).get("ey_frame", "com"))
    if ey_frame not in ("com", "ribbon"):
        raise ConfigError("metrics.ey_frame must be 'com' or 'ribbon'")
    return Scene(track=track, car=car, N=N, degree=degree, horizon=horizon, noise=noise,
                 backoff=backoff, weights=weights,
                 max_sweeps=int(solver.get("max_sweeps", 5)),
                 max_iter=int(solver.get("max_iter", 3000)),
                 ey_frame=ey_frame, driver_offset=float(out.get("driver_offset", 0.0)),
                 source=data)


def load_scene(path) -> Scene:
    path = Path(path)
    return scene_from_dict(read_toml(path), path.parent)
