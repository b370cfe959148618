"""Shared fixtures: cached plans and the acceptance report."""

from __future__ import annotations

import copy
import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from robust_lapline import scenes  # noqa: E402
from robust_lapline.backoff import BackoffConfig  # noqa: E402
from robust_lapline.config import Scene  # noqa: E402
from robust_lapline.planner import build_nlp, plan_robust, solve  # noqa: E402
from robust_lapline.track import TrackGeometry  # noqa: E402
from robust_lapline.uncertainty import NoiseModel  # noqa: E402
from robust_lapline.vehicle import Car  # noqa: E402

DATA = Path(__file__).resolve().parents[1] / "data"

TRACKS = {
    "circle": (scenes.circle, 120),
    "oval": (scenes.oval, None),
    "chicane": (scenes.chicane, None),
}

_ACCEPTANCE: list[tuple[str, bool, str]] = []


def record(criterion: str, ok: bool, detail: str) -> None:
    _ACCEPTANCE.append((criterion, bool(ok), detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(_ACCEPTANCE, key=lambda r: _order(r[0])):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


def _order(name: str):
    head = name.split()[0].rstrip(".:")
    digits = "".join(ch for ch in head if ch.isdigit())
    return (int(digits) if digits else 99, name)


class PlanCache:
    """Solves each (track, variant, noise) once per session."""

    def __init__(self):
        self._scenes: dict = {}
        self._nlps: dict = {}
        self._plans: dict = {}
        self.timings: dict = {}

    def scene(self, track: str) -> Scene:
        if track not in self._scenes:
            builder, N = TRACKS[track]
            tr: TrackGeometry = builder()
            if N is None:
                N = int(round(tr.total_length / 1.3))
            self._scenes[track] = Scene(track=tr, car=Car(), N=N)
        return self._scenes[track]

    def nlp(self, track: str):
        if track not in self._nlps:
            self._nlps[track] = build_nlp(self.scene(track))
        return self._nlps[track]

    def nominal(self, track: str):
        key = (track, "NOM", "default")
        if key not in self._plans:
            nlp = self.nlp(track)
            nlp.set_backoffs()
            t0 = time.perf_counter()
            self._plans[key] = solve(nlp)
            self.timings[key] = time.perf_counter() - t0
        return self._plans[key]

    def plan(self, track: str, variant: str, noise: str = "default"):
        if variant == "NOM":
            return self.nominal(track)
        key = (track, variant, noise)
        if key not in self._plans:
            scene = self.scene(track)
            model = NoiseModel.default() if noise == "default" else NoiseModel.zero()
            nominal = copy.deepcopy(self.nominal(track))
            t0 = time.perf_counter()
            self._plans[key] = plan_robust(self.nlp(track), BackoffConfig(variant=variant),
                                           model, scene.horizon, nominal=nominal)
            self.timings[key] = time.perf_counter() - t0
        return self._plans[key]


@pytest.fixture(scope="session")
def plans() -> PlanCache:
    return PlanCache()


@pytest.fixture(scope="session")
def car() -> Car:
    return Car()


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA
