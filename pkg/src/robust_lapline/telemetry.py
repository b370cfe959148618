"""Telemetry log container and its CSV form."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SchemaError

CORE_CHANNELS = ("t", "u", "v", "r", "x", "y", "psi", "delta")
WHEEL_CHANNELS = tuple(f"{q}_{w}" for q in ("alpha", "fz", "fy") for w in ("fl", "fr", "rl", "rr"))
TELEMETRY_COLUMNS = CORE_CHANNELS + WHEEL_CHANNELS


@dataclass
class TelemetryLog:
    """Time-stamped channels; ``t`` strictly increasing."""

    channels: dict = field(default_factory=dict)

    def __post_init__(self):
        self.channels = {k: np.asarray(v, dtype=float) for k, v in self.channels.items()}
        if "t" in self.channels:
            t = self.channels["t"]
            if t.size > 1 and np.any(np.diff(t) <= 0):
                raise SchemaError("telemetry time stamps must be strictly increasing")
        lengths = {len(v) for v in self.channels.values()}
        if len(lengths) > 1:
            raise SchemaError("telemetry channels differ in length")

    def __getitem__(self, name):
        try:
            return self.channels[name]
        except KeyError as exc:
            raise SchemaError(f"telemetry lacks channel {name!r}") from exc

    def __len__(self):
        return len(next(iter(self.channels.values()))) if self.channels else 0

    def has(self, *names) -> bool:
        return all(n in self.channels for n in names)

    def require(self, *names) -> None:
        missing = [n for n in names if n not in self.channels]
        if missing:
            raise SchemaError(f"telemetry lacks channels {missing}")

    def slice(self, start: int, stop: int) -> "TelemetryLog":
        return TelemetryLog({k: v[start:stop] for k, v in self.channels.items()})

    @property
    def sample_rate(self) -> float:
        t = self["t"]
        return float((len(t) - 1) / (t[-1] - t[0])) if len(t) > 1 else 0.0


def read_telemetry(path) -> TelemetryLog:
    """CSV with a header row; known channels are parsed, unknown ones kept."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration as exc:
            raise SchemaError(f"{path} is empty") from exc
        rows = [r for r in reader if r]
    if len(set(header)) != len(header):
        raise SchemaError("duplicate telemetry columns")
    try:
        data = np.array([[float(x) for x in r] for r in rows], dtype=float).reshape(-1, len(header))
    except ValueError as exc:
        raise SchemaError(f"{path}: non-numeric or ragged row") from exc
    return TelemetryLog({h: data[:, i] for i, h in enumerate(header)})


def write_telemetry(path, log: TelemetryLog) -> None:
    order = [c for c in TELEMETRY_COLUMNS if c in log.channels]
    order += sorted(c for c in log.channels if c not in order)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(order)
        cols = [log.channels[c] for c in order]
        for i in range(len(log)):
            w.writerow([f"{c[i]:.10g}" for c in cols])
