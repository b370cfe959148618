"""Synthetic driver telemetry for demos and tests.

A "driver" replays a reference lap after lap with a per-lap pace factor,
a slow lateral weave and small steering ripple. Wheel channels are the
single-track axle quantities split over the two wheels of each axle (equal
slip, a fixed lateral load transfer), so averaging slips and summing loads
and forces recovers the axle model exactly.
"""

from __future__ import annotations

import numpy as np

from .reference import Reference
from .telemetry import TelemetryLog
from .vehicle import Car, axle_forces

LOAD_SPLIT = 0.1


def _interp_ref(ref: Reference, tau):
    t = ref.t - ref.t[0]
    names = ("x", "y", "psi", "u", "v", "r", "delta", "X2a", "X2b")
    out = {}
    for n in names:
        vals = getattr(ref, n)
        if n == "psi":
            vals = np.unwrap(vals)
        out[n] = np.interp(tau, t, vals)
    return out


def synthetic_laps(ref: Reference, car: Car, laps: int = 4, rate: float = 100.0, seed: int = 0,
                   pace_spread: float = 0.01, weave: float = 0.3,
                   steer_ripple: float = 2e-3) -> TelemetryLog:
    """Telemetry of ``laps`` complete laps plus a short run-in and run-out.

    Parameters
    ----------
    ref : Reference
        Closed reference lap to replay.
    pace_spread : float
        Standard deviation of the per-lap time scale factor.
    weave : float
        Amplitude [m] of the lateral offset from the reference path.
    steer_ripple : float
        Amplitude [rad] of a high-frequency steering oscillation.
    """
    if not ref.closed:
        raise ValueError("synthetic laps need a closed reference")
    rng = np.random.default_rng(seed)
    T = ref.lap_time
    chunks = []
    start = 0.0
    for j in range(-1, laps + 1):
        c = 1.0 + pace_spread * rng.standard_normal()
        Tj = T * c
        n = int(np.floor(Tj * rate))
        local = np.arange(n) / rate
        if j == -1:
            local = local[local >= 0.9 * Tj]
        elif j == laps:
            local = local[local <= 0.1 * Tj]
        tau = local / c
        q = _interp_ref(ref, tau)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        e = weave * np.sin(2.0 * np.pi * 3.0 * tau / T + phase)
        q["x"] = q["x"] - e * np.sin(q["psi"])
        q["y"] = q["y"] + e * np.cos(q["psi"])
        for name in ("u", "v", "r"):
            q[name] = q[name] / c
        q["delta"] = q["delta"] + steer_ripple * np.sin(2.0 * np.pi * 1.5 * local + phase)
        q["t"] = start + local
        chunks.append(q)
        start += Tj
    data = {k: np.concatenate([c[k] for c in chunks]) for k in chunks[0]}
    data["t"] = data["t"] - data["t"][0]
    f = axle_forces(data["u"], data["v"], data["r"], data["X2a"], data["X2b"], data["delta"], car)
    channels = {k: data[k] for k in ("t", "u", "v", "r", "x", "y", "psi", "delta")}
    for axle, (left, right) in (("1", ("fl", "fr")), ("2", ("rl", "rr"))):
        Z, Y, a = f[f"Z{axle}"], f[f"Y{axle}"], f[f"alpha{axle}"]
        channels[f"alpha_{left}"] = a
        channels[f"alpha_{right}"] = a
        channels[f"fz_{left}"] = (0.5 - LOAD_SPLIT) * Z
        channels[f"fz_{right}"] = (0.5 + LOAD_SPLIT) * Z
        channels[f"fy_{left}"] = (0.5 - LOAD_SPLIT) * Y
        channels[f"fy_{right}"] = (0.5 + LOAD_SPLIT) * Y
    return TelemetryLog(channels)
