"""Open-loop Monte Carlo validation of the back-offs and the noise tuning probe.

Samples follow the full nonlinear dynamics with additive white noise
(Euler-Maruyama) under the plan's open-loop inputs. Random streams are
seeded per fixed-size chunk of samples, so results do not depend on how
many worker threads process the chunks.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .backoff import BackoffConfig, friction_backoffs
from .errors import ConfigError, ProbeError
from .reference import Reference
from .track import TrackGeometry
from .uncertainty import NoiseModel, affine_maps, apply_map
from .vehicle import Car, axle_forces, dynamics, jacobian_A

EM_SUBSTEPS = 8
CHUNK = 4096
FAMILIES = ("TLC", "FLC")


def thread_count() -> int:
    env = os.environ.get("ROBUST_LAPLINE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError("ROBUST_LAPLINE_THREADS must be an integer") from exc
    return max(1, min(4, os.cpu_count() or 1))


def _sqrt_psd(P):
    w, V = np.linalg.eigh(np.asarray(P, dtype=float))
    return V * np.sqrt(np.clip(w, 0.0, None))


def simulate_em(x0_mean, P0, inputs, dts, car: Car, noise_Q, M: int, seed, substeps=EM_SUBSTEPS,
                threads: int | None = None):
    """Euler-Maruyama paths over consecutive intervals.

    Parameters
    ----------
    x0_mean : (6,) initial mean state.
    P0 : (6, 6) initial covariance.
    inputs : (H, 3) inputs held over each interval.
    dts : (H,) interval durations.
    seed : sequence of ints forming the base of every chunk's seed.

    Returns the (M, 6) end states, the (M, H+1, 6) node states and a
    divergence flag per sample.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    dts = np.atleast_1d(np.asarray(dts, dtype=float))
    H = len(dts)
    L0 = _sqrt_psd(P0)
    LQ = _sqrt_psd(noise_Q)
    base = list(np.atleast_1d(seed).astype(int))
    n_chunks = math.ceil(M / CHUNK)

    def run(c):
        m = min(CHUNK, M - c * CHUNK)
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(base + [c])))
        x = x0_mean + rng.standard_normal((m, 6)) @ L0.T
        nodes = np.empty((m, H + 1, 6))
        nodes[:, 0] = x
        bad = np.zeros(m, dtype=bool)
        for j in range(H):
            h = dts[j] / substeps
            for _ in range(substeps):
                ok = (x[:, 0] > 0.5) & np.all(np.isfinite(x), axis=1) & ~bad
                bad |= ~ok
                x_safe = np.where(ok[:, None], x, x0_mean)
                xi = rng.standard_normal((m, 6)) @ LQ.T
                x = np.where(ok[:, None], x_safe + h * dynamics(x_safe, inputs[j], car)
                             + math.sqrt(h) * xi, x)
            nodes[:, j + 1] = x
        bad |= ~((x[:, 0] > 0.5) & np.all(np.isfinite(x), axis=1))
        return nodes, bad

    workers = min(threads or thread_count(), n_chunks)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(n_chunks)))
    else:
        parts = [run(c) for c in range(n_chunks)]
    nodes = np.concatenate([p[0] for p in parts])
    bad = np.concatenate([p[1] for p in parts])
    return nodes[:, -1], nodes, bad


@dataclass
class RolloutBatch:
    """Samples of one H-interval window started at node ``k``."""

    k: int
    check_node: int
    M: int
    seed: int
    end_states: np.ndarray      # (M, 6)
    diverged: np.ndarray        # (M,) bool
    violations: dict            # family -> (M,) bool

    def rate(self, family: str) -> float:
        return float(np.mean(self.violations[family]))


def rollout_window(ref: Reference, track: TrackGeometry, car: Car, k: int, noise: NoiseModel,
                   M: int, seed: int, H: int, substeps=EM_SUBSTEPS, threads=None) -> RolloutBatch:
    """Simulate M open-loop samples from node ``k`` and check node ``k + H``.

    Violations are measured against the untightened constraints: corridor
    exit for TLC and ``S_j > 1`` on either axle for FLC. Diverged samples
    count as violations of every family.
    """
    if M < 1 or H < 1:
        raise ConfigError("M and H must be positive")
    n = ref.n_intervals
    if not ref.closed and k + H > n:
        raise ConfigError("window runs past the end of an open reference")
    k0 = ref.node(k)
    idx = [ref.node(k + j) for j in range(H)]
    kh = ref.node(k + H)
    inputs = np.stack([ref.inputs(i) for i in idx])
    dts = np.array([ref.interval_dt(i) for i in idx])
    end, _, bad = simulate_em(ref.cartesian(k0), noise.P0_bar, inputs, dts, car, noise.Q, M,
                              [seed, k0], substeps, threads)
    # corridor check via projection near the reference abscissa
    s_guess = np.full(M, ref.s[kh] % track.total_length if track.closed else ref.s[kh])
    x = np.where(bad, ref.x[kh], end[:, 3])
    y = np.where(bad, ref.y[kh], end[:, 4])
    s_hat, n_hat = track.project(x, y, s_guess)
    wl, wr = track.interp("w_left", s_hat), track.interp("w_right", s_hat)
    tlc = (n_hat > wl) | (n_hat < -wr) | bad
    safe = np.where(bad[:, None], ref.cartesian(kh), end)
    f = axle_forces(safe[:, 0], safe[:, 1], safe[:, 2], *ref.inputs(kh), car)
    flc = (f["S1"] > 1.0) | (f["S2"] > 1.0) | bad
    return RolloutBatch(k=k0, check_node=kh, M=M, seed=seed, end_states=end, diverged=bad,
                        violations={"TLC": tlc, "FLC": flc})


def binomial_ci(violations: int, M: int, z: float = 1.959963984540054):
    """Wilson score interval."""
    p = violations / M
    denom = 1.0 + z * z / M
    centre = (p + z * z / (2 * M)) / denom
    half = z * math.sqrt(p * (1 - p) / M + z * z / (4 * M * M)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class ValidationRow:
    k: int
    s: float
    family: str
    M: int
    violations: int
    rate: float
    ci_low: float
    ci_high: float


def most_active_friction_node(ref: Reference, car: Car) -> int:
    """Node whose worst axle saturation is highest (closing row excluded)."""
    n = ref.n_intervals
    k = np.arange(n)
    f = axle_forces(ref.u[k], ref.v[k], ref.r[k], ref.X2a[k], ref.X2b[k], ref.delta[k], car)
    return int(np.argmax(np.maximum(f["S1"], f["S2"])))


def most_active_track_node(ref: Reference, track: TrackGeometry) -> int:
    n = ref.n_intervals
    wl, wr = track.interp("w_left", ref.s[:n]), track.interp("w_right", ref.s[:n])
    margin = np.minimum(wl - ref.n[:n], ref.n[:n] + wr)
    return int(np.argmin(margin))


def validate(ref: Reference, track: TrackGeometry, car: Car, noise: NoiseModel, H: int,
             M: int, seed: int, nodes=None, threads=None) -> list[ValidationRow]:
    """Violation rates at the checked nodes (default: the most active ones).

    A window for check node ``m`` starts at ``m - H`` so the H-th node of
    the window is the node under test.
    """
    if nodes is None:
        nodes = {"FLC": [most_active_friction_node(ref, car)],
                 "TLC": [most_active_track_node(ref, track)]}
    rows = []
    for family in FAMILIES:
        for m in nodes.get(family, []):
            start = m - H
            if not ref.closed and start < 0:
                raise ConfigError(f"node {m} has fewer than H={H} predecessors")
            batch = rollout_window(ref, track, car, start, noise, M, seed, H, threads=threads)
            v = int(np.sum(batch.violations[family]))
            lo, hi = binomial_ci(v, M)
            rows.append(ValidationRow(batch.check_node, float(ref.s[batch.check_node]), family,
                                      M, v, v / M, lo, hi))
    return rows


def write_validation(path, rows) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "s", "family", "M", "violations", "rate", "ci_low", "ci_high"])
        for r in rows:
            w.writerow([r.k, f"{r.s:.6f}", r.family, r.M, r.violations, f"{r.rate:.8f}",
                        f"{r.ci_low:.8f}", f"{r.ci_high:.8f}"])


# ---------------------------------------------------------------- tuning probe

@dataclass(frozen=True)
class ProbeReport:
    max_beta: float          # largest FLC back-off, in units of axle capacity (S = 1)
    max_beta_axle: int
    peak_saturation: float
    steps: int
    final_delta: float


def _hold_speed_drive(state, delta, car: Car, iterations: int = 4):
    """Rear drive force that keeps ``du/dt = 0`` (load transfer iterated)."""
    vp = car.vp
    X2a = 0.0
    for _ in range(iterations):
        f = axle_forces(state[0], state[1], state[2], X2a, 0.0, delta, car)
        X2a = max(0.0, -vp.m * state[1] * state[2] + f["Y1"] * math.sin(delta))
    return min(X2a, vp.X2a_max)


def tuning_probe(car: Car, noise: NoiseModel, H: int = 4, *, config: BackoffConfig | None = None,
                 speed: float = 25.0, steer_rate: float = 0.02, spacing: float = 1.3,
                 target: float = 0.9, dt: float = 0.005) -> ProbeReport:
    """Ramp-steer at constant speed until an axle reaches ``target`` saturation.

    At every spatial step (``spacing / speed`` seconds) the reset covariance
    is propagated H steps along the maneuver and the friction back-offs are
    evaluated with ``config``'s multiplier (gamma = 3 by default).
    """
    config = config or BackoffConfig("FLC")
    vp = car.vp
    step_dt = spacing / speed
    per_step = max(1, int(round(step_dt / dt)))
    h = step_dt / per_step
    x = np.array([speed, 0.0, 0.0, 0.0, 0.0, 0.0])
    states, inputs = [], []
    delta = 0.0
    peak = 0.0
    while True:
        X2a = _hold_speed_drive(x, delta, car)
        u_in = np.array([X2a, 0.0, delta])
        states.append(x.copy())
        inputs.append(u_in)
        f = axle_forces(x[0], x[1], x[2], X2a, 0.0, delta, car)
        peak = max(float(f["S1"]), float(f["S2"]))
        if peak >= target:
            break
        if delta >= vp.delta_max:
            raise ProbeError(f"maneuver reached delta_max with peak saturation {peak:.3f}")
        for _ in range(per_step):  # RK4 at fixed inputs, steer ramped per substep
            u_in = np.array([X2a, 0.0, delta])
            k1 = dynamics(x, u_in, car)
            k2 = dynamics(x + 0.5 * h * k1, u_in, car)
            k3 = dynamics(x + 0.5 * h * k2, u_in, car)
            k4 = dynamics(x + h * k3, u_in, car)
            x = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            x[0] = speed
            delta = min(delta + steer_rate * h, vp.delta_max)
    states = np.array(states)
    inputs = np.array(inputs)
    n = len(states)
    if n < H + 1:
        raise ProbeError("maneuver too short for the probe horizon")
    A = jacobian_A(states, inputs, car)
    M_, c_, _ = affine_maps(A[:, None], np.array([0.0]), np.full(n, step_dt), noise.Q)
    best = (0.0, 1)
    for k in range(H, n):
        P = noise.P0_bar.copy()
        for j in range(k - H, k):
            P = apply_map(M_[j], c_[j], P)
        _, beta = friction_backoffs(states[k], inputs[k], P, car, config.multiplier("FLC"))
        j = int(np.argmax(beta))
        if beta[j] > best[0]:
            best = (float(beta[j]), j + 1)
    return ProbeReport(max_beta=best[0], max_beta_axle=best[1], peak_saturation=peak,
                       steps=n, final_delta=float(delta))
