"""Executed-lap scoring: lap splitting, steer energy, tracking RMS and summaries."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError, NoCompleteLap
from .reference import Reference
from .telemetry import TelemetryLog
from .track import TrackGeometry

MINUS = "−"
RESAMPLE_SPACING = 0.5


# ------------------------------------------------------------------ laps

@dataclass
class Lap:
    log: TelemetryLog
    t_start: float
    t_end: float

    @property
    def lap_time(self) -> float:
        return self.t_end - self.t_start


def _crossings(log: TelemetryLog, track: TrackGeometry, lateral_margin: float = 2.0):
    x0, y0 = track.centerline(0.0)
    th = float(track.heading(0.0))
    tx, ty = math.cos(th), math.sin(th)
    x, y, t = log["x"], log["y"], log["t"]
    along = (x - x0) * tx + (y - y0) * ty
    side = -(x - x0) * ty + (y - y0) * tx
    half = max(float(track.w_left[0]), float(track.w_right[0])) + lateral_margin
    out = []
    for i in range(len(t) - 1):
        if along[i] < 0.0 <= along[i + 1]:
            w = -along[i] / (along[i + 1] - along[i])
            lat = side[i] + w * (side[i + 1] - side[i])
            if abs(lat) <= half:
                out.append((i, t[i] + w * (t[i + 1] - t[i])))
    return out


def lap_split(log: TelemetryLog, track: TrackGeometry) -> list[Lap]:
    """Complete laps between forward crossings of the start line.

    A crossing counts only when travelling in the track direction and within
    the corridor (plus a margin); the time stamp is interpolated linearly.
    """
    log.require("t", "x", "y")
    cross = _crossings(log, track)
    if len(cross) < 2:
        raise NoCompleteLap(f"found {len(cross)} forward start-line crossings, need 2")
    laps = []
    for (i0, t0), (i1, t1) in zip(cross[:-1], cross[1:]):
        laps.append(Lap(log.slice(i0 + 1, i1 + 1), t0, t1))
    return laps


# ------------------------------------------------------------------ indicators

def rms(f, t) -> float:
    """Time-weighted RMS, sqrt(1/T * integral f^2 dt), trapezoid rule."""
    f = np.asarray(f, dtype=float)
    t = np.asarray(t, dtype=float)
    T = t[-1] - t[0]
    if T <= 0:
        raise DomainError("RMS needs a positive time span")
    return float(np.sqrt(np.trapezoid(f * f, t) / T))


def steer_energy(t, delta) -> float:
    """Integral of the squared steering rate [rad^2/s]."""
    t = np.asarray(t, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if len(t) < 100:
        raise DomainError("steer energy needs at least 100 samples")
    rate = np.gradient(delta, t, edge_order=2)
    return float(np.trapezoid(rate * rate, t))


@dataclass
class ReferencePath:
    """Reference resampled at fine arc-length spacing for projection."""

    x: np.ndarray
    y: np.ndarray
    sigma: np.ndarray      # arc length along the reference path
    u_ref: np.ndarray
    beta_ref: np.ndarray
    closed: bool

    @property
    def length(self) -> float:
        return float(self.sigma[-1])


def resample_reference(ref: Reference, spacing: float = RESAMPLE_SPACING,
                       offset: float = 0.0) -> ReferencePath:
    """Cubic-spline resampling of the path (optionally the driver-frame point)."""
    x = ref.x + offset * np.cos(ref.psi)
    y = ref.y + offset * np.sin(ref.psi)
    chord = np.concatenate([[0.0], np.cumsum(np.hypot(np.diff(x), np.diff(y)))])
    if ref.closed:
        x, y = x.copy(), y.copy()
        x[-1], y[-1] = x[0], y[0]
        bc = "periodic"
    else:
        bc = "not-a-knot"
    sx = CubicSpline(chord, x, bc_type=bc)
    sy = CubicSpline(chord, y, bc_type=bc)
    n = max(int(math.ceil(chord[-1] / spacing)), 2)
    grid = np.linspace(0.0, chord[-1], n + 1)
    fx, fy = sx(grid), sy(grid)
    sigma = np.concatenate([[0.0], np.cumsum(np.hypot(np.diff(fx), np.diff(fy)))])
    return ReferencePath(fx, fy, sigma, np.interp(grid, chord, ref.u),
                         np.interp(grid, chord, ref.beta_ref), ref.closed)


def project_on_path(path: ReferencePath, x, y, window: int = 40):
    """Signed lateral distance (positive left) and segment abscissa per sample.

    Each sample is projected onto segments near the previous match (a forward
    window); the first sample searches the whole path.
    """
    px, py = path.x, path.y
    nseg = len(px) - 1
    seg_dx, seg_dy = np.diff(px), np.diff(py)
    seg_len2 = seg_dx**2 + seg_dy**2
    ey = np.empty(len(x))
    sig = np.empty(len(x))
    last = None
    for i, (xi, yi) in enumerate(zip(x, y)):
        if last is None:
            cand = np.arange(nseg)
        else:
            cand = (last + np.arange(-window // 4, window)) % nseg if path.closed else \
                np.clip(last + np.arange(-window // 4, window), 0, nseg - 1)
        w = ((xi - px[cand]) * seg_dx[cand] + (yi - py[cand]) * seg_dy[cand]) / seg_len2[cand]
        w = np.clip(w, 0.0, 1.0)
        qx = px[cand] + w * seg_dx[cand]
        qy = py[cand] + w * seg_dy[cand]
        d2 = (xi - qx) ** 2 + (yi - qy) ** 2
        j = int(np.argmin(d2))
        seg = int(cand[j])
        last = seg
        cross = seg_dx[seg] * (yi - qy[j]) - seg_dy[seg] * (xi - qx[j])
        ey[i] = math.copysign(math.sqrt(d2[j]), cross) if d2[j] > 0 else 0.0
        sig[i] = path.sigma[seg] + w[j] * (path.sigma[seg + 1] - path.sigma[seg])
    return ey, sig


@dataclass
class LapMetrics:
    LT: float
    E_s: float
    rms_ey: float
    rms_ev: float
    rms_beta_drv: float
    rms_beta_ref: float
    rms_delta_rate: float


def tracking_errors(lap_log: TelemetryLog, path: ReferencePath):
    """(rms_ey, rms_ev, rms_beta_drv, rms_beta_ref, rms_delta_rate)."""
    lap_log.require("t", "x", "y", "u", "v", "delta")
    t = lap_log["t"]
    ey, sig = project_on_path(path, lap_log["x"], lap_log["y"])
    u_ref = np.interp(sig, path.sigma, path.u_ref)
    beta_ref = np.interp(sig, path.sigma, path.beta_ref)
    ev = lap_log["u"] - u_ref
    beta_drv = np.arctan2(lap_log["v"], lap_log["u"])
    rate = np.gradient(lap_log["delta"], t, edge_order=2)
    return (rms(ey, t), rms(ev, t), rms(beta_drv, t), rms(beta_ref, t), rms(rate, t))


def lap_metrics(lap: Lap, path: ReferencePath | None) -> LapMetrics:
    t = lap.log["t"]
    Es = steer_energy(t, lap.log["delta"])
    if path is None:
        rate = np.gradient(lap.log["delta"], t, edge_order=2)
        beta_drv = np.arctan2(lap.log["v"], lap.log["u"])
        nan = float("nan")
        return LapMetrics(lap.lap_time, Es, nan, nan, rms(beta_drv, t), nan, rms(rate, t))
    return LapMetrics(lap.lap_time, Es, *tracking_errors(lap.log, path))


def write_lap_metrics(path, rows) -> None:
    """``rows``: sequence of (lap index, LapMetrics)."""
    names = list(LapMetrics.__dataclass_fields__)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lap"] + names)
        for i, m in rows:
            d = asdict(m)
            w.writerow([i] + [f"{d[n]:.9g}" for n in names])


# ------------------------------------------------------------------ summaries

def median_iqr(values):
    """Median and IQR with linear interpolation between order statistics."""
    v = np.asarray(values, dtype=float)
    q1, med, q3 = np.percentile(v, [25.0, 50.0, 75.0], method="linear")
    return float(med), float(q3 - q1)


def _signed(text: str) -> str:
    return text.replace("-", MINUS)


def format_cell(values, digits: int = 2) -> str:
    med, iqr = median_iqr(values)
    return _signed(f"{med:.{digits}f} [{iqr:.{digits}f}]")


def format_delta(new_median: float, ref_median: float, digits: int = 2) -> str:
    """``new - ref`` with the change relative to ``ref`` in percent.

    Percentages below one in magnitude keep one decimal; larger ones are
    rounded to whole percent.
    """
    delta = round(new_median - ref_median, digits)
    pct = 100.0 * (new_median - ref_median) / ref_median
    pct_text = f"{pct:+.1f}" if abs(pct) < 1.0 else f"{pct:+.0f}"
    value = f"{delta:+.{digits}f}"
    return _signed(f"{value} ({pct_text}%)")


def summarize(records, metric: str, row_key: str = "driver", col_key: str = "condition",
              digits: int = 2):
    """Median [IQR] table as {row: {col: cell}}; empty groups are omitted with a warning."""
    groups: dict = {}
    for rec in records:
        groups.setdefault(rec[row_key], {}).setdefault(rec[col_key], []).append(rec[metric])
    table = {}
    for row in sorted(groups):
        table[row] = {}
        for col in sorted(groups[row]):
            vals = [v for v in groups[row][col] if v is not None and not math.isnan(v)]
            if not vals:
                warnings.warn(f"empty group {row}/{col} omitted", RuntimeWarning, stacklevel=2)
                continue
            table[row][col] = format_cell(vals, digits)
    return table


def pairwise_deltas(records, metric: str, pairs, row_key: str = "driver",
                    col_key: str = "condition", digits: int = 2):
    """{row: {"A - B": cell}} of median differences for each (A, B) pair."""
    meds: dict = {}
    for rec in records:
        meds.setdefault(rec[row_key], {}).setdefault(rec[col_key], []).append(rec[metric])
    out = {}
    for row in sorted(meds):
        out[row] = {}
        for a, b in pairs:
            if a in meds[row] and b in meds[row]:
                ma = median_iqr(meds[row][a])[0]
                mb = median_iqr(meds[row][b])[0]
                out[row][f"{a} {MINUS} {b}"] = format_delta(ma, mb, digits)
    return out


def markdown_table(table: dict, title: str = "") -> str:
    cols = sorted({c for row in table.values() for c in row})
    lines = [f"### {title}", ""] if title else []
    lines.append("| | " + " | ".join(cols) + " |")
    lines.append("|---" * (len(cols) + 1) + "|")
    for row, cells in table.items():
        lines.append(f"| {row} | " + " | ".join(cells.get(c, "") for c in cols) + " |")
    return "\n".join(lines) + "\n"
