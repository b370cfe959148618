"""Closed-track geometry in curvilinear coordinates.

The centerline is stored node-by-node with arc length, position, heading,
curvature and the two half-widths. Lateral offsets are positive to the left
of the direction of travel, so the admissible offset band at a node is
``[-w_right, +w_left]``.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GridTooCoarse, MalformedTrack, TopologyError

TRACK_COLUMNS = ("s", "x", "y", "w_left", "w_right")


@dataclass(frozen=True)
class TrackGeometry:
    """Centerline nodes; for a closed track the last node repeats the first."""

    s: np.ndarray
    x: np.ndarray
    y: np.ndarray
    theta: np.ndarray
    kappa: np.ndarray
    w_left: np.ndarray
    w_right: np.ndarray
    closed: bool = True

    @property
    def total_length(self) -> float:
        return float(self.s[-1])

    @property
    def n_nodes(self) -> int:
        return len(self.s)

    def _wrap(self, s):
        s = np.asarray(s, dtype=float)
        if self.closed:
            return np.mod(s, self.total_length)
        return np.clip(s, 0.0, self.total_length)

    def _locate(self, s):
        s = self._wrap(s)
        i = np.searchsorted(self.s, s, side="right") - 1
        i = np.clip(i, 0, self.n_nodes - 2)
        h = self.s[i + 1] - self.s[i]
        return s, i, (s - self.s[i]) / h, h

    def interp(self, name: str, s):
        """Linear interpolation of a node channel at arc length ``s``."""
        values = getattr(self, name)
        s, i, w, _ = self._locate(s)
        return (1.0 - w) * values[i] + w * values[i + 1]

    def heading(self, s):
        s, i, w, _ = self._locate(s)
        th0 = self.theta[i]
        dth = np.angle(np.exp(1j * (self.theta[i + 1] - th0)))
        return th0 + w * dth

    def centerline(self, s):
        """Cubic Hermite interpolation of the centerline using node headings."""
        s, i, w, h = self._locate(s)
        h00 = 2 * w**3 - 3 * w**2 + 1
        h10 = w**3 - 2 * w**2 + w
        h01 = -2 * w**3 + 3 * w**2
        h11 = w**3 - w**2
        c0, c1 = np.cos(self.theta[i]), np.cos(self.theta[i + 1])
        s0, s1 = np.sin(self.theta[i]), np.sin(self.theta[i + 1])
        x = h00 * self.x[i] + h10 * h * c0 + h01 * self.x[i + 1] + h11 * h * c1
        y = h00 * self.y[i] + h10 * h * s0 + h01 * self.y[i + 1] + h11 * h * s1
        return x, y

    def project(self, x, y, s_guess, iterations: int = 8):
        """Frenet projection of world points near ``s_guess``.

        Returns ``(s, n)``; Newton iterations on the tangency condition using
        the local curvature, which converge quadratically for points inside
        the corridor.
        """
        s = np.array(s_guess, dtype=float, copy=True)
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        for _ in range(iterations):
            cx, cy = self.centerline(s)
            th = self.heading(s)
            dx, dy = x - cx, y - cy
            along = dx * np.cos(th) + dy * np.sin(th)
            lat = -dx * np.sin(th) + dy * np.cos(th)
            k = self.interp("kappa", s)
            s = s + along / (1.0 - k * lat)
        cx, cy = self.centerline(s)
        th = self.heading(s)
        n = -(x - cx) * np.sin(th) + (y - cy) * np.cos(th)
        return self._wrap(s), n


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform spatial grid of ``N`` intervals over one lap."""

    N: int
    ds: float
    s: np.ndarray
    alpha: np.ndarray
    kappa: np.ndarray
    w_left: np.ndarray
    w_right: np.ndarray
    track: TrackGeometry = field(repr=False)

    def kappa_at(self, s):
        return self.track.interp("kappa", s)

    def widths_at(self, s):
        return self.track.interp("w_left", s), self.track.interp("w_right", s)


def _periodic_central(values, s, period):
    """Central differences on a periodic sequence with uneven spacing."""
    ahead = np.roll(values, -1)
    behind = np.roll(values, 1)
    s_ahead = np.roll(s, -1)
    s_behind = np.roll(s, 1)
    s_ahead[-1] += period
    s_behind[0] -= period
    return (ahead - behind) / (s_ahead - s_behind)


def _moving_average(values, width: int = 5, periodic: bool = True):
    half = width // 2
    if periodic:
        padded = np.concatenate([values[-half:], values, values[:half]])
    else:
        padded = np.pad(values, half, mode="edge")
    kernel = np.ones(width) / width
    return np.convolve(padded, kernel, mode="valid")


def track_from_arrays(s, x, y, w_left, w_right, closed: bool = True,
                      width_deduction: float = 0.0, smooth: int = 5) -> TrackGeometry:
    """Build a track from raw centerline samples (without a closing duplicate).

    Heading and curvature come from central differences, periodic when
    ``closed``; curvature is then smoothed with a ``smooth``-point moving
    average.
    """
    s = np.asarray(s, dtype=float)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w_left = np.asarray(w_left, dtype=float) - width_deduction
    w_right = np.asarray(w_right, dtype=float) - width_deduction

    if len(s) < 10:
        raise MalformedTrack(f"need at least 10 rows, got {len(s)}")
    if np.any(np.diff(s) <= 0):
        raise MalformedTrack("arc length column s must be strictly increasing")
    if np.any(w_left <= 0) or np.any(w_right <= 0):
        raise MalformedTrack("half-widths must be positive")

    spacing = np.median(np.diff(s))
    if closed:
        # drop an explicit closing duplicate
        if np.hypot(x[-1] - x[0], y[-1] - y[0]) < 1e-6 * max(1.0, spacing):
            s, x, y, w_left, w_right = s[:-1], x[:-1], y[:-1], w_left[:-1], w_right[:-1]
        gap = float(np.hypot(x[0] - x[-1], y[0] - y[-1]))
        if gap > 3.0 * spacing:
            raise TopologyError(
                f"closing gap {gap:.3f} m exceeds three sample spacings ({spacing:.3f} m)")
        length = s[-1] - s[0] + gap
        s = s - s[0]
        if smooth > 1 and len(s) < smooth:
            raise MalformedTrack("too few rows for curvature smoothing")
        dx = _periodic_central(x, s, length)
        dy = _periodic_central(y, s, length)
        theta = np.unwrap(np.arctan2(dy, dx))
        # total heading change over the lap (2*pi times the winding number)
        turn = theta[-1] + np.angle(np.exp(1j * (theta[0] - theta[-1]))) - theta[0]
        th_ahead = np.roll(theta, -1)
        th_ahead[-1] = theta[0] + turn
        th_behind = np.roll(theta, 1)
        th_behind[0] = theta[-1] - turn
        s_ahead = np.roll(s, -1)
        s_ahead[-1] += length
        s_behind = np.roll(s, 1)
        s_behind[0] -= length
        kappa = (th_ahead - th_behind) / (s_ahead - s_behind)
        if smooth > 1:
            kappa = _moving_average(kappa, smooth, periodic=True)
        s = np.append(s, length)
        x = np.append(x, x[0])
        y = np.append(y, y[0])
        theta = np.append(theta, theta[0] + turn)
        kappa = np.append(kappa, kappa[0])
        w_left = np.append(w_left, w_left[0])
        w_right = np.append(w_right, w_right[0])
    else:
        s = s - s[0]
        dx = np.gradient(x, s)
        dy = np.gradient(y, s)
        theta = np.unwrap(np.arctan2(dy, dx))
        kappa = np.gradient(theta, s)
        if smooth > 1:
            kappa = _moving_average(kappa, smooth, periodic=False)

    if np.any(np.abs(kappa * np.minimum(w_left, w_right)) >= 1.0):
        raise MalformedTrack("curvature too large for the corridor width (|kappa*w| >= 1)")
    return TrackGeometry(s=s, x=x, y=y, theta=theta, kappa=kappa,
                         w_left=w_left, w_right=w_right, closed=closed)


def load_track(path, closed: bool = True, width_deduction: float = 0.0) -> TrackGeometry:
    """Read a track CSV with header ``s,x,y,w_left,w_right``."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MalformedTrack(f"{path}: empty file") from None
        missing = [c for c in TRACK_COLUMNS if c not in header]
        if missing:
            raise MalformedTrack(f"{path}: missing columns {missing}")
        idx = [header.index(c) for c in TRACK_COLUMNS]
        rows = []
        for line in reader:
            if not line or not "".join(line).strip():
                continue
            try:
                rows.append([float(line[i]) for i in idx])
            except (ValueError, IndexError) as exc:
                raise MalformedTrack(f"{path}: bad row {line!r}") from exc
    data = np.array(rows, dtype=float).reshape(-1, 5)
    return track_from_arrays(*data.T, closed=closed, width_deduction=width_deduction)


def write_track(path, s, x, y, w_left, w_right) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACK_COLUMNS)
        for row in zip(s, x, y, w_left, w_right):
            writer.writerow([f"{v:.10g}" for v in row])


def make_grid(track: TrackGeometry, N: int) -> SpatialGrid:
    if N < 10:
        raise GridTooCoarse(f"N={N} < 10")
    s = np.linspace(0.0, track.total_length, N + 1)
    return SpatialGrid(
        N=N,
        ds=track.total_length / N,
        s=s,
        alpha=s / track.total_length,
        kappa=track.interp("kappa", s),
        w_left=track.interp("w_left", s),
        w_right=track.interp("w_right", s),
        track=track,
    )


def offset_to_world(track: TrackGeometry, s, e):
    """World position and heading of the point at lateral offset ``e`` from ``s``.

    Offsets outside the corridor are clamped (with a warning).
    """
    s = np.asarray(s, dtype=float)
    e = np.asarray(e, dtype=float)
    wl = track.interp("w_left", s)
    wr = track.interp("w_right", s)
    clamped = np.clip(e, -wr, wl)
    if np.any(clamped != e):
        warnings.warn("lateral offset outside the corridor was clamped", RuntimeWarning,
                      stacklevel=2)
    cx, cy = track.centerline(s)
    th = track.heading(s)
    return cx - clamped * np.sin(th), cy + clamped * np.cos(th), th
