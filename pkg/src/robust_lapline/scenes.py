"""Analytic test tracks: circle, oval, chicane stadium and a straight strip."""

from __future__ import annotations

import numpy as np

from .track import TrackGeometry, track_from_arrays


def _resample(points_fn, length: float, spacing: float):
    n = max(int(round(length / spacing)), 10)
    s = np.linspace(0.0, length, n, endpoint=False)
    x, y = points_fn(s)
    return s, x, y


def circle(radius: float = 50.0, width: float = 5.0, spacing: float = 1.0) -> TrackGeometry:
    """Counter-clockwise circle; ``width`` is each half-width."""
    length = 2.0 * np.pi * radius

    def pts(s):
        a = s / radius
        return radius * np.sin(a), radius * (1.0 - np.cos(a))

    s, x, y = _resample(pts, length, spacing)
    w = np.full_like(s, width)
    return track_from_arrays(s, x, y, w, w, closed=True)


def _stadium_points(straight: float, radius: float):
    """Arc-length parametrized stadium (counter-clockwise, start mid-straight)."""
    half = straight / 2.0
    arc = np.pi * radius
    seg = np.array([half, arc, straight, arc, half])
    ends = np.cumsum(seg)

    def pts(s):
        s = np.asarray(s, dtype=float)
        x = np.empty_like(s)
        y = np.empty_like(s)
        for i, si in enumerate(s):
            if si < ends[0]:
                x[i], y[i] = si, 0.0
            elif si < ends[1]:
                a = (si - ends[0]) / radius
                x[i], y[i] = half + radius * np.sin(a), radius * (1 - np.cos(a))
            elif si < ends[2]:
                x[i], y[i] = half - (si - ends[1]), 2 * radius
            elif si < ends[3]:
                a = (si - ends[2]) / radius
                x[i], y[i] = -half - radius * np.sin(a), radius * (1 + np.cos(a))
            else:
                x[i], y[i] = -half + (si - ends[3]), 0.0
        return x, y

    return pts, float(ends[-1])


def oval(length: float = 600.0, straight: float = 150.0, width: float = 5.0,
         spacing: float = 1.3) -> TrackGeometry:
    """Stadium oval of the given total length with two equal straights."""
    radius = (length - 2.0 * straight) / (2.0 * np.pi)
    pts, total = _stadium_points(straight, radius)
    s, x, y = _resample(pts, total, spacing)
    w = np.full_like(s, width)
    return track_from_arrays(s, x, y, w, w, closed=True)


def chicane(radius: float = 40.0, straight: float = 250.0, rho: float = 30.0,
            phi: float = 0.6, width: float = 4.0, spacing: float = 1.3) -> TrackGeometry:
    """Stadium whose back straight holds a symmetric S-bend.

    The S-bend is four arcs of radius ``rho`` sweeping ``phi`` each
    (left, right, right, left); it returns to the straight's line after
    advancing ``4 rho sin(phi)``. The centerline is integrated from the
    piecewise-constant curvature, so heading and position close exactly.
    """
    s_arc = rho * phi
    gap = (straight - 4 * rho * np.sin(phi)) / 2.0
    pieces = [  # (length, curvature)
        (straight / 2.0, 0.0),
        (np.pi * radius, 1.0 / radius),
        (gap, 0.0),
        (s_arc, 1.0 / rho), (s_arc, -1.0 / rho), (s_arc, -1.0 / rho), (s_arc, 1.0 / rho),
        (gap, 0.0),
        (np.pi * radius, 1.0 / radius),
        (straight / 2.0, 0.0),
    ]
    if gap <= 0:
        raise ValueError("straight too short for the S-bend")
    total = float(sum(p[0] for p in pieces))
    n = int(round(total / spacing))
    s = np.linspace(0.0, total, n, endpoint=False)
    # exact integration of piecewise-constant curvature
    x, y = np.empty(n), np.empty(n)
    bounds = np.cumsum([0.0] + [p[0] for p in pieces])
    x0 = y0 = th0 = 0.0
    starts = []
    for (ln, k) in pieces:
        starts.append((x0, y0, th0, k))
        x0, y0, th0 = _arc_end(x0, y0, th0, k, ln)
    for i, si in enumerate(s):
        j = min(np.searchsorted(bounds, si, side="right") - 1, len(pieces) - 1)
        xs, ys, ts, k = starts[j]
        x[i], y[i], _ = _arc_end(xs, ys, ts, k, si - bounds[j])
    w = np.full(n, width)
    return track_from_arrays(s, x, y, w, w, closed=True)


def _arc_end(x, y, th, k, ln):
    if abs(k) < 1e-15:
        return x + ln * np.cos(th), y + ln * np.sin(th), th
    th1 = th + k * ln
    return (x + (np.sin(th1) - np.sin(th)) / k, y - (np.cos(th1) - np.cos(th)) / k, th1)


def chicane_apexes(radius: float = 40.0, straight: float = 250.0, rho: float = 30.0,
                   phi: float = 0.6):
    """Arc lengths of the corner midpoints of ``chicane`` (two hairpins, four S arcs)."""
    s_arc = rho * phi
    gap = (straight - 4 * rho * np.sin(phi)) / 2.0
    a = straight / 2.0
    hairpin1 = a + np.pi * radius / 2.0
    s_start = a + np.pi * radius + gap
    bends = [s_start + (i + 0.5) * s_arc for i in range(4)]
    hairpin2 = s_start + 4 * s_arc + gap + np.pi * radius / 2.0
    return np.array([hairpin1] + bends + [hairpin2])


def straight(length: float = 500.0, width: float = 5.0, spacing: float = 2.0) -> TrackGeometry:
    """Open straight strip along +x."""
    n = int(round(length / spacing)) + 1
    s = np.linspace(0.0, length, n)
    w = np.full(n, width)
    return track_from_arrays(s, s.copy(), np.zeros(n), w, w, closed=False)
