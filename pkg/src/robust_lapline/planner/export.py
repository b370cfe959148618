"""Scene-level planning entry point and file exports (reference, ribbon, back-offs)."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from ..backoff import BackoffConfig, write_backoff_table
from ..reference import Reference, reference_from_plan, write_reference
from ..track import make_grid
from .nlp import transcribe
from .robust import plan_robust
from .solve import PlanResult, solve

RIBBON_WIDTH = 1.0


def build_nlp(scene):
    grid = make_grid(scene.track, scene.N)
    return transcribe(grid, scene.car, degree=scene.degree, weights=scene.weights,
                      limits=scene.limits)


def plan_variant(variant: str, scene, *, nominal: PlanResult | None = None, nlp=None,
                 log_path=None) -> PlanResult:
    """Plan one of NOM, TLC or FLC for ``scene``.

    The nominal problem is solved first and warm-starts the robust sweeps;
    pass ``nominal`` (and the ``nlp`` it came from) to reuse it.
    """
    config = BackoffConfig(variant=variant, p=scene.backoff.p, gamma=scene.backoff.gamma)
    if nlp is None:
        nlp = build_nlp(scene)
    if nominal is None:
        nlp.set_backoffs()
        nominal = solve(nlp, max_iter=scene.max_iter, log_path=log_path, variant="NOM")
    else:
        nominal = _copy(nominal)
    return plan_robust(nlp, config, scene.noise, scene.horizon, nominal=nominal,
                       max_sweeps=scene.max_sweeps, max_iter=scene.max_iter, log_path=log_path)


def _copy(plan: PlanResult) -> PlanResult:
    from copy import deepcopy
    return deepcopy(plan)


def ribbon_points(ref: Reference, driver_offset: float = 0.0, width: float = RIBBON_WIDTH):
    """Ribbon centerline and edges in the driver frame.

    The driver point sits ``driver_offset`` metres ahead of the CoM along
    the body axis; the edges lie ``width / 2`` to either side along the
    normal of that point's direction of travel.
    """
    cx = ref.x + driver_offset * np.cos(ref.psi)
    cy = ref.y + driver_offset * np.sin(ref.psi)
    course = ref.psi + np.arctan2(ref.v + ref.r * driver_offset, ref.u)
    nx, ny = -np.sin(course), np.cos(course)
    half = 0.5 * width
    return cx, cy, cx + half * nx, cy + half * ny, cx - half * nx, cy - half * ny


def pedal_color(ref: Reference) -> np.ndarray:
    """Map the net longitudinal force to [0, 1]: full traction 1, hardest braking 0."""
    F = ref.X2a + ref.X2b
    out = np.full(F.shape, 0.5)
    top, bottom = F.max(), F.min()
    if top > 0:
        pos = F > 0
        out[pos] = 0.5 + 0.5 * F[pos] / top
    if bottom < 0:
        neg = F < 0
        out[neg] = 0.5 - 0.5 * F[neg] / bottom
    return np.clip(out, 0.0, 1.0)


def write_ribbon(path, ref: Reference, driver_offset: float = 0.0) -> None:
    cx, cy, lx, ly, rx, ry = ribbon_points(ref, driver_offset)
    color = pedal_color(ref)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "s", "x", "y", "x_left", "y_left", "x_right", "y_right", "color"])
        for k in range(len(ref.s)):
            w.writerow([k] + [f"{v:.9e}" for v in (ref.s[k], cx[k], cy[k], lx[k], ly[k],
                                                   rx[k], ry[k], color[k])])


def export_reference(plan: PlanResult, track, out_dir, stem: str | None = None,
                     driver_offset: float = 0.0) -> dict:
    """Write reference, ribbon and back-off CSVs; returns their paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = stem or plan.variant.lower()
    ref = reference_from_plan(plan, track)
    paths = {
        "reference": out_dir / f"{stem}_ref.csv",
        "ribbon": out_dir / f"{stem}_ribbon.csv",
        "backoffs": out_dir / f"{stem}_backoffs.csv",
    }
    write_reference(paths["reference"], ref)
    write_ribbon(paths["ribbon"], ref, driver_offset)
    write_backoff_table(paths["backoffs"], plan.s[: plan.N], {
        "TLC": (plan.sigma_tlc, plan.beta_tlc),
        "FLC1": (plan.sigma_flc[:, 0], plan.beta_flc[:, 0]),
        "FLC2": (plan.sigma_flc[:, 1], plan.beta_flc[:, 1]),
    })
    return paths
