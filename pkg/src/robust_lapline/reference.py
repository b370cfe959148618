"""Per-node reference trajectory shared by export, validation and metrics.

Rows run from node 0 to node N inclusive; on a closed lap the last row
repeats node 0 at ``s = L`` and ``t = lap time``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import SchemaError
from .track import TrackGeometry

REFERENCE_COLUMNS = ("k", "s", "x", "y", "psi", "u_ref", "v", "r", "n", "chi", "t", "delta",
                     "X2a", "X2b", "beta_ref", "beta_tlc", "beta_flc1", "beta_flc2")


@dataclass
class Reference:
    s: np.ndarray
    x: np.ndarray
    y: np.ndarray
    psi: np.ndarray
    u: np.ndarray
    v: np.ndarray
    r: np.ndarray
    n: np.ndarray
    chi: np.ndarray
    t: np.ndarray
    delta: np.ndarray
    X2a: np.ndarray
    X2b: np.ndarray
    beta_ref: np.ndarray
    beta_tlc: np.ndarray
    beta_flc1: np.ndarray
    beta_flc2: np.ndarray
    closed: bool = True

    @property
    def n_intervals(self) -> int:
        return len(self.s) - 1

    @property
    def lap_time(self) -> float:
        return float(self.t[-1] - self.t[0])

    def cartesian(self, k) -> np.ndarray:
        """Cartesian state ``(u, v, r, x_G, y_G, psi)`` at node(s) ``k``."""
        return np.stack([self.u[k], self.v[k], self.r[k], self.x[k], self.y[k], self.psi[k]],
                        axis=-1)

    def inputs(self, k) -> np.ndarray:
        """Inputs held over interval ``k`` (``(X2a, X2b, delta)``)."""
        return np.stack([self.X2a[k], self.X2b[k], self.delta[k]], axis=-1)

    def node(self, k: int) -> int:
        """Node index with wraparound on closed laps."""
        n = self.n_intervals
        if self.closed:
            return k % n
        if not 0 <= k <= n:
            raise IndexError(f"node {k} outside the open reference")
        return k

    def interval_dt(self, k: int) -> float:
        k = self.node(k)
        return float(self.t[k + 1] - self.t[k])


def reference_from_plan(plan, track: TrackGeometry) -> Reference:
    """Per-node reference from a solved plan (Frenet states mapped to the world)."""
    from .planner.robust import frenet_to_cartesian

    N = plan.N
    s = np.append(plan.s[:N], plan.s[0] + track.total_length) if plan.closed else plan.s
    s = np.asarray(s[: N + 1], dtype=float)
    X = plan.X.copy()
    cart = frenet_to_cartesian(track, s, X)
    U = np.vstack([plan.U, plan.U[:1] if plan.closed else plan.U[-1:]])
    beta_t = np.append(plan.beta_tlc, plan.beta_tlc[0] if plan.closed else plan.beta_tlc[-1])
    beta_f = np.vstack([plan.beta_flc, plan.beta_flc[:1] if plan.closed else plan.beta_flc[-1:]])
    return Reference(
        s=s, x=cart[:, 3], y=cart[:, 4], psi=cart[:, 5], u=X[:, 0], v=X[:, 1], r=X[:, 2],
        n=X[:, 3], chi=X[:, 4], t=X[:, 5], delta=U[:, 2], X2a=U[:, 0], X2b=U[:, 1],
        beta_ref=np.arctan2(X[:, 1], X[:, 0]), beta_tlc=beta_t, beta_flc1=beta_f[:, 0],
        beta_flc2=beta_f[:, 1], closed=plan.closed,
    )


_FIELD_OF = {"u_ref": "u"}


def write_reference(path, ref: Reference) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REFERENCE_COLUMNS)
        for k in range(len(ref.s)):
            row = [k]
            for col in REFERENCE_COLUMNS[1:]:
                row.append(f"{getattr(ref, _FIELD_OF.get(col, col))[k]:.12e}")
            w.writerow(row)


def read_reference(path, closed: bool = True) -> Reference:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(REFERENCE_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise SchemaError(f"reference file lacks columns {sorted(missing)}")
        rows = list(reader)
    if len(rows) < 3:
        raise SchemaError("reference file has too few rows")
    data = {}
    for col in REFERENCE_COLUMNS[1:]:
        data[_FIELD_OF.get(col, col)] = np.array([float(r[col]) for r in rows])
    names = {f.name for f in fields(Reference)}
    return Reference(**{k: v for k, v in data.items() if k in names}, closed=closed)
