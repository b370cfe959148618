"""Axle-level Magic Formula identification by Levenberg-Marquardt.

Training samples combine the two wheels of an axle (mean slip, summed load
and force). The fit works on parameters scaled by the starting point so all
eight entries are of order one.

The eight-entry vector is not fully identifiable from (slip, load, force)
data: scaling ``F_z0`` by ``lam`` together with ``p_Dy2, p_Ey2`` (times
``lam``), ``p_Dy1, p_Ey1`` (shifted to keep ``p_Dy1 - p_Dy2`` and
``p_Ey1 - p_Ey2``) and ``p_Ky1, p_Ky2`` (divided by ``lam``) leaves every
force unchanged. ``identifiable_combinations`` returns the seven invariant
quantities; ``fixed`` lets a caller pin, e.g., ``F_z0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import IllConditionedFit, SchemaError
from .telemetry import TelemetryLog
from .vehicle import AxleTireParams, axle_lateral_force, axle_lateral_force_dparams

AXLE_WHEELS = {"front": ("fl", "fr"), "rear": ("rl", "rr")}
MIN_LOAD = 100.0


@dataclass(frozen=True)
class AxleTrainingSet:
    alpha: np.ndarray
    Fz: np.ndarray
    Fy: np.ndarray

    def __post_init__(self):
        if not (len(self.alpha) == len(self.Fz) == len(self.Fy)):
            raise SchemaError("training arrays differ in length")
        if len(self.alpha) < len(AxleTireParams.NAMES):
            raise SchemaError("need at least 8 samples")
        if np.any(self.Fz <= 0):
            raise SchemaError("training loads must be positive")

    def __len__(self):
        return len(self.alpha)


def _axle_name(axle) -> str:
    if axle in (1, "1", "front", "f"):
        return "front"
    if axle in (2, "2", "rear", "r"):
        return "rear"
    raise SchemaError(f"unknown axle {axle!r}")


def assemble_training(log: TelemetryLog, axle, *, speed_band=None, ay_band=None
                      ) -> AxleTrainingSet:
    """Average the slips, sum the loads and forces of the axle's two wheels.

    Samples whose summed load is at most 100 N are dropped. ``speed_band``
    and ``ay_band`` (``(low, high)``, using ``u`` and ``u * r``) are
    optional filters, off by default.
    """
    left, right = AXLE_WHEELS[_axle_name(axle)]
    names = [f"{q}_{w}" for q in ("alpha", "fz", "fy") for w in (left, right)]
    log.require(*names)
    alpha = 0.5 * (log[f"alpha_{left}"] + log[f"alpha_{right}"])
    Fz = log[f"fz_{left}"] + log[f"fz_{right}"]
    Fy = log[f"fy_{left}"] + log[f"fy_{right}"]
    keep = Fz > MIN_LOAD
    if speed_band is not None:
        log.require("u")
        keep &= (log["u"] >= speed_band[0]) & (log["u"] <= speed_band[1])
    if ay_band is not None:
        log.require("u", "r")
        ay = np.abs(log["u"] * log["r"])
        keep &= (ay >= ay_band[0]) & (ay <= ay_band[1])
    return AxleTrainingSet(alpha[keep], Fz[keep], Fy[keep])


@dataclass
class FitReport:
    p_hat: AxleTireParams
    residual_rms: float
    iterations: int
    converged: bool
    start: AxleTireParams
    gradient_norm: float = float("nan")
    cost_history: list = field(default_factory=list)
    fixed: tuple = ()
    problems: list = field(default_factory=list)


def identifiable_combinations(p: AxleTireParams) -> dict:
    """The seven load-scaling invariants of the parameter vector."""
    return {
        "p_Cy1": p.p_Cy1,
        "p_Dy1-p_Dy2": p.p_Dy1 - p.p_Dy2,
        "p_Dy2/F_z0": p.p_Dy2 / p.F_z0,
        "p_Ey1-p_Ey2": p.p_Ey1 - p.p_Ey2,
        "p_Ey2/F_z0": p.p_Ey2 / p.F_z0,
        "p_Ky1*F_z0": p.p_Ky1 * p.F_z0,
        "p_Ky2*F_z0": p.p_Ky2 * p.F_z0,
    }


def gauge_transform(p: AxleTireParams, lam: float) -> AxleTireParams:
    """Parameter vector producing identical forces with ``F_z0`` scaled by ``lam``."""
    return AxleTireParams(
        F_z0=lam * p.F_z0, p_Cy1=p.p_Cy1,
        p_Dy1=p.p_Dy1 - p.p_Dy2 + lam * p.p_Dy2, p_Dy2=lam * p.p_Dy2,
        p_Ey1=p.p_Ey1 - p.p_Ey2 + lam * p.p_Ey2, p_Ey2=lam * p.p_Ey2,
        p_Ky1=p.p_Ky1 / lam, p_Ky2=p.p_Ky2 / lam,
    )


def fit_axle(train: AxleTrainingSet, start: AxleTireParams, *, fixed=(), max_iter: int = 200,
             gtol: float = 1e-8) -> FitReport:
    """Least-squares fit of the axle force curve.

    The objective is the mean squared residual normalized by the data's
    force scale, so the gradient test ``|g|_inf <= gtol * (1 + cost)`` does
    not depend on units or sample count.
    """
    names = AxleTireParams.NAMES
    fixed_idx = [names.index(f) for f in fixed]
    free = np.array([i for i in range(len(names)) if i not in fixed_idx])
    p0 = start.as_array()
    scale = np.where(p0 != 0.0, np.abs(p0), 1.0)
    f_scale = max(float(np.max(np.abs(train.Fy))), 1.0)
    norm = 1.0 / (np.sqrt(len(train)) * f_scale)

    def params(z):
        p = p0.copy()
        p[free] = z * scale[free]
        return AxleTireParams.from_array(p)

    def residual(z):
        return norm * (axle_lateral_force(train.alpha, train.Fz, params(z)) - train.Fy)

    def jac(z):
        J = axle_lateral_force_dparams(train.alpha, train.Fz, params(z))
        return norm * J[:, free] * scale[free]

    z = p0[free] / scale[free]
    r = residual(z)
    J = jac(z)
    if not np.all(np.isfinite(J)) or np.any(np.all(J == 0.0, axis=0)):
        raise IllConditionedFit("parameter Jacobian has non-finite or all-zero columns at the "
                                "start; rescale or fix the offending parameters")
    cost = float(r @ r)
    g = 2.0 * J.T @ r
    history = [cost]
    mu = 1e-3 * float(np.max(np.diag(J.T @ J)))
    nu = 2.0
    converged = bool(np.max(np.abs(g)) <= gtol * (1.0 + cost))
    it = 0
    while not converged and it < max_iter:
        it += 1
        A = J.T @ J
        step = np.linalg.solve(A + mu * np.eye(len(z)), -J.T @ r)
        z_new = z + step
        try:
            r_new = residual(z_new)
        except Exception:  # infeasible trial (e.g. non-positive F_z0): reject it
            r_new = None
        if r_new is not None and np.all(np.isfinite(r_new)):
            cost_new = float(r_new @ r_new)
            predicted = float(step @ (mu * step - J.T @ r))  # halved model decrease, times 2
            rho = (cost - cost_new) / max(predicted, 1e-300)
        else:
            rho = -1.0
        if rho > 0:
            z, r, cost = z_new, r_new, cost_new
            J = jac(z)
            g = 2.0 * J.T @ r
            history.append(cost)
            mu *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
            nu = 2.0
        else:
            mu *= nu
            nu *= 2.0
        converged = bool(np.max(np.abs(g)) <= gtol * (1.0 + cost))
        if mu > 1e30:
            break
    p_hat = params(z)
    rms = float(np.sqrt(np.mean((axle_lateral_force(train.alpha, train.Fz, p_hat)
                                 - train.Fy) ** 2)))
    problems = p_hat.validate()
    return FitReport(p_hat=p_hat, residual_rms=rms, iterations=it,
                     converged=converged and not problems, start=start,
                     gradient_norm=float(np.max(np.abs(g))), cost_history=history,
                     fixed=tuple(fixed), problems=problems)


def write_fit_report(path, report: FitReport, axle: str = "") -> None:
    """Key-value text: one line per parameter (estimate and start), then diagnostics."""
    lines = [f"# axle {axle}".rstrip(), "[estimate]"]
    for n in AxleTireParams.NAMES:
        lines.append(f"{n} = {getattr(report.p_hat, n):.10g}")
    lines.append("[start]")
    for n in AxleTireParams.NAMES:
        lines.append(f"{n} = {getattr(report.start, n):.10g}")
    lines.append("[identifiable]")
    for k, v in identifiable_combinations(report.p_hat).items():
        lines.append(f"{k} = {v:.10g}")
    lines += ["[diagnostics]",
              f"residual_rms = {report.residual_rms:.10g}",
              f"iterations = {report.iterations}",
              f"converged = {str(report.converged).lower()}",
              f"gradient_norm = {report.gradient_norm:.6e}",
              f"fixed = {','.join(report.fixed) or 'none'}"]
    for prob in report.problems:
        lines.append(f"problem = {prob}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def synthetic_training(p: AxleTireParams, n: int = 400, seed: int = 0, noise: float = 0.0,
                       alpha_max: float = 0.15, fz_range=(4000.0, 16000.0)) -> AxleTrainingSet:
    """Samples on a slip/load grid with optional multiplicative Gaussian noise."""
    rng = np.random.default_rng(seed)
    alpha = rng.uniform(-alpha_max, alpha_max, n)
    Fz = rng.uniform(*fz_range, n)
    Fy = axle_lateral_force(alpha, Fz, p)
    if noise:
        Fy = Fy * (1.0 + noise * rng.standard_normal(n))
    return AxleTrainingSet(alpha, Fz, Fy)
