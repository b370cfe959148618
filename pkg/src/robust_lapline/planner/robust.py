"""Robust variants: covariance replicas along a plan and the back-off fixed point."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..backoff import BackoffConfig, friction_backoffs, track_backoffs
from ..errors import ConfigError, InfeasibleProblem, NotConverged
from ..track import TrackGeometry
from ..uncertainty import CovarianceReplicas, NoiseModel, affine_maps, replicas_from_maps
from ..vehicle import Car, jacobian_A
from .nlp import NLP
from .solve import PlanResult, solve

log = logging.getLogger(__name__)


def frenet_to_cartesian(track: TrackGeometry, s, X) -> np.ndarray:
    """Map ``(u, v, r, n, chi, t)`` at abscissa ``s`` to ``(u, v, r, x_G, y_G, psi)``.

    No corridor clamping: a state slightly outside the band maps to its true
    world position.
    """
    s = np.asarray(s, dtype=float)
    X = np.asarray(X, dtype=float)
    cx, cy = track.centerline(s)
    th = track.heading(s)
    n = X[..., 3]
    out = np.empty(X.shape[:-1] + (6,))
    out[..., :3] = X[..., :3]
    out[..., 3] = cx - n * np.sin(th)
    out[..., 4] = cy + n * np.cos(th)
    out[..., 5] = th + X[..., 4]
    return out


@dataclass(frozen=True)
class Belief:
    """Mean trajectory in Cartesian form plus its covariance replicas."""

    nodes: np.ndarray        # (n_nodes, 6) Cartesian node means
    colloc: np.ndarray       # (N, d, 6) Cartesian collocation means
    dt: np.ndarray           # (N,) interval durations
    replicas: CovarianceReplicas
    substeps: int


def belief_along(plan: PlanResult, nlp: NLP, noise: NoiseModel, H: int,
                 substeps=None) -> Belief:
    """Covariance replicas along a solved mean trajectory."""
    grid, colloc = nlp.grid, nlp.colloc
    N = grid.N
    s_col = grid.s[:N, None] + colloc.points[None] * grid.ds
    mean_col = frenet_to_cartesian(grid.track, s_col, plan.XC)
    nodes = frenet_to_cartesian(grid.track, grid.s[: N + 1], plan.X)
    dt = np.diff(plan.X[:, 5])
    u_rep = np.repeat(plan.U[:, None, :], colloc.d, axis=1)
    A = jacobian_A(mean_col, u_rep, nlp.car)
    M, c, nsub = affine_maps(A, colloc.points, dt, noise.Q, substeps)
    reps = replicas_from_maps(M, c, noise.P0_bar, H, closed=nlp.closed)
    return Belief(nodes=nodes, colloc=mean_col, dt=dt, replicas=reps, substeps=nsub)


def backoffs_from_belief(belief: Belief, plan: PlanResult, nlp: NLP, config: BackoffConfig):
    """Sigma and beta of both families at every node (``N`` nodes)."""
    N = nlp.grid.N
    P_H = belief.replicas.most_propagated()[:N]
    theta = nlp.grid.track.heading(nlp.grid.s[:N])
    sig_t, beta_t = track_backoffs(P_H, theta, config.multiplier("TLC"))
    sig_f, beta_f = friction_backoffs(belief.nodes[:N], plan.U, P_H, nlp.car,
                                      config.multiplier("FLC"))
    return dict(sigma_tlc=sig_t, beta_tlc=beta_t, sigma_flc=sig_f, beta_flc=beta_f)


def _active(values: dict, config: BackoffConfig, N: int):
    beta_t = values["beta_tlc"] if config.active("TLC") else np.zeros(N)
    beta_f = values["beta_flc"] if config.active("FLC") else np.zeros((N, 2))
    return beta_t, beta_f


def _relative_change(new, old) -> float:
    scale = max(float(np.max(np.abs(new))), 1e-12)
    return float(np.max(np.abs(new - old))) / scale


def plan_robust(nlp: NLP, config: BackoffConfig, noise: NoiseModel, H: int, *,
                nominal: PlanResult | None = None, max_sweeps: int = 5, rtol: float = 0.01,
                substeps=None, max_iter: int = 3000, log_path=None) -> PlanResult:
    """Solve one variant by the fixed-point back-off loop.

    The nominal problem is solved first (unless given) and warm-starts every
    sweep. Each sweep evaluates replicas and back-offs on the current mean,
    installs them as bound shifts and re-solves; the loop stops once the
    back-offs move by less than ``rtol`` (relative to their maximum).
    """
    if max_sweeps < 1:
        raise ConfigError("max_sweeps must be at least 1")
    N = nlp.grid.N
    if nominal is None:
        nlp.set_backoffs()
        nominal = solve(nlp, max_iter=max_iter, log_path=log_path, variant="NOM")
    plan = nominal
    values = backoffs_from_belief(belief_along(plan, nlp, noise, H, substeps), plan, nlp, config)
    if config.variant == "NOM":
        return _finish(nominal, values, config, sweeps=0, converged=True)
    beta_t, beta_f = _active(values, config, N)
    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        nlp.set_backoffs(beta_t, beta_f)
        plan = _resolve(nlp, plan, max_iter, log_path, config.variant)
        values = backoffs_from_belief(belief_along(plan, nlp, noise, H, substeps),
                                      plan, nlp, config)
        new_t, new_f = _active(values, config, N)
        change = max(_relative_change(new_t, beta_t), _relative_change(new_f, beta_f))
        log.info("%s sweep %d: lap %.4f s, back-off change %.3g", config.variant, sweeps,
                 plan.lap_time, change)
        if change < rtol:
            converged = True
            break
        beta_t, beta_f = new_t, new_f
    return _finish(plan, values, config, sweeps=sweeps, converged=converged)


def _resolve(nlp: NLP, previous: PlanResult, max_iter: int, log_path, variant: str):
    """Re-solve after a bound shift: primal-dual warm start, then primal only, then cold."""
    attempts = [(previous.w_opt, None), (None, None)]
    multipliers = getattr(previous, "_multipliers", None)
    if multipliers is not None:
        attempts.insert(0, (previous.w_opt, multipliers))
    error = None
    for w0, mult in attempts:
        try:
            return solve(nlp, w0, max_iter=max_iter, log_path=log_path, variant=variant,
                         multipliers=mult)
        except (NotConverged, InfeasibleProblem) as exc:
            log.info("%s re-solve attempt failed (%s); trying the next start", variant, exc)
            error = exc
    raise error


def _finish(plan: PlanResult, values: dict, config: BackoffConfig, sweeps: int,
            converged: bool) -> PlanResult:
    plan.variant = config.variant
    plan.sigma_tlc = values["sigma_tlc"]
    plan.sigma_flc = values["sigma_flc"]
    plan.posthoc_beta_tlc = values["beta_tlc"]
    plan.posthoc_beta_flc = values["beta_flc"]
    plan.sweeps = sweeps
    plan.fixed_point_converged = converged
    return plan
