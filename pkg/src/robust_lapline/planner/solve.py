"""IPOPT solve of a transcribed problem and the resulting plan record."""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import casadi as ca
import numpy as np

from ..errors import InfeasibleProblem, NotConverged
from .nlp import NLP, NU, NX

_INFEASIBLE = {"Infeasible_Problem_Detected", "Restoration_Failed",
               "Error_In_Step_Computation", "Not_Enough_Degrees_Of_Freedom"}


@dataclass
class SolverStats:
    status: str
    iterations: int
    kkt_residual: float
    constraint_violation: float
    objective: float
    success: bool
    log: list = field(default_factory=list)


@dataclass
class PlanResult:
    """Solved reference for one variant.

    Node arrays have ``N`` entries for closed laps (the closing node equals
    node 0) and ``N + 1`` for open problems.
    """

    variant: str
    lap_time: float
    s: np.ndarray
    X: np.ndarray          # (N+1, 6) Frenet states
    XC: np.ndarray         # (N, d, 6) collocation states
    U: np.ndarray          # (N, 3) inputs per interval
    slack: np.ndarray      # (N, 4)
    beta_tlc: np.ndarray   # (N,)
    beta_flc: np.ndarray   # (N, 2)
    sigma_tlc: np.ndarray
    sigma_flc: np.ndarray
    stats: SolverStats
    closed: bool
    steer_weight: float
    cost_parts: dict
    sweeps: int = 0
    fixed_point_converged: bool = True
    posthoc_beta_tlc: np.ndarray = None
    posthoc_beta_flc: np.ndarray = None
    w_opt: np.ndarray = field(default=None, repr=False)

    @property
    def N(self) -> int:
        return self.U.shape[0]

    @property
    def speed(self) -> np.ndarray:
        return self.X[: self.N, 0]

    @property
    def sideslip(self) -> np.ndarray:
        return np.arctan2(self.X[: self.N, 1], self.X[: self.N, 0])

    @property
    def slack_mass(self) -> float:
        return float(np.sum(np.abs(self.slack)))


def speed_profile(grid, car, a_lat: float = 9.0, a_brake: float = 8.0, u_cap: float = 60.0):
    """Quasi-steady forward/backward speed profile on the centerline."""
    vp = car.vp
    N, ds = grid.N, grid.ds
    kappa = np.abs(grid.kappa[:N])
    u = np.minimum(np.sqrt(a_lat / np.maximum(kappa, 1e-9)), u_cap)
    closed = grid.track.closed
    sweeps = 2 if closed else 1
    for _ in range(sweeps):
        for k in range(1 if not closed else 0, N):
            prev = u[k - 1]
            a = min(vp.X2a_max, vp.P_max / prev) / vp.m
            u[k] = min(u[k], np.sqrt(prev**2 + 2 * a * ds))
        for k in range(N - 2 if not closed else N - 1, -1, -1):
            nxt = u[(k + 1) % N]
            u[k] = min(u[k], np.sqrt(nxt**2 + 2 * a_brake * ds))
    return u


def initial_guess(nlp: NLP, speed: float | None = None) -> np.ndarray:
    """Centerline run with kinematic steering.

    Uses a quasi-steady speed profile unless a constant ``speed`` is given.
    """
    grid, car = nlp.grid, nlp.car
    vp = car.vp
    N, d = grid.N, nlp.colloc.d
    if speed is None:
        u = speed_profile(grid, car)
    else:
        u = np.full(N, float(speed))
    lo, hi = nlp.limits.u_min + 0.5, nlp.limits.u_max - 0.5
    u = np.clip(u, lo, hi)
    u_nodes = np.append(u, u[0] if nlp.closed else u[-1])
    t = np.concatenate([[0.0], np.cumsum(2.0 * grid.ds / (u_nodes[:-1] + u_nodes[1:]))])
    kappa_n = grid.kappa[: N + 1]
    X = np.zeros((N + 1, NX))
    X[:, 0] = u_nodes
    X[:, 2] = u_nodes * kappa_n
    X[:, 5] = t
    tau = nlp.colloc.points[None]
    XC = np.zeros((N, d, NX))
    XC[..., 0] = u_nodes[:-1, None] * (1 - tau) + u_nodes[1:, None] * tau
    XC[..., 2] = XC[..., 0] * nlp.kappa_colloc
    XC[..., 5] = t[:-1, None] * (1 - tau) + t[1:, None] * tau
    U = np.zeros((N, NU))
    U[:, 2] = np.clip(vp.L * grid.kappa[:N], -vp.delta_max, vp.delta_max)
    force = vp.m * (u_nodes[1:] ** 2 - u_nodes[:-1] ** 2) / (2.0 * grid.ds)
    U[:, 0] = np.maximum(force, 0.0) + 200.0
    U[:, 1] = np.minimum(force, 0.0)
    w0 = nlp.pack(X, XC, U)
    return np.clip(w0, nlp.lbx, nlp.ubx)


def _options(max_iter: int, tol: float, log_path, warm: bool) -> dict:
    opts = {
        "ipopt.max_iter": int(max_iter),
        "ipopt.tol": tol,
        "ipopt.constr_viol_tol": tol,
        "ipopt.dual_inf_tol": tol,
        "ipopt.compl_inf_tol": tol,
        "ipopt.acceptable_iter": 0,
        "ipopt.linear_solver": "mumps",
        "ipopt.mu_strategy": "adaptive",
        "ipopt.honor_original_bounds": "yes",
        "ipopt.print_level": 0,
        "ipopt.sb": "yes",
        "print_time": False,
        "record_time": False,
    }
    if log_path:
        opts["ipopt.output_file"] = str(log_path)
        opts["ipopt.file_print_level"] = 5
    if warm:
        opts.update({"ipopt.warm_start_init_point": "yes",
                     "ipopt.warm_start_bound_push": 1e-9,
                     "ipopt.warm_start_mult_bound_push": 1e-9,
                     "ipopt.mu_init": 1e-5})
    return opts


def solve(nlp: NLP, warm_start=None, *, max_iter: int = 3000, tol: float = 1e-8,
          log_path=None, variant: str = "NOM", multipliers=None, raise_on_failure=True):
    """Solve ``nlp`` from ``warm_start`` (a scaled decision vector or ``None``).

    ``multipliers`` (``lam_x``, ``lam_g``) enable an IPOPT warm start.
    Raises ``NotConverged`` or ``InfeasibleProblem`` carrying the best iterate.
    """
    w0 = initial_guess(nlp) if warm_start is None else np.clip(warm_start, nlp.lbx, nlp.ubx)
    warm = multipliers is not None
    key = ("solver", warm, max_iter, tol, str(log_path))
    solver = nlp._functions.get(key)
    if solver is None:
        solver = ca.nlpsol("mlt", "ipopt", nlp.problem, _options(max_iter, tol, log_path, warm))
        nlp._functions[key] = solver
    args = dict(x0=w0, lbx=nlp.lbx, ubx=nlp.ubx, lbg=nlp.lbg, ubg=nlp.ubg)
    if warm:
        args["lam_x0"], args["lam_g0"] = multipliers
    sol = solver(**args)
    st = solver.stats()
    w = np.asarray(sol["x"]).reshape(-1)
    it = st.get("iterations", {})
    inf_du = float(it["inf_du"][-1]) if it.get("inf_du") else float("nan")
    stats = SolverStats(
        status=st["return_status"],
        iterations=int(st["iter_count"]),
        kkt_residual=inf_du,
        constraint_violation=nlp.constraint_violation(w),
        objective=float(sol["f"]),
        success=bool(st["success"]),
        log=[(k, float(p), float(d)) for k, (p, d) in
             enumerate(zip(it.get("inf_pr", []), it.get("inf_du", [])))],
    )
    result = _assemble(nlp, w, stats, variant)
    result._multipliers = (np.asarray(sol["lam_x"]).reshape(-1),
                           np.asarray(sol["lam_g"]).reshape(-1))
    if raise_on_failure and not stats.success:
        if stats.status in _INFEASIBLE:
            raise InfeasibleProblem(f"solver stopped with {stats.status}", result)
        raise NotConverged(f"solver stopped with {stats.status} after "
                           f"{stats.iterations} iterations", result)
    return result


def _assemble(nlp: NLP, w, stats: SolverStats, variant: str) -> PlanResult:
    parts = nlp.unpack(w)
    X, XC, U, SL = parts["X"], parts["XC"], parts["U"], parts["SL"]
    lap, steer, slack = (float(v) for v in nlp._functions["parts"](w))
    N = nlp.grid.N
    s = nlp.grid.s[: N + 1] if not nlp.closed else nlp.grid.s[:N]
    return PlanResult(
        variant=variant, lap_time=lap, s=np.asarray(s), X=X, XC=XC, U=U, slack=SL,
        beta_tlc=nlp.beta_tlc.copy(), beta_flc=nlp.beta_flc.copy(),
        sigma_tlc=np.zeros(N), sigma_flc=np.zeros((N, 2)), stats=stats, closed=nlp.closed,
        steer_weight=nlp.weights.steer,
        cost_parts={"lap_time": lap, "steer": nlp.weights.steer * steer,
                    "slack": nlp.weights.slack * slack},
        w_opt=w,
    )


def write_solver_log(path, stats: SolverStats) -> None:
    """Plain-text per-iteration primal and dual infeasibility."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"status {stats.status}\niterations {stats.iterations}\n")
        fh.write("iter inf_pr inf_du\n")
        for k, p, d in stats.log:
            fh.write(f"{k} {p:.6e} {d:.6e}\n")


def scratch_log() -> Path:
    fd, name = tempfile.mkstemp(prefix="ipopt_", suffix=".log")
    os.close(fd)
    return Path(name)
