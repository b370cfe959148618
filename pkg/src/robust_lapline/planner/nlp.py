"""Direct collocation transcription of the spatial minimum-lap-time problem.

Decision variables are stored scaled; ``NLP.unpack`` returns physical values.
Back-offs enter only through bounds, so a transcription is built once and
re-solved with new tightenings.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import casadi as ca
import numpy as np

from ..errors import TranscriptionError
from ..track import SpatialGrid
from ..vehicle import Car, _Casadi, body_accelerations, axle_forces, U_MIN
from .collocation import CollocationGrid, gauss_legendre

NX = 6  # u, v, r, n, chi, t
NU = 3  # X2a, X2b, delta
NC = 2  # decision controls per interval: longitudinal force F, delta
FRENET_NAMES = ("u", "v", "r", "n", "chi", "t")


@dataclass(frozen=True)
class Weights:
    steer: float = 10.0      # s per (rad/m)^2 * m
    slack: float = 1e3       # s per unit of slack


@dataclass(frozen=True)
class Limits:
    u_min: float = 2.0
    u_max: float = 100.0
    v_max: float = 15.0
    r_max: float = 3.0
    chi_max: float = 1.2
    sdot_min: float = 1.0
    z_min_fraction: float = 0.05   # of static axle load
    brake_max_g: float = 3.0       # |X2b| bound as multiple of m*g
    split_eps: float = 20.0        # N, smoothing of the traction/brake split


@dataclass
class OpenStart:
    """Fixed initial state for open (non-periodic) test problems."""

    u: float
    v: float = 0.0
    r: float = 0.0
    n: float = 0.0
    chi: float = 0.0


def split_force(F, eps, lib=np):
    """Smooth complementary split of a net force into traction and braking.

    ``X2a - X2b`` is a hyperbola through ``(eps/2, -eps/2)`` at ``F = 0`` so
    the product ``X2a * X2b = -eps**2 / 4`` stays negligible while both
    branches remain differentiable.
    """
    root = lib.sqrt(F * F + eps * eps)
    return 0.5 * (F + root), 0.5 * (F - root)


def spatial_rhs(X, U, kappa, car: Car):
    """``dX/ds`` of the curvilinear state; also returns ``s_dot``."""
    u, v, r, n, chi = X[0], X[1], X[2], X[3], X[4]
    du, dv, dr = body_accelerations(u, v, r, U[0], U[1], U[2], car, lib=_Casadi)
    sdot = (u * ca.cos(chi) - v * ca.sin(chi)) / (1.0 - n * kappa)
    dn = u * ca.sin(chi) + v * ca.cos(chi)
    dchi = r - kappa * sdot
    return ca.vertcat(du, dv, dr, dn, dchi, 1.0) / sdot, sdot


@dataclass
class NLP:
    """A transcribed problem ready for IPOPT."""

    grid: SpatialGrid
    colloc: CollocationGrid
    car: Car
    closed: bool
    problem: dict
    lbx: np.ndarray
    ubx: np.ndarray
    lbg: np.ndarray
    ubg: np.ndarray
    x_scale: np.ndarray
    u_scale: np.ndarray
    idx: dict
    g_idx: dict
    counts: dict
    weights: Weights
    limits: Limits
    kappa_colloc: np.ndarray
    _functions: dict = field(default_factory=dict, repr=False)

    @property
    def n_var(self) -> int:
        return len(self.lbx)

    @property
    def n_con(self) -> int:
        return len(self.lbg)

    def unpack(self, w) -> dict:
        """Physical arrays from a scaled decision vector."""
        w = np.asarray(w, dtype=float).reshape(-1)
        N, d = self.grid.N, self.colloc.d
        X = w[self.idx["X"]].reshape(N + 1, NX) * self.x_scale
        XC = w[self.idx["XC"]].reshape(N, d, NX) * self.x_scale
        ctrl = w[self.idx["U"]].reshape(N, NC) * self.u_scale
        X2a, X2b = split_force(ctrl[:, 0], self.limits.split_eps)
        U = np.stack([X2a, X2b, ctrl[:, 1]], axis=1)
        SL = w[self.idx["SL"]].reshape(N, 4)
        return dict(X=X, XC=XC, U=U, SL=SL)

    def pack(self, X, XC, U, SL=None) -> np.ndarray:
        N = self.grid.N
        w = np.zeros(self.n_var)
        w[self.idx["X"]] = (np.asarray(X) / self.x_scale).reshape(-1)
        w[self.idx["XC"]] = (np.asarray(XC) / self.x_scale).reshape(-1)
        U = np.asarray(U, dtype=float)
        ctrl = np.stack([U[:, 0] + U[:, 1], U[:, 2]], axis=1)
        w[self.idx["U"]] = (ctrl / self.u_scale).reshape(-1)
        w[self.idx["SL"]] = 0.0 if SL is None else np.asarray(SL).reshape(-1)
        return w

    def set_backoffs(self, beta_tlc=None, beta_flc=None) -> None:
        """Install per-node tightenings (arrays of length N; FLC shape (N, 2))."""
        N = self.grid.N
        beta_tlc = np.zeros(N) if beta_tlc is None else np.asarray(beta_tlc, dtype=float)
        beta_flc = np.zeros((N, 2)) if beta_flc is None else np.asarray(beta_flc, dtype=float)
        if beta_tlc.shape != (N,) or beta_flc.shape != (N, 2):
            raise TranscriptionError("back-off arrays must match the node count")
        if np.any(beta_tlc < 0) or np.any(beta_flc < 0):
            raise TranscriptionError("back-offs must be non-negative")
        wl, wr = self.grid.w_left[:N], self.grid.w_right[:N]
        self.ubg[self.g_idx["n_left"]] = wl - beta_tlc
        self.lbg[self.g_idx["n_right"]] = -wr + beta_tlc
        self.ubg[self.g_idx["S1"]] = 1.0 - beta_flc[:, 0]
        self.ubg[self.g_idx["S2"]] = 1.0 - beta_flc[:, 1]
        sl = self.idx["SL"]
        ub = np.stack([beta_tlc, beta_tlc, beta_flc[:, 0], beta_flc[:, 1]], axis=1)
        self.lbx[sl] = 0.0
        self.ubx[sl] = ub.reshape(-1)
        self.beta_tlc = beta_tlc
        self.beta_flc = beta_flc

    def function(self, name: str) -> ca.Function:
        """Cached CasADi functions: ``g``, ``jac_g``, ``f``."""
        if name not in self._functions:
            w = self.problem["x"]
            if name == "g":
                fn = ca.Function("g", [w], [self.problem["g"]])
            elif name == "f":
                fn = ca.Function("f", [w], [self.problem["f"]])
            elif name == "jac_g":
                fn = ca.Function("jac_g", [w], [ca.jacobian(self.problem["g"], w)])
            else:
                raise KeyError(name)
            self._functions[name] = fn
        return self._functions[name]

    def constraint_violation(self, w) -> float:
        g = np.asarray(self.function("g")(w)).reshape(-1)
        viol_g = np.maximum(self.lbg - g, 0.0) + np.maximum(g - self.ubg, 0.0)
        viol_x = np.maximum(self.lbx - w, 0.0) + np.maximum(w - self.ubx, 0.0)
        return float(max(viol_g.max(initial=0.0), viol_x.max(initial=0.0)))


def default_scales(car: Car, lap_time_guess: float, width: float):
    x_scale = np.array([30.0, 2.0, 1.0, max(width, 1.0), 0.5, max(lap_time_guess, 1.0)])
    u_scale = np.array([1e4, 0.2])
    return x_scale, u_scale


def transcribe(grid: SpatialGrid, car: Car, *, degree: int = 3, weights: Weights = Weights(),
               limits: Limits = Limits(), closed: bool | None = None,
               open_start: OpenStart | None = None, lap_time_guess: float | None = None) -> NLP:
    """Build the collocation NLP (without back-offs; see ``NLP.set_backoffs``)."""
    closed = grid.track.closed if closed is None else closed
    if not closed and open_start is None:
        raise TranscriptionError("open problems need a fixed initial state")
    N, ds = grid.N, grid.ds
    colloc = gauss_legendre(degree)
    d = colloc.d
    vp = car.vp

    width = float(max(grid.w_left.max(), grid.w_right.max()))
    if lap_time_guess is None:
        lap_time_guess = grid.track.total_length / 25.0
    x_scale, u_scale = default_scales(car, lap_time_guess, width)

    nX, nXC, nU, nSL = (N + 1) * NX, N * d * NX, N * NC, N * 4
    w = ca.SX.sym("w", nX + nXC + nU + nSL)
    idx = {}
    o = 0
    for name, size in (("X", nX), ("XC", nXC), ("U", nU), ("SL", nSL)):
        idx[name] = np.arange(o, o + size)
        o += size
    Xs = ca.reshape(w[idx["X"][0]:idx["X"][-1] + 1], NX, N + 1)
    XCs = ca.reshape(w[idx["XC"][0]:idx["XC"][-1] + 1], NX, N * d)
    Cs = ca.reshape(w[idx["U"][0]:idx["U"][-1] + 1], NC, N)
    SL = ca.reshape(w[idx["SL"][0]:idx["SL"][-1] + 1], 4, N)
    xs = ca.DM(x_scale)
    us = ca.DM(u_scale)
    X = Xs * ca.repmat(xs, 1, N + 1)
    XC = XCs * ca.repmat(xs, 1, N * d)
    ctrl = Cs * ca.repmat(us, 1, N)
    X2a, X2b = split_force(ctrl[0, :], limits.split_eps, ca)
    U = ca.vertcat(X2a, X2b, ctrl[1, :])

    # symbolic dynamics, mapped over all collocation points at once
    xsym = ca.SX.sym("x", NX)
    usym = ca.SX.sym("u", NU)
    ksym = ca.SX.sym("k")
    rhs, sdot = spatial_rhs(xsym, usym, ksym, car)
    F = ca.Function("F", [xsym, usym, ksym], [rhs, sdot])
    forces = axle_forces(xsym[0], xsym[1], xsym[2], usym[0], usym[1], usym[2], car, lib=_Casadi)
    node_fn = ca.Function("node", [xsym, usym], [
        forces["S1"], forces["S2"], forces["Z1"], forces["Z2"],
        xsym[0] * ca.cos(xsym[4]) - xsym[1] * ca.sin(xsym[4])])

    s_col = (grid.s[:N, None] + colloc.points[None, :] * ds).reshape(-1)
    kappa_col = np.asarray(grid.kappa_at(s_col), dtype=float)
    U_rep = ca.horzcat(*[ca.repmat(U[:, k], 1, d) for k in range(N)])
    F_map = F.map(N * d)
    rhs_col, sdot_col = F_map(XC, U_rep, ca.DM(kappa_col).T)

    g_parts, g_idx = [], {}
    lbg, ubg = [], []
    go = 0

    def add(name, expr, lo, hi):
        nonlocal go
        expr = ca.vec(expr)
        n = expr.shape[0]
        g_parts.append(expr)
        g_idx[name] = np.arange(go, go + n)
        lbg.append(np.broadcast_to(np.asarray(lo, dtype=float), (n,)).copy())
        ubg.append(np.broadcast_to(np.asarray(hi, dtype=float), (n,)).copy())
        go += n

    # collocation residuals (scaled by the state scale) and continuity
    C, Dend = colloc.C, colloc.D
    dyn = []
    cont = []
    for k in range(N):
        Z = [Xs[:, k]] + [XCs[:, k * d + j] for j in range(d)]
        for j in range(1, d + 1):
            dZ = sum(C[i, j] * Z[i] for i in range(d + 1))
            dyn.append(dZ - ds * rhs_col[:, k * d + j - 1] / xs)
        end = sum(Dend[i] * Z[i] for i in range(d + 1))
        cont.append(Xs[:, k + 1] - end)
    add("dynamics", ca.horzcat(*dyn), 0.0, 0.0)
    add("continuity", ca.horzcat(*cont), 0.0, 0.0)

    if closed:
        add("periodic", Xs[:5, N] - Xs[:5, 0], 0.0, 0.0)

    # node-wise path constraints, node k with the input of interval k
    S1, S2, Z1, Z2, sd_node = node_fn.map(N)(X[:, :N], U)
    wl, wr = grid.w_left[:N], grid.w_right[:N]
    add("n_left", X[3, :N] - SL[0, :], -np.inf, wl)
    add("n_right", X[3, :N] + SL[1, :], -wr, np.inf)
    add("S1", S1 - SL[2, :], -np.inf, 1.0)
    add("S2", S2 - SL[3, :], -np.inf, 1.0)
    z_min = limits.z_min_fraction * vp.m * vp.g
    add("Z1", Z1 / 1e4, z_min / 1e4, np.inf)
    add("Z2", Z2 / 1e4, z_min / 1e4, np.inf)
    add("power", U[0, :] * X[0, :N] / vp.P_max, -np.inf, 1.0)
    add("sdot", sd_node, limits.sdot_min, np.inf)
    add("sdot_colloc", sdot_col, limits.sdot_min, np.inf)

    g = ca.vertcat(*g_parts)

    # cost: lap time + steering smoothness + slack penalty
    lap_time = X[5, N] - X[5, 0]
    if closed:
        ddelta = ca.horzcat(U[2, 1:] - U[2, :-1], U[2, 0] - U[2, N - 1])
    else:
        ddelta = U[2, 1:] - U[2, :-1]
    steer = ca.sumsqr(ddelta) / ds
    slack = ca.sum1(ca.sum2(SL))
    f = lap_time + weights.steer * steer + weights.slack * slack

    # variable bounds
    lo_x = np.array([limits.u_min, -limits.v_max, -limits.r_max, -width, -limits.chi_max, 0.0])
    hi_x = np.array([limits.u_max, limits.v_max, limits.r_max, width, limits.chi_max, np.inf])
    lbx = np.zeros(len(idx["X"]) + len(idx["XC"]) + len(idx["U"]) + len(idx["SL"]))
    ubx = np.zeros_like(lbx)
    lbx[idx["X"]] = np.tile(lo_x / x_scale, N + 1)
    ubx[idx["X"]] = np.tile(hi_x / x_scale, N + 1)
    lbx[idx["XC"]] = np.tile(lo_x / x_scale, N * d)
    ubx[idx["XC"]] = np.tile(hi_x / x_scale, N * d)
    # F upper bound chosen so the traction branch reaches X2a_max exactly
    eps = limits.split_eps
    lo_u = np.array([-limits.brake_max_g * vp.m * vp.g, -vp.delta_max])
    hi_u = np.array([vp.X2a_max - eps**2 / (4.0 * vp.X2a_max), vp.delta_max])
    lbx[idx["U"]] = np.tile(lo_u / u_scale, N)
    ubx[idx["U"]] = np.tile(hi_u / u_scale, N)
    # time starts at zero
    lbx[idx["X"][5]] = ubx[idx["X"][5]] = 0.0
    if not closed:
        start = np.array([open_start.u, open_start.v, open_start.r, open_start.n,
                          open_start.chi, 0.0]) / x_scale
        lbx[idx["X"][:NX]] = start
        ubx[idx["X"][:NX]] = start

    counts = dict(
        intervals=N, degree=d, variables=len(lbx), constraints=int(g.shape[0]),
        dynamics_residuals=NX * d * N, continuity=NX * N,
        periodic=5 if closed else 0, path_per_node=int(go - len(g_idx["dynamics"])
                                                     - len(g_idx["continuity"])
                                                     - (5 if closed else 0)
                                                     - len(g_idx["sdot_colloc"])) // N,
    )
    problem = {"x": w, "f": f, "g": g}
    nlp = NLP(grid=grid, colloc=colloc, car=car, closed=closed, problem=problem,
              lbx=lbx, ubx=ubx, lbg=np.concatenate(lbg), ubg=np.concatenate(ubg),
              x_scale=x_scale, u_scale=u_scale, idx=idx, g_idx=g_idx, counts=counts,
              weights=weights, limits=limits, kappa_colloc=kappa_col.reshape(N, d))
    nlp._functions["parts"] = ca.Function("parts", [w], [lap_time, steer, slack])
    nlp.set_backoffs()
    return nlp


def check_dimensions(nlp: NLP) -> None:
    expected = NX * nlp.colloc.d * nlp.grid.N
    if len(nlp.g_idx["dynamics"]) != expected:
        raise TranscriptionError("dynamics residual count mismatch")
    if nlp.problem["x"].shape[0] != nlp.n_var or nlp.problem["g"].shape[0] != nlp.n_con:
        raise TranscriptionError("bound vectors do not match the symbolic problem")


__all__ = ["NLP", "Weights", "Limits", "OpenStart", "transcribe", "spatial_rhs", "split_force",
           "FRENET_NAMES", "NX", "NU", "U_MIN", "check_dimensions"]
