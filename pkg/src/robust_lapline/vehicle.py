"""Nonlinear single-track vehicle with simplified pure-side-slip Magic Formula.

State ``x = (u, v, r, x_G, y_G, psi)`` and input ``(X2a, X2b, delta)`` are
plain arrays whose last axis holds the components, so every function here
accepts batches. The force-level helpers are written against a small math
backend and are reused symbolically (CasADi) by the planner.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .errors import DomainError, WheelLiftError

try:  # CasADi is only needed for symbolic use
    import casadi as ca
except ImportError:  # pragma: no cover
    ca = None

GRAVITY = 9.81
STATE_NAMES = ("u", "v", "r", "x_G", "y_G", "psi")
INPUT_NAMES = ("X2a", "X2b", "delta")
U_MIN = 0.5


@dataclass(frozen=True)
class AxleTireParams:
    F_z0: float
    p_Cy1: float
    p_Dy1: float
    p_Dy2: float
    p_Ey1: float
    p_Ey2: float
    p_Ky1: float
    p_Ky2: float

    NAMES = ("F_z0", "p_Cy1", "p_Dy1", "p_Dy2", "p_Ey1", "p_Ey2", "p_Ky1", "p_Ky2")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in self.NAMES], dtype=float)

    @classmethod
    def from_array(cls, values) -> "AxleTireParams":
        return cls(*(float(v) for v in values))

    def validate(self) -> list[str]:
        problems = []
        if not self.F_z0 > 0:
            problems.append("F_z0 must be positive")
        if not self.p_Dy1 > 0:
            problems.append("p_Dy1 must be positive")
        if not self.p_Cy1 > 1:
            problems.append("p_Cy1 must exceed 1 for the force curve to peak")
        return problems


# calibrated values and optimizer starting point from the identification tables
TIRE_START = AxleTireParams(6500.0, 1.45, 1.09, -0.20, 0.81, 0.34, 26.94, 3.20)
TIRE_FRONT = AxleTireParams(11050.0, 2.47, 1.85, -0.34, 0.57, 0.59, 28.29, 3.04)
TIRE_REAR = AxleTireParams(9210.0, 1.92, 1.03, -0.34, 0.57, 0.59, 28.29, 3.04)


@dataclass(frozen=True)
class VehicleParams:
    m: float = 1875.0
    I_z: float = 3341.0
    L: float = 2.97
    wd_front: float = 0.53
    h_g: float = 0.5
    brake_balance_front: float = 0.6
    mu_x: tuple = (1.4, 1.4)
    delta_max: float = 0.35
    X2a_max: float = 9000.0
    P_max: float = 350e3
    g: float = GRAVITY

    def __post_init__(self):
        if not 0.0 < self.wd_front < 1.0:
            raise DomainError("wd_front must lie in (0, 1)")
        if not 0.0 < self.brake_balance_front < 1.0:
            raise DomainError("brake_balance_front must lie in (0, 1)")
        object.__setattr__(self, "mu_x", tuple(float(v) for v in self.mu_x))

    @property
    def a1(self) -> float:
        """CoG to front axle."""
        return self.L * (1.0 - self.wd_front)

    @property
    def a2(self) -> float:
        return self.L * self.wd_front

    def with_(self, **changes) -> "VehicleParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mu_x"] = list(self.mu_x)
        return d


@dataclass(frozen=True)
class Car:
    """Chassis plus the two axle tire parameter sets."""

    vp: VehicleParams = VehicleParams()
    front: AxleTireParams = TIRE_FRONT
    rear: AxleTireParams = TIRE_REAR

    def tire(self, axle: int) -> AxleTireParams:
        return self.front if axle == 1 else self.rear


class _Numpy:
    sin = staticmethod(np.sin)
    cos = staticmethod(np.cos)
    atan = staticmethod(np.arctan)
    sqrt = staticmethod(np.sqrt)


class _Casadi:
    @staticmethod
    def sin(x):
        return ca.sin(x)

    @staticmethod
    def cos(x):
        return ca.cos(x)

    @staticmethod
    def atan(x):
        return ca.atan(x)

    @staticmethod
    def sqrt(x):
        return ca.sqrt(x)


def _backend(*args):
    if ca is not None:
        for a in args:
            if isinstance(a, (ca.SX, ca.MX)):
                return _Casadi
    return _Numpy


# --------------------------------------------------------------------------
# tire


def mf_coefficients(F_z, p: AxleTireParams, lib=None):
    """Magic Formula (D, C, B, E) at vertical load ``F_z``."""
    lib = lib or _backend(F_z)
    dfz = (F_z - p.F_z0) / p.F_z0
    D = (p.p_Dy1 + p.p_Dy2 * dfz) * F_z
    C = p.p_Cy1
    B = p.p_Ky1 * p.F_z0 * lib.sin(2.0 * lib.atan(F_z / (p.p_Ky2 * p.F_z0))) / (C * D)
    E = p.p_Ey1 + p.p_Ey2 * dfz
    return D, C, B, E


def _mf(alpha, F_z, p, lib):
    D, C, B, E = mf_coefficients(F_z, p, lib)
    x = B * alpha
    ax = lib.atan(x)
    phi = C * ax - E * (x - ax)
    return D * lib.sin(phi)


def axle_lateral_force(alpha_slip, F_z, p: AxleTireParams):
    """Axle lateral force [N] from slip angle [rad] and vertical load [N]."""
    lib = _backend(alpha_slip, F_z)
    if lib is _Numpy and np.any(np.asarray(F_z) <= 0):
        raise DomainError("vertical load must be positive")
    return _mf(alpha_slip, F_z, p, lib)


def axle_lateral_force_dalpha(alpha_slip, F_z, p: AxleTireParams):
    """Partial derivative of the axle force with respect to slip angle."""
    D, C, B, E = mf_coefficients(F_z, p, _Numpy)
    x = B * alpha_slip
    ax = np.arctan(x)
    phi = C * ax - E * (x - ax)
    return D * np.cos(phi) * B * (C - E * x * x) / (1.0 + x * x)


def axle_lateral_force_dparams(alpha_slip, F_z, p: AxleTireParams) -> np.ndarray:
    """Jacobian of the axle force w.r.t. the 8 parameters, shape ``(n, 8)``.

    Columns follow ``AxleTireParams.NAMES``.
    """
    a = np.asarray(alpha_slip, dtype=float)
    fz = np.asarray(F_z, dtype=float)
    D, C, B, E = mf_coefficients(fz, p, _Numpy)
    x = B * a
    ax = np.arctan(x)
    phi = C * ax - E * (x - ax)
    cphi = np.cos(phi)
    dF_dD = np.sin(phi)
    dF_dC = D * cphi * ax
    dF_dB = D * cphi * (C - E * x * x) / (1.0 + x * x) * a
    dF_dE = -D * cphi * (x - ax)

    dfz = (fz - p.F_z0) / p.F_z0
    q = fz / (p.p_Ky2 * p.F_z0)
    K = p.p_Ky1 * p.F_z0 * np.sin(2.0 * np.arctan(q))
    dK_dq = p.p_Ky1 * p.F_z0 * np.cos(2.0 * np.arctan(q)) * 2.0 / (1.0 + q * q)

    # B = K / (C D): chain every parameter through D, C, K and E
    def through(dD=0.0, dC=0.0, dK=0.0, dE=0.0):
        dB = dK / (C * D) - B / D * dD - B / C * dC
        return dF_dD * dD + dF_dC * dC + dF_dB * dB + dF_dE * dE

    ddfz_dFz0 = -fz / p.F_z0**2
    cols = [
        through(dD=p.p_Dy2 * ddfz_dFz0 * fz,
                dK=K / p.F_z0 + dK_dq * (-q / p.F_z0),
                dE=p.p_Ey2 * ddfz_dFz0),
        through(dC=1.0),
        through(dD=fz),
        through(dD=dfz * fz),
        through(dE=1.0),
        through(dE=dfz),
        through(dK=K / p.p_Ky1),
        through(dK=dK_dq * (-q / p.p_Ky2)),
    ]
    return np.stack([np.broadcast_to(c, np.broadcast(a, fz).shape) for c in cols], axis=-1)


# --------------------------------------------------------------------------
# chassis


def longitudinal_forces(X2a, X2b, vp: VehicleParams):
    """Front (brake share) and rear (drive plus brake share) axle forces."""
    X1 = vp.brake_balance_front * X2b
    X2 = X2a + (1.0 - vp.brake_balance_front) * X2b
    return X1, X2


def loads_from_inputs(X2a, X2b, vp: VehicleParams):
    """Quasi-static axle loads with longitudinal transfer from tire forces."""
    a_x = (X2a + X2b) / vp.m
    transfer = vp.h_g / vp.L * vp.m * a_x
    Z1 = vp.m * vp.g * vp.wd_front - transfer
    Z2 = vp.m * vp.g * (1.0 - vp.wd_front) + transfer
    return Z1, Z2


def vertical_loads(state, inp, vp: VehicleParams):
    """Axle vertical loads ``(Z1, Z2)``; independent of the state by construction."""
    inp = np.asarray(inp, dtype=float)
    Z1, Z2 = loads_from_inputs(inp[..., 0], inp[..., 1], vp)
    if np.any(Z1 <= 0) or np.any(Z2 <= 0):
        raise WheelLiftError("non-positive axle load")
    return Z1, Z2


def slip_angles(u, v, r, delta, vp: VehicleParams, lib=None):
    lib = lib or _backend(u, v, r, delta)
    alpha1 = delta - lib.atan((v + vp.a1 * r) / u)
    alpha2 = -lib.atan((v - vp.a2 * r) / u)
    return alpha1, alpha2


def axle_forces(u, v, r, X2a, X2b, delta, car: Car, lib=None):
    """All axle-level quantities as a dict (works numerically and symbolically)."""
    lib = lib or _backend(u, v, r, X2a, X2b, delta)
    vp = car.vp
    X1, X2 = longitudinal_forces(X2a, X2b, vp)
    Z1, Z2 = loads_from_inputs(X2a, X2b, vp)
    alpha1, alpha2 = slip_angles(u, v, r, delta, vp, lib)
    Y1 = _mf(alpha1, Z1, car.front, lib)
    Y2 = _mf(alpha2, Z2, car.rear, lib)
    S1 = ((X1 / vp.mu_x[0]) ** 2 + (Y1 / car.front.p_Dy1) ** 2) / Z1**2
    S2 = ((X2 / vp.mu_x[1]) ** 2 + (Y2 / car.rear.p_Dy1) ** 2) / Z2**2
    return dict(X1=X1, X2=X2, Y1=Y1, Y2=Y2, Z1=Z1, Z2=Z2,
                alpha1=alpha1, alpha2=alpha2, S1=S1, S2=S2)


def body_accelerations(u, v, r, X2a, X2b, delta, car: Car, lib=None):
    """``(du/dt, dv/dt, dr/dt)`` of the single-track model.

    Front forces act in the wheel frame and are rotated by the steering angle.
    """
    lib = lib or _backend(u, v, r, X2a, X2b, delta)
    vp = car.vp
    f = axle_forces(u, v, r, X2a, X2b, delta, car, lib)
    sd, cd = lib.sin(delta), lib.cos(delta)
    Fx = f["X1"] * cd - f["Y1"] * sd + f["X2"]
    Fy = f["X1"] * sd + f["Y1"] * cd + f["Y2"]
    Mz = vp.a1 * (f["X1"] * sd + f["Y1"] * cd) - vp.a2 * f["Y2"]
    return Fx / vp.m + v * r, Fy / vp.m - u * r, Mz / vp.I_z


def _split(state, inp):
    state = np.asarray(state, dtype=float)
    inp = np.asarray(inp, dtype=float)
    if np.any(state[..., 0] <= U_MIN):
        raise DomainError(f"longitudinal speed must exceed {U_MIN} m/s")
    return state, inp


def dynamics(state, inp, car: Car) -> np.ndarray:
    """Time derivative of the Cartesian state."""
    state, inp = _split(state, inp)
    u, v, r, psi = state[..., 0], state[..., 1], state[..., 2], state[..., 5]
    du, dv, dr = body_accelerations(u, v, r, inp[..., 0], inp[..., 1], inp[..., 2], car)
    cp, sp = np.cos(psi), np.sin(psi)
    return np.stack([du, dv, dr, u * cp - v * sp, u * sp + v * cp, r], axis=-1)


def _slip_partials(u, v, r, vp):
    """d(alpha1)/d(u,v,r) and d(alpha2)/d(u,v,r)."""
    w1 = v + vp.a1 * r
    w2 = v - vp.a2 * r
    q1 = u * u + w1 * w1
    q2 = u * u + w2 * w2
    d1 = np.stack([w1 / q1, -u / q1, -vp.a1 * u / q1], axis=-1)
    d2 = np.stack([w2 / q2, -u / q2, vp.a2 * u / q2], axis=-1)
    return d1, d2


def jacobian_A(state, inp, car: Car) -> np.ndarray:
    """Closed-form ``d f / d x``; shape ``(..., 6, 6)``."""
    state, inp = _split(state, inp)
    vp = car.vp
    u, v, r, psi = state[..., 0], state[..., 1], state[..., 2], state[..., 5]
    X2a, X2b, delta = inp[..., 0], inp[..., 1], inp[..., 2]
    f = axle_forces(u, v, r, X2a, X2b, delta, car, _Numpy)
    dY1 = axle_lateral_force_dalpha(f["alpha1"], f["Z1"], car.front)[..., None]
    dY2 = axle_lateral_force_dalpha(f["alpha2"], f["Z2"], car.rear)[..., None]
    d1, d2 = _slip_partials(u, v, r, vp)
    sd, cd = np.sin(delta)[..., None], np.cos(delta)[..., None]
    g1 = dY1 * d1  # dY1/d(u,v,r)
    g2 = dY2 * d2

    A = np.zeros(state.shape[:-1] + (6, 6))
    zero, one = np.zeros_like(u), np.ones_like(u)
    A[..., 0, :3] = -sd * g1 / vp.m + np.stack([zero, r, v], axis=-1)
    A[..., 1, :3] = (cd * g1 + g2) / vp.m + np.stack([-r, zero, -u], axis=-1)
    A[..., 2, :3] = (vp.a1 * cd * g1 - vp.a2 * g2) / vp.I_z
    cp, sp = np.cos(psi), np.sin(psi)
    A[..., 3, 0], A[..., 3, 1], A[..., 3, 5] = cp, -sp, -u * sp - v * cp
    A[..., 4, 0], A[..., 4, 1], A[..., 4, 5] = sp, cp, u * cp - v * sp
    A[..., 5, 2] = one
    return A


def axle_saturation(state, inp, car: Car, axle: int):
    """Saturation ratio of axle 1 (front) or 2 (rear)."""
    state, inp = _split(state, inp)
    f = axle_forces(state[..., 0], state[..., 1], state[..., 2],
                    inp[..., 0], inp[..., 1], inp[..., 2], car, _Numpy)
    if np.any(f[f"Z{axle}"] <= 0):
        raise WheelLiftError(f"axle {axle} unloaded")
    return f[f"S{axle}"]


def saturation_gradient(state, inp, car: Car, axle: int) -> np.ndarray:
    """Exact ``d S_j / d x`` (only the velocity block is non-zero)."""
    state, inp = _split(state, inp)
    vp = car.vp
    u, v, r = state[..., 0], state[..., 1], state[..., 2]
    f = axle_forces(u, v, r, inp[..., 0], inp[..., 1], inp[..., 2], car, _Numpy)
    Z = f[f"Z{axle}"]
    if np.any(Z <= 0):
        raise WheelLiftError(f"axle {axle} unloaded")
    tire = car.tire(axle)
    Y = f[f"Y{axle}"]
    dY = axle_lateral_force_dalpha(f[f"alpha{axle}"], Z, tire)
    d1, d2 = _slip_partials(u, v, r, vp)
    dalpha = d1 if axle == 1 else d2
    coeff = (2.0 * Y / (tire.p_Dy1**2 * Z**2) * dY)[..., None]
    grad = np.zeros(state.shape)
    grad[..., :3] = coeff * dalpha
    return grad


def tire_params_dict(p: AxleTireParams) -> dict:
    return {f.name: getattr(p, f.name) for f in fields(p)}
