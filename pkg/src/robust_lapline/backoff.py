"""Deterministic constraint tightenings from propagated covariance.

A linearized chance constraint ``P{h(x) <= 0} >= p`` is replaced by
``h(mean) + beta <= 0`` with ``beta = m * sqrt(g^T P g)``, ``g`` the state
gradient of ``h`` and ``m`` either the normal quantile of ``p`` or an
explicit sigma multiplier.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError, InfeasibleCorridor
from .vehicle import Car, saturation_gradient

VARIANTS = ("NOM", "TLC", "FLC")
FAMILIES = ("TLC", "FLC")

# Acklam's rational approximation of the inverse normal CDF
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def normal_quantile(p: float) -> float:
    """Inverse standard-normal CDF (rational start plus one Newton step)."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"probability must lie in (0, 1), got {p}")
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
            ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    elif p <= 1.0 - _P_LOW:
        q = p - 0.5
        r = q * q
        x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
            (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)
    else:
        q = math.sqrt(-2.0 * math.log1p(-p))
        x = -(((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
            ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    # Newton refinement; residual taken on the smaller tail to keep precision
    pdf = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    if p > 0.5:
        resid = (1.0 - p) - 0.5 * math.erfc(x / math.sqrt(2.0))
        return x - resid / pdf
    return x - (normal_cdf(x) - p) / pdf


@dataclass(frozen=True)
class BackoffConfig:
    """Which family is tightened, and by how many standard deviations."""

    variant: str = "NOM"
    p: dict = field(default_factory=lambda: {"TLC": 0.99, "FLC": 0.99})
    gamma: float | None = 3.0

    def __post_init__(self):
        variant = self.variant.upper()
        if variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        object.__setattr__(self, "variant", variant)
        p = self.p if isinstance(self.p, dict) else {f: float(self.p) for f in FAMILIES}
        for fam, val in p.items():
            if not 0.5 < val < 1.0:
                raise ConfigError(f"satisfaction probability for {fam} must lie in (0.5, 1)")
        object.__setattr__(self, "p", dict(p))
        if self.gamma is not None and not self.gamma > 0:
            raise ConfigError("gamma must be positive")

    def multiplier(self, family: str) -> float:
        if self.gamma is not None:
            return float(self.gamma)
        return normal_quantile(self.p[family])

    def active(self, family: str) -> bool:
        return self.variant == family


@dataclass(frozen=True)
class BackoffValue:
    node: int
    constraint: str
    sigma: float
    beta: float


def lateral_offset_gradient(theta):
    """State gradient of the Frenet lateral offset of the CoM.

    Differentiating the projection condition shows the offset depends on
    ``(x_G, y_G)`` only through the unit normal at the foot point; curvature
    terms cancel because the tangential residual vanishes there. Heading does
    not enter.
    """
    theta = np.asarray(theta, dtype=float)
    g = np.zeros(theta.shape + (6,))
    g[..., 3] = -np.sin(theta)
    g[..., 4] = np.cos(theta)
    return g


def _sigma(grad, P):
    var = np.einsum("...i,...ij,...j->...", grad, P, grad)
    return np.sqrt(np.maximum(var, 0.0))


def track_backoff(P_kH, theta, config: BackoffConfig, node: int = 0, corridor=None) -> BackoffValue:
    """Tightening of the lateral corridor at a node with centerline heading ``theta``."""
    sigma = float(_sigma(lateral_offset_gradient(theta), np.asarray(P_kH, dtype=float)))
    beta = config.multiplier("TLC") * sigma
    if corridor is not None:
        e_min, e_max = corridor
        if e_max - beta < e_min + beta:
            raise InfeasibleCorridor(f"node {node}: back-off {beta:.3f} m closes the corridor")
    return BackoffValue(node, "TLC", sigma, beta)


def friction_backoff(state, inp, P_kH, car: Car, axle: int, config: BackoffConfig,
                     node: int = 0) -> BackoffValue:
    grad = saturation_gradient(state, inp, car, axle)
    sigma = float(_sigma(grad, np.asarray(P_kH, dtype=float)))
    return BackoffValue(node, f"FLC{axle}", sigma, config.multiplier("FLC") * sigma)


def track_backoffs(P_H, theta, multiplier: float):
    """Vectorized corridor back-offs; returns ``(sigma, beta)`` arrays."""
    sigma = _sigma(lateral_offset_gradient(theta), P_H)
    return sigma, multiplier * sigma


def friction_backoffs(states, inputs, P_H, car: Car, multiplier: float):
    """Vectorized friction back-offs for both axles; arrays of shape (n, 2)."""
    sig = np.stack([_sigma(saturation_gradient(states, inputs, car, j), P_H) for j in (1, 2)],
                   axis=-1)
    return sig, multiplier * sig


def write_backoff_table(path, s, table: dict) -> None:
    """CSV ``k,s,constraint,sigma,beta``; ``table`` maps constraint id to (sigma, beta)."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "s", "constraint", "sigma", "beta"])
        for name, (sig, beta) in table.items():
            for k, (sk, a, b) in enumerate(zip(s, sig, beta)):
                w.writerow([k, f"{sk:.6f}", name, f"{a:.10e}", f"{b:.10e}"])

