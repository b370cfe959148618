"""Gauss-Legendre collocation coefficients on the unit interval."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CollocationGrid:
    """Degree-``d`` Lagrange collocation with Gauss-Legendre interior points.

    ``C[i, j]`` is the derivative of basis ``i`` at point ``j`` (point 0 is
    the interval start), ``D[i]`` the basis value at the interval end and
    ``B[j]`` the quadrature weight of interior point ``j``.
    """

    d: int
    tau: np.ndarray
    C: np.ndarray
    D: np.ndarray
    B: np.ndarray

    @property
    def points(self) -> np.ndarray:
        """Interior abscissae (without the leading 0)."""
        return self.tau[1:]


def gauss_legendre(d: int = 3) -> CollocationGrid:
    if d < 1:
        raise ValueError("degree must be positive")
    roots, _ = np.polynomial.legendre.leggauss(d)
    tau = np.concatenate([[0.0], 0.5 * (roots + 1.0)])
    C = np.zeros((d + 1, d + 1))
    D = np.zeros(d + 1)
    B = np.zeros(d + 1)
    for i in range(d + 1):
        basis = np.poly1d([1.0])
        for j in range(d + 1):
            if j != i:
                basis *= np.poly1d([1.0, -tau[j]]) / (tau[i] - tau[j])
        D[i] = basis(1.0)
        deriv = np.polyder(basis)
        C[i] = deriv(tau)
        B[i] = np.polyint(basis)(1.0)
    return CollocationGrid(d=d, tau=tau, C=C, D=D, B=B)
