"""Linearization of the viscous Saint-Venant equations around a steady state.

The perturbation y = (h, v) obeys ``y_t = -(A y_xx + B(x) y_x + C(x) y)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import BoundaryCoeffs, ContractError, PhysicalParams, StateVector, friction
from .steady import SteadyState


@dataclass(frozen=True)
class LinearizedSystem:
    A: np.ndarray  # (2, 2)
    B: np.ndarray  # (n, 2, 2)
    C: np.ndarray  # (n, 2, 2)
    bc: BoundaryCoeffs
    steady: SteadyState
    params: PhysicalParams

    @property
    def grid(self):
        return self.steady.grid

    def with_bc(self, bc: BoundaryCoeffs) -> "LinearizedSystem":
        return LinearizedSystem(self.A, self.B, self.C, bc, self.steady, self.params)

    def characteristic_speeds(self) -> tuple[np.ndarray, np.ndarray]:
        """Pointwise eigenvalues (lambda_minus, lambda_plus) of B."""
        tr = self.B[:, 0, 0] + self.B[:, 1, 1]
        det = self.B[:, 0, 0] * self.B[:, 1, 1] - self.B[:, 0, 1] * self.B[:, 1, 0]
        disc = tr**2 / 4.0 - det
        if np.any(disc <= 0):
            raise ValueError("B has complex or repeated eigenvalues; flow is not hyperbolic here")
        r = np.sqrt(disc)
        return tr / 2.0 - r, tr / 2.0 + r

    def to_dict(self) -> dict:
        return {"A": self.A.tolist(), "B": self.B.tolist(), "C": self.C.tolist()}


def build_linear_system(s: SteadyState, p: PhysicalParams, bc: BoundaryCoeffs) -> LinearizedSystem:
    if not p.mu > 0:
        raise ValueError("the linearized source matrix is singular at mu = 0")
    mu, g = p.mu, p.g
    H, V, Hx, Vx = s.Hs, s.Vs, s.Hsx, s.Vsx
    f = friction(H, V, p)
    n = H.size
    A = np.array([[0.0, 0.0], [0.0, -4.0 * mu]])
    B = np.empty((n, 2, 2))
    B[:, 0, 0] = V
    B[:, 0, 1] = H
    B[:, 1, 0] = g - 4.0 * mu * Vx / H
    B[:, 1, 1] = V - 4.0 * mu * Hx / H
    C = np.empty((n, 2, 2))
    C[:, 0, 0] = Vx
    C[:, 0, 1] = Hx
    C[:, 1, 0] = (4.0 * mu * Hx * Vx - f) / H**2 - f**2 / (3.0 * mu * H * V)
    C[:, 1, 1] = Vx + f / (H * V)
    return LinearizedSystem(A=A, B=B, C=C, bc=bc, steady=s, params=p)


def d1(u: np.ndarray, dx: float) -> np.ndarray:
    """Second-order first derivative: centered inside, three-point one-sided at the ends."""
    out = np.empty_like(u)
    out[1:-1] = (u[2:] - u[:-2]) / (2.0 * dx)
    out[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * dx)
    out[-1] = (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * dx)
    return out


def d2(u: np.ndarray, dx: float) -> np.ndarray:
    """Second derivative; the end rows use the four-point second-order one-sided stencil."""
    if u.size < 4:
        raise ContractError("second derivative needs at least 4 points")
    out = np.empty_like(u)
    out[1:-1] = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / dx**2
    out[0] = (2.0 * u[0] - 5.0 * u[1] + 4.0 * u[2] - u[3]) / dx**2
    out[-1] = (2.0 * u[-1] - 5.0 * u[-2] + 4.0 * u[-3] - u[-4]) / dx**2
    return out


def apply_operator(sys: LinearizedSystem, y: StateVector) -> StateVector:
    """Time derivative ``-(A y_xx + B y_x + C y)`` of the linearized system."""
    y.check_grid(sys.grid)
    dx = sys.grid.dx
    h, v = y.h, y.v
    hx, vx = d1(h, dx), d1(v, dx)
    vxx = d2(v, dx)
    B, C = sys.B, sys.C
    ht = -(B[:, 0, 0] * hx + B[:, 0, 1] * vx + C[:, 0, 0] * h + C[:, 0, 1] * v)
    vt = -(sys.A[1, 1] * vxx + B[:, 1, 0] * hx + B[:, 1, 1] * vx + C[:, 1, 0] * h + C[:, 1, 1] * v)
    return StateVector(ht, vt)
