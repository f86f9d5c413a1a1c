"""Steady states of the viscous Saint-Venant equations with a boundary layer at x = 0.

The steady profile solves the singular system (y, z) = (V*, V*_x)::

    y' = z
    mu z' = z (y - g Q0 / y^2) / 4 + (3/4) mu ftilde(y) y / Q0 + mu z^2 / y

with y(0) = V0, z(0) = 0, and H* = Q0 / V*.  The layer has width O(mu), so the
system is integrated with a stiff implicit method and the adaptive trajectory is
resampled onto the uniform grid by cubic Hermite interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid, solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .model import Grid, PhysicalParams, friction, friction_tilde

RTOL = 1e-10
ATOL = 1e-12


class SteadyStateError(RuntimeError):
    """The trajectory left the admissible region; ``bound`` names the limit that was hit."""

    def __init__(self, bound: str, x: float, message: str):
        super().__init__(f"viscosity too large for this steady state: {message} (x = {x:.6g} m)")
        self.bound = bound
        self.x = x


@dataclass(frozen=True)
class RegionBounds:
    """Admissible region {g Q0/y^2 - y > eps, y >= c_y, |z| <= C_z} and the Duhamel constant C1."""

    eps: float
    c_y: float
    C_z: float
    C1: float
    y1: float

    def duhamel_bound(self, x: np.ndarray, mu: float) -> np.ndarray:
        r = 4.0 * mu / self.eps
        return self.C1 * r * -np.expm1(-x / r)


def region_bounds(p: PhysicalParams, H0: float, V0: float) -> RegionBounds:
    Q0 = H0 * V0
    eps = (p.g * Q0 / V0**2 - V0) / 4.0
    c_y = V0 / 2.0
    # unique positive root of g Q0 - y^3 - eps y^2
    y1 = brentq(lambda y: p.g * Q0 - y**3 - eps * y**2, 0.0, (p.g * Q0) ** (1 / 3) + 1.0, xtol=1e-14)
    # ftilde(y) y is increasing in y, so its max over [c_y, y1] sits at y1
    src = 0.75 * friction_tilde(y1, Q0, p) * y1 / Q0
    C_z = 10.0 * (src + 1.0 / c_y) * (4.0 * p.mu / eps) + 1.0
    C1 = src + C_z**2 / c_y
    return RegionBounds(eps=eps, c_y=c_y, C_z=C_z, C1=C1, y1=y1)


@dataclass(frozen=True)
class SteadyState:
    grid: Grid
    params: PhysicalParams
    Hs: np.ndarray
    Vs: np.ndarray
    Vsx: np.ndarray
    Vsxx: np.ndarray
    Hsx: np.ndarray
    Hsxx: np.ndarray
    Q0: float
    C0: float
    Gamma: np.ndarray
    region: RegionBounds

    @property
    def H0(self) -> float:
        return float(self.Hs[0])

    @property
    def V0(self) -> float:
        return float(self.Vs[0])

    def to_csv(self, path) -> None:
        data = np.column_stack([self.grid.x, self.Hs, self.Vs, self.Vsx, self.Vsxx, self.Hsx])
        np.savetxt(path, data, fmt="%.17g", delimiter=",", header="x,H,V,Vx,Vxx,Hx", comments="")


def _rhs_factory(p: PhysicalParams, Q0: float):
    g, mu, kappa = p.g, p.mu, p.kappa

    def zprime(y, z):
        src = 0.75 * kappa * y**3 / (3.0 * mu * y + kappa * Q0) / Q0
        return z * (y - g * Q0 / y**2) / (4.0 * mu) + src + z * z / y

    def fun(_, u):
        y, z = u
        return np.array([z, zprime(y, z)])

    def jac(_, u):
        y, z = u
        den = 3.0 * mu * y + kappa * Q0
        dsrc = 0.75 / Q0 * kappa * y**2 * (6.0 * mu * y + 3.0 * kappa * Q0) / den**2
        dzy = z * (1.0 + 2.0 * g * Q0 / y**3) / (4.0 * mu) + dsrc - z * z / y**2
        dzz = (y - g * Q0 / y**2) / (4.0 * mu) + 2.0 * z / y
        return np.array([[0.0, 1.0], [dzy, dzz]])

    return zprime, fun, jac


def solve_steady(p: PhysicalParams, H0: float, V0: float, grid: Grid) -> SteadyState:
    if not (H0 > 0 and V0 > 0):
        raise ValueError("H0 and V0 must be positive")
    if not p.g * H0 - V0**2 > 0:
        raise ValueError(f"supercritical initial data: g H0 - V0^2 = {p.g * H0 - V0**2:.6g} <= 0")
    if not np.isclose(grid.L, p.L, rtol=1e-12):
        raise ValueError(f"grid length {grid.L} does not match channel length {p.L}")

    Q0 = H0 * V0
    region = region_bounds(p, H0, V0)
    zprime, fun, jac = _rhs_factory(p, Q0)

    def ev_critical(_, u):
        return p.g * Q0 / u[0] ** 2 - u[0] - region.eps

    def ev_low(_, u):
        return u[0] - region.c_y

    def ev_slope(_, u):
        return region.C_z - abs(u[1])

    events = [ev_critical, ev_low, ev_slope]
    for ev in events:
        ev.terminal = True
        ev.direction = -1

    sol = solve_ivp(fun, (0.0, p.L), [V0, 0.0], method="Radau", jac=jac, rtol=RTOL, atol=ATOL,
                    events=events, max_step=p.L / 64)
    if sol.status == 1:
        names = ["critical root y_1,eps", "lower bound c_y", "slope bound C_z"]
        for k, name in enumerate(names):
            if sol.t_events[k].size:
                raise SteadyStateError(("critical", "c_y", "C_z")[k], float(sol.t_events[k][0]),
                                       f"trajectory reached the {name}")
    if not sol.success:
        raise SteadyStateError("integrator", float(sol.t[-1]), sol.message)

    t, y, z = sol.t, sol.y[0], sol.y[1]
    zp = zprime(y, z)
    x = grid.x
    V = CubicHermiteSpline(t, y, z)(x)
    Vx = CubicHermiteSpline(t, z, zp)(x)
    V[0], Vx[0] = V0, 0.0
    Vxx = zprime(V, Vx)
    H = Q0 / V
    Hx = -Q0 * Vx / V**2
    Hxx = -Q0 * (Vxx / V**2 - 2.0 * Vx**2 / V**3)
    C0 = V0 * friction(H0, V0, p) / (H0 * (p.g * H0 - V0**2)) / p.mu
    Gamma = p.g * H / V - V
    return SteadyState(grid=grid, params=p, Hs=H, Vs=V, Vsx=Vx, Vsxx=Vxx, Hsx=Hx, Hsxx=Hxx,
                       Q0=Q0, C0=C0, Gamma=Gamma, region=region)


@dataclass(frozen=True)
class AsymptoticResiduals:
    R1: float  # sup |V* - V0|
    R2: float  # sup |V*_x - two-term expansion|
    R3: float  # sup |V*_xx - layer term|


def layer_profile(s: SteadyState) -> np.ndarray:
    """``exp(-(1/4 mu) int_0^x Gamma)`` with trapezoid quadrature."""
    integral = cumulative_trapezoid(s.Gamma, s.grid.x, initial=0.0)
    return np.exp(-integral / (4.0 * s.params.mu))


def verify_asymptotics(s: SteadyState, p: PhysicalParams) -> AsymptoticResiduals:
    H, V = s.Hs, s.Vs
    f = friction(H, V, p)
    sub = p.g * H - V**2
    layer = layer_profile(s)
    outer = V * f / (H * sub)
    R1 = np.max(np.abs(V - s.V0))
    R2 = np.max(np.abs(s.Vsx - (outer - s.C0 * p.mu * layer)))
    R3 = np.max(np.abs(s.Vsxx - s.C0 / (4.0 * V) * sub * layer))
    return AsymptoticResiduals(R1=float(R1), R2=float(R2), R3=float(R3))


def check_subcritical(s: SteadyState) -> float:
    return float(np.min(s.params.g * s.Hs - s.Vs**2))


def check_assumption_nearcritical(s: SteadyState) -> bool:
    return bool(s.params.g * s.Hs[0] < (2.0 + np.sqrt(2.0)) * s.Vs[0] ** 2)
