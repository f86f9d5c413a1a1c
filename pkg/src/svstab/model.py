"""Physical parameters, grids, perturbation states and the friction law."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ContractError(ValueError):
    """Raised when array shapes or grids do not match."""


@dataclass(frozen=True)
class PhysicalParams:
    """Gravity ``g`` (m/s^2), viscosity ``mu`` (m^2/s), friction ``kappa`` (m/s), length ``L`` (m)."""

    g: float = 9.81
    mu: float = 1e-3
    kappa: float = 2e-3
    L: float = 1000.0

    def __post_init__(self):
        if not self.g > 0:
            raise ValueError(f"g must be positive, got {self.g}")
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not self.kappa >= 0:
            raise ValueError(f"kappa must be nonnegative, got {self.kappa}")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")

    def with_mu(self, mu: float) -> "PhysicalParams":
        return PhysicalParams(g=self.g, mu=mu, kappa=self.kappa, L=self.L)


@dataclass(frozen=True)
class Grid:
    n: int
    L: float

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"grid needs at least 3 points, got n={self.n}")
        if not self.L > 0:
            raise ValueError("grid length must be positive")

    @classmethod
    def from_spacing(cls, L: float, dx: float) -> "Grid":
        n = int(round(L / dx)) + 1
        return cls(n=n, L=L)

    @property
    def dx(self) -> float:
        return self.L / (self.n - 1)

    @property
    def x(self) -> np.ndarray:
        x = np.arange(self.n) * self.dx
        x[-1] = self.L
        return x


@dataclass(frozen=True)
class StateVector:
    """Depth and velocity perturbations ``(h, v)`` sampled on a grid."""

    h: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if h.ndim != 1 or h.shape != v.shape:
            raise ContractError(f"h and v must be 1-D with equal length, got {h.shape} and {v.shape}")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "v", v)

    @classmethod
    def zeros(cls, n: int) -> "StateVector":
        return cls(np.zeros(n), np.zeros(n))

    @classmethod
    def from_functions(cls, grid: Grid, h, v) -> "StateVector":
        x = grid.x
        return cls(np.broadcast_to(h(x), x.shape).copy(), np.broadcast_to(v(x), x.shape).copy())

    def __len__(self) -> int:
        return self.h.size

    def __add__(self, other: "StateVector") -> "StateVector":
        return StateVector(self.h + other.h, self.v + other.v)

    def __mul__(self, a: float) -> "StateVector":
        return StateVector(a * self.h, a * self.v)

    __rmul__ = __mul__

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.h, self.v])

    def check_grid(self, grid: Grid) -> None:
        if len(self) != grid.n:
            raise ContractError(f"state has {len(self)} points but grid has {grid.n}")


@dataclass(frozen=True)
class BoundaryCoeffs:
    """Linear feedback gains: ``v(0) = -b0 h(0)``, ``v(L) = b1 h(L) + mu c1 v_x(L)``."""

    b0: float
    b1: float
    c1: float

    def __post_init__(self):
        for name in ("b0", "b1", "c1"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


def friction(H, V, p: PhysicalParams):
    """Laminar friction ``kappa V / (1 + kappa H / (3 mu))``."""
    H = np.asarray(H, dtype=float)
    if np.any(H <= 0):
        raise ValueError("friction needs positive depth")
    out = p.kappa * np.asarray(V, dtype=float) / (1.0 + p.kappa * H / (3.0 * p.mu))
    return out if out.ndim else float(out)


def friction_tilde(V, Q0: float, p: PhysicalParams):
    """Friction in flux form, ``V^2 kappa / (3 mu V + kappa Q0)``; equals ``f(Q0/V, V) / (3 mu)``."""
    V = np.asarray(V, dtype=float)
    if np.any(V <= 0) or Q0 <= 0:
        raise ValueError("friction_tilde needs positive speed and flux")
    out = V**2 * p.kappa / (3.0 * p.mu * V + p.kappa * Q0)
    return out if out.ndim else float(out)


def trapezoid(f: np.ndarray, dx: float) -> float:
    return float(dx * (np.sum(f) - 0.5 * (f[0] + f[-1])))


def l2_norm(y: StateVector, grid: Grid) -> float:
    y.check_grid(grid)
    return float(np.sqrt(trapezoid(y.h**2 + y.v**2, grid.dx)))
