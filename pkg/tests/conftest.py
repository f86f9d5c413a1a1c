import numpy as np
import pytest

from svstab.lyapunov import auto_boundary_coeffs, build_weights, demo_gains
from svstab.linearization import build_linear_system
from svstab.model import Grid, PhysicalParams
from svstab.steady import solve_steady

G = 9.81


class Case:
    """A solved steady state plus its linearization and weights."""

    def __init__(self, p, H0, V0, n, bc_policy="auto"):
        self.p = p
        self.grid = Grid(n, p.L)
        self.s = solve_steady(p, H0, V0, self.grid)
        self.bc = (auto_boundary_coeffs if bc_policy == "auto" else demo_gains)(self.s, p)
        self.sys = build_linear_system(self.s, p, self.bc)
        self.w = build_weights(self.s, p)


@pytest.fixture(scope="session")
def long_channel():
    """1 km channel, H0 = 4 m, V0 = 1 m/s, dx = 0.5 m."""
    return Case(PhysicalParams(g=G, mu=1e-3, kappa=2e-3, L=1000.0), 4.0, 1.0, 2001, "demo")


@pytest.fixture(scope="session")
def nearcritical():
    """Configuration satisfying gH0 < (2 + sqrt 2) V0^2, certified with the auto gains."""
    return Case(PhysicalParams(g=G, mu=1e-4, kappa=2e-3, L=10.0), 0.2, 1.0, 2001)


@pytest.fixture(scope="session")
def smooth_case():
    """Thick boundary layer (mu = 1e-2 on a 1 m channel), resolved by modest grids."""
    return Case(PhysicalParams(g=G, mu=1e-2, kappa=2e-3, L=1.0), 0.2, 1.0, 201)


def smooth_case_at(n, mu=1e-2, L=1.0, kappa=2e-3):
    return Case(PhysicalParams(g=G, mu=mu, kappa=kappa, L=L), 0.2, 1.0, n)


@pytest.fixture(scope="session")
def frictionless():
    return Case(PhysicalParams(g=G, mu=1e-3, kappa=0.0, L=10.0), 0.2, 1.0, 201)


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)
