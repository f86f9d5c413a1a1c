"""IMEX time integration of the linearized system and a discrete spectrum oracle.

One step is an explicit transport/source stage followed by an implicit backward
Euler solve for the diffusion ``v_t = 4 mu v_xx``.  Transport uses characteristic
upwinding: at each point B is split on its own eigenbasis and each field is
advanced with the Beam-Warming stencil (first-order upwind next to the ends).

Boundary closure (n = last index):

* x = 0 with b0 != 0: ``v_x(0) = 0`` is the first row of the implicit system and
  ``h[0] = -v[0] / b0`` follows from the feedback law.  With b0 = 0 the feedback
  degenerates to ``v[0] = 0`` and h[0] is extrapolated along the outgoing
  (left-moving) characteristic.
* x = L: the Robin law ``v = b1 h + mu c1 v_x`` is the last row, with h[n]
  eliminated through second-order extrapolation of the outgoing right-moving
  characteristic variable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .linearization import LinearizedSystem, apply_operator
from .lyapunov import build_weights, evaluate_W
from .model import StateVector, l2_norm

Forcing = Callable[[float], StateVector]

CFL_MAX = 0.9
DENSE_MAX_N = 1000


class SimulationDiverged(RuntimeError):
    def __init__(self, step: int):
        super().__init__(f"simulation diverged at step {step}")
        self.step = step


class ImplicitSolveError(RuntimeError):
    pass


def _eigen_split(B: np.ndarray):
    """Eigenvalues and left/right eigenvectors of each 2x2 block, with l_k . r_k = 1."""
    a, b, c, d = B[..., 0, 0], B[..., 0, 1], B[..., 1, 0], B[..., 1, 1]
    disc = 0.25 * (a - d) ** 2 + b * c
    if np.any(disc <= 0):
        raise ValueError("B is not strictly hyperbolic at some grid point")
    if np.any(b == 0):
        raise ValueError("B[0][1] must be nonzero for the characteristic split")
    root = np.sqrt(disc)
    out = {}
    for sign, key in ((1.0, "+"), (-1.0, "-")):
        lam = 0.5 * (a + d) + sign * root
        r = np.stack([b, lam - a], axis=-1)
        l = np.stack([lam - d, b], axis=-1)
        norm = (l * r).sum(axis=-1)
        out[key] = (lam, l / norm[..., None], r)
    return out


def cfl_limit(sys: LinearizedSystem) -> float:
    """Largest dt allowed by the advective CFL condition."""
    B = sys.B
    rho = np.max(np.abs(np.linalg.eigvals(B)), axis=1)
    return CFL_MAX * sys.grid.dx / float(rho.max())


class IMEXStepper:
    """Precomputed IMEX step for a fixed system and time step."""

    def __init__(self, sys: LinearizedSystem, dt: float):
        if not dt > 0:
            raise ValueError("dt must be positive")
        self.sys, self.dt = sys, dt
        grid, p, bc = sys.grid, sys.params, sys.bc
        if grid.n < 5:
            raise ValueError("the IMEX stencils need at least 5 grid points")
        dx, n = grid.dx, grid.n
        split = _eigen_split(sys.B)
        lam_p, self.lp, self.rp = split["+"]
        lam_m, self.lm, self.rm = split["-"]
        if np.any(lam_p <= 0) or np.any(lam_m >= 0):
            raise ValueError("flow is not subcritical: need lambda- < 0 < lambda+ everywhere")
        self.nu_p = lam_p * dt / dx
        self.nu_m = -lam_m * dt / dx
        self.feedback_at_0 = bc.b0 != 0.0

        # extrapolation ratios l1/l0 of the outgoing characteristic at each end
        self.rho_L = self.lp[-1, 1] / self.lp[-1, 0]
        self.rho_0 = self.lm[0, 1] / self.lm[0, 0]

        s = 4.0 * p.mu * dt / dx**2
        main = np.full(n, 1.0 + 2.0 * s)
        off = np.full(n - 1, -s)
        M = sp.lil_matrix(sp.diags([off, main, off], [-1, 0, 1], format="lil"))
        M[0, :] = 0.0
        if self.feedback_at_0:
            M[0, 0], M[0, 1], M[0, 2] = -3.0, 4.0, -1.0
        else:
            M[0, 0] = 1.0
        k = p.mu * bc.c1 / (2.0 * dx)
        b1, rho = bc.b1, self.rho_L
        M[n - 1, :] = 0.0
        M[n - 1, n - 1] = 1.0 - 3.0 * k + b1 * rho
        M[n - 1, n - 2] = 4.0 * k - 2.0 * b1 * rho
        M[n - 1, n - 3] = -k + b1 * rho
        self.matrix = M.tocsc()
        try:
            self.lu = splu(self.matrix)
        except RuntimeError as exc:
            raise ImplicitSolveError(
                f"implicit diffusion matrix is singular (s = {s:.3g}, Robin diagonal = "
                f"{M[n - 1, n - 1]:.3g}): {exc}") from exc
        self._precompute_transport()

    def _precompute_transport(self):
        n = self.sys.grid.n
        # right-moving field: Beam-Warming weights on 2..n-2 over (i, i-1, i-2), first-order upwind at 1
        nu = self.nu_p
        wts = np.zeros((n, 3))
        wts[2:n - 1] = np.column_stack([-1.5 * nu[2:n - 1] + 0.5 * nu[2:n - 1] ** 2,
                                        2.0 * nu[2:n - 1] - nu[2:n - 1] ** 2,
                                        -0.5 * nu[2:n - 1] + 0.5 * nu[2:n - 1] ** 2])
        wts[1] = [-nu[1], nu[1], 0.0]
        self.wp = wts
        # left-moving field: mirrored stencil over (i, i+1, i+2) on 1..n-3, first order at n-2
        nu = self.nu_m
        wts = np.zeros((n, 3))
        wts[1:n - 2] = np.column_stack([-1.5 * nu[1:n - 2] + 0.5 * nu[1:n - 2] ** 2,
                                        2.0 * nu[1:n - 2] - nu[1:n - 2] ** 2,
                                        -0.5 * nu[1:n - 2] + 0.5 * nu[1:n - 2] ** 2])
        wts[n - 2] = [-nu[n - 2], nu[n - 2], 0.0]
        self.wm = wts

    def _transport(self, h: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Characteristic-upwind increments; zero at the two boundary points."""
        n = h.size
        wp, wm = self.wp, self.wm
        hp = np.zeros(n)
        vp = np.zeros(n)
        hp[1:-1] = wp[1:-1, 0] * h[1:-1] + wp[1:-1, 1] * h[:-2]
        hp[2:-1] += wp[2:-1, 2] * h[:-3]
        vp[1:-1] = wp[1:-1, 0] * v[1:-1] + wp[1:-1, 1] * v[:-2]
        vp[2:-1] += wp[2:-1, 2] * v[:-3]
        hm = np.zeros(n)
        vm = np.zeros(n)
        hm[1:-1] = wm[1:-1, 0] * h[1:-1] + wm[1:-1, 1] * h[2:]
        hm[1:-2] += wm[1:-2, 2] * h[3:]
        vm[1:-1] = wm[1:-1, 0] * v[1:-1] + wm[1:-1, 1] * v[2:]
        vm[1:-2] += wm[1:-2, 2] * v[3:]
        dp = self.lp[:, 0] * hp + self.lp[:, 1] * vp
        dm = self.lm[:, 0] * hm + self.lm[:, 1] * vm
        return self.rp[:, 0] * dp + self.rm[:, 0] * dm, self.rp[:, 1] * dp + self.rm[:, 1] * dm

    def step_arrays(self, h: np.ndarray, v: np.ndarray, t: float = 0.0,
                    forcing: Optional[Forcing] = None) -> tuple[np.ndarray, np.ndarray]:
        dt, C = self.dt, self.sys.C
        dh, dv = self._transport(h, v)
        hs = h + dh - dt * (C[:, 0, 0] * h + C[:, 0, 1] * v)
        vs = v + dv - dt * (C[:, 1, 0] * h + C[:, 1, 1] * v)
        if forcing is not None:
            F = forcing(t)
            hs += dt * F.h
            vs += dt * F.v
        rhs = vs
        rhs[0] = 0.0
        h_ext = 2.0 * hs[-2] - hs[-3]
        rhs[-1] = self.sys.bc.b1 * h_ext
        vn = self.lu.solve(rhs)
        hn = hs
        hn[-1] = h_ext + self.rho_L * (2.0 * vn[-2] - vn[-3] - vn[-1])
        if self.feedback_at_0:
            hn[0] = -vn[0] / self.sys.bc.b0
        else:
            hn[0] = 2.0 * hs[1] - hs[2] + self.rho_0 * (2.0 * vn[1] - vn[2] - vn[0])
        return hn, vn

    def step(self, y: StateVector, t: float = 0.0, forcing: Optional[Forcing] = None) -> StateVector:
        if len(y) != self.sys.grid.n:
            raise ValueError("state does not match the stepper grid")
        return StateVector(*self.step_arrays(y.h, y.v, t, forcing))


def imex_step(sys: LinearizedSystem, y: StateVector, dt: float) -> StateVector:
    return IMEXStepper(sys, dt).step(y)


@dataclass(frozen=True)
class SimulationConfig:
    dt: float
    T: float
    initial: StateVector
    snapshot_stride: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.T >= 0:
            raise ValueError("T must be nonnegative")
        if self.snapshot_stride < 0:
            raise ValueError("snapshot_stride must be nonnegative")

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))


@dataclass
class SimulationTrace:
    times: np.ndarray
    l2: np.ndarray
    W: np.ndarray
    gamma_fit: Optional[float]
    fit_r2: Optional[float]
    snapshots: list = field(default_factory=list)
    final: Optional[StateVector] = None

    def to_csv(self, path) -> None:
        data = np.column_stack([self.times, self.l2, self.W])
        np.savetxt(path, data, fmt="%.17g", delimiter=",", header="t,l2,W", comments="")


def fit_decay(times: np.ndarray, l2: np.ndarray) -> tuple[Optional[float], Optional[float]]:
    """Least-squares slope of ln l2 over the second half; returns (-slope, R^2)."""
    k0 = len(times) // 2
    t, y = times[k0:], l2[k0:]
    if t.size < 2 or np.any(y <= 0):
        return None, None
    logy = np.log(y)
    slope, intercept = np.polyfit(t, logy, 1)
    resid = logy - (slope * t + intercept)
    ss_tot = np.sum((logy - logy.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return float(-slope), float(r2)


def simulate(sys: LinearizedSystem, cfg: SimulationConfig, forcing: Optional[Forcing] = None,
             check_cfl: bool = True) -> SimulationTrace:
    grid = sys.grid
    cfg.initial.check_grid(grid)
    if check_cfl and cfg.dt > cfl_limit(sys):
        raise ValueError(f"dt = {cfg.dt} violates the CFL limit {cfl_limit(sys):.6g}")
    w = build_weights(sys.steady, sys.params)
    steps = cfg.steps
    times = cfg.dt * np.arange(steps + 1)
    l2 = np.empty(steps + 1)
    W = np.empty(steps + 1)
    y = cfg.initial
    l2[0], W[0] = l2_norm(y, grid), evaluate_W(y, w, grid)
    snaps = [(0.0, y)] if cfg.snapshot_stride else []
    stepper = IMEXStepper(sys, cfg.dt) if steps else None
    dx = grid.dx
    wt = np.full(grid.n, dx)
    wt[0] = wt[-1] = 0.5 * dx
    wq1, wq2 = wt * w.q1, wt * w.q2
    h, v = y.h, y.v
    for k in range(1, steps + 1):
        h, v = stepper.step_arrays(h, v, times[k - 1], forcing)
        hh, vv = h * h, v * v
        l2[k] = np.sqrt(wt @ hh + wt @ vv)
        if not np.isfinite(l2[k]) or l2[k] > 1e150:
            raise SimulationDiverged(k)
        W[k] = wq1 @ hh + wq2 @ vv
        if cfg.snapshot_stride and k % cfg.snapshot_stride == 0:
            snaps.append((times[k], StateVector(h.copy(), v.copy())))
    y = StateVector(h, v)
    gamma, r2 = fit_decay(times, l2)
    return SimulationTrace(times=times, l2=l2, W=W, gamma_fit=gamma, fit_r2=r2, snapshots=snaps, final=y)


def lyapunov_monotonicity(trace: SimulationTrace, skip_fraction: float = 0.05, slack: float = 1e-8) -> int:
    """Number of steps after the transient where W grows by more than ``slack``."""
    W = trace.W
    k0 = int(np.ceil(skip_fraction * (len(W) - 1)))
    return int(np.sum(W[k0 + 1:] > W[k0:-1] * (1.0 + slack)))


def weighted_monotonicity(trace: SimulationTrace, gamma: float, skip_fraction: float = 0.05,
                          slack: float = 1e-6) -> int:
    """Violations of ``W(t) e^{gamma t}`` being nonincreasing, per step with relative slack."""
    t, W = trace.times, trace.W
    k0 = int(np.ceil(skip_fraction * (len(W) - 1)))
    # compare W_{k+1} e^{gamma dt} against W_k, avoiding overflow of e^{gamma t}
    growth = np.exp(gamma * np.diff(t))
    return int(np.sum(W[k0 + 1:] * growth[k0:] > W[k0:-1] * (1.0 + slack)))


def boundary_extension(sys: LinearizedSystem) -> np.ndarray:
    """Matrix E mapping interior unknowns (h_1..h_{n-2}, v_1..v_{n-2}) to full (h, v).

    Uses the same closure as the stepper: v_x(0) = 0 and h(0) = -v(0)/b0 at the
    left end, the Robin law and outgoing-characteristic extrapolation at the right end.
    """
    grid, bc, p = sys.grid, sys.bc, sys.params
    n, dx = grid.n, grid.dx
    m = n - 2
    if bc.b0 == 0.0:
        raise ValueError("b0 = 0 leaves h(0) without a feedback relation")
    E = np.zeros((2 * n, 2 * m))
    H = lambda i: i  # row of h_i
    Vr = lambda i: n + i
    for j in range(m):
        E[H(j + 1), j] = 1.0
        E[Vr(j + 1), m + j] = 1.0
    # left end: v0 = (4 v1 - v2)/3, h0 = -v0/b0
    E[Vr(0), m + 0] = 4.0 / 3.0
    E[Vr(0), m + 1] = -1.0 / 3.0
    E[H(0)] = -E[Vr(0)] / bc.b0
    # right end: solve [[l0, l1], [-b1, 1 - 3k]] (h_N, v_N) = rhs
    split = _eigen_split(sys.B[-1:])
    l0, l1 = split["+"][1][0]
    k = p.mu * bc.c1 / (2.0 * dx)
    M = np.array([[l0, l1], [-bc.b1, 1.0 - 3.0 * k]])
    rhs = np.zeros((2, 2 * m))
    # l0 h_N + l1 v_N = l0 (2 h_{N-1} - h_{N-2}) + l1 (2 v_{N-1} - v_{N-2})
    rhs[0] = l0 * (2.0 * E[H(n - 2)] - E[H(n - 3)]) + l1 * (2.0 * E[Vr(n - 2)] - E[Vr(n - 3)])
    # v_N - k (3 v_N - 4 v_{N-1} + v_{N-2}) - b1 h_N = 0
    rhs[1] = k * (-4.0 * E[Vr(n - 2)] + E[Vr(n - 3)])
    try:
        sol = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise ValueError("right boundary relations are degenerate") from exc
    E[H(n - 1)], E[Vr(n - 1)] = sol[0], sol[1]
    return E


def assemble_discrete_operator(sys: LinearizedSystem) -> np.ndarray:
    """Dense matrix of y -> -(A y_xx + B y_x + C y) on interior unknowns with the BCs eliminated."""
    n = sys.grid.n
    if n > DENSE_MAX_N:
        raise ValueError(f"dense operator limited to n <= {DENSE_MAX_N}, got {n}")
    if n < 5:
        raise ValueError("need at least 5 grid points")
    E = boundary_extension(sys)
    m = n - 2
    full = np.empty((2 * n, E.shape[1]))
    for j in range(E.shape[1]):
        col = E[:, j]
        yt = apply_operator(sys, StateVector(col[:n], col[n:]))
        full[:n, j], full[n:, j] = yt.h, yt.v
    keep = np.r_[1:n - 1, n + 1:2 * n - 1]
    out = full[keep]
    assert out.shape == (2 * m, 2 * m)
    return out


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    max_real: float
    n_used: int

    def to_csv(self, path) -> None:
        ev = self.eigenvalues
        np.savetxt(path, np.column_stack([ev.real, ev.imag]), fmt="%.17g", delimiter=",",
                   header="re,im", comments="")


def spectrum(sys: LinearizedSystem) -> SpectrumReport:
    M = assemble_discrete_operator(sys)
    try:
        ev = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"eigenvalue iteration did not converge: {exc}") from exc
    ev = ev[np.lexsort((ev.imag, -ev.real))]
    return SpectrumReport(eigenvalues=ev, max_real=float(ev.real.max()), n_used=sys.grid.n)
