"""Diagonal quadratic Lyapunov certificate for the linearized viscous system.

The functional is ``W(y) = int_0^L (q1 h^2 + q2 v^2) dx`` with::

    q1 = g + mu * qt1,   qt1 = g - 4 (1 + mu) V*_x / H*
    q2 = H* + mu * qt2,  qt2 = H*

which makes Q B symmetric.  Along solutions ``dW/dt + gamma W = I + Bterm`` where
the interior term is governed by ``phi(gamma) = gamma Q - (QC + (QC)^T) - Q_xx A + (QB)_x``
and the boundary term reduces to a quadratic form in h(0), h(L), v_x(L).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .linearization import LinearizedSystem, apply_operator, d1
from .model import BoundaryCoeffs, Grid, PhysicalParams, StateVector, trapezoid
from .steady import SteadyState, check_assumption_nearcritical, check_subcritical

GAMMA_HI = 1.0
BISECTION_STEPS = 50
NEGDEF_RTOL = 1e-14


@dataclass(frozen=True)
class LyapunovWeights:
    grid: Grid
    mu: float
    q1: np.ndarray
    q2: np.ndarray
    qt1: np.ndarray
    qt2: np.ndarray
    qt1x: np.ndarray
    q1x: np.ndarray
    q2x: np.ndarray
    q2xx: np.ndarray

    def Q(self) -> np.ndarray:
        out = np.zeros((self.q1.size, 2, 2))
        out[:, 0, 0] = self.q1
        out[:, 1, 1] = self.q2
        return out

    def is_positive(self) -> bool:
        return bool(np.all(self.q1 > 0) and np.all(self.q2 > 0))


def build_weights(s: SteadyState, p: PhysicalParams) -> LyapunovWeights:
    mu, g = p.mu, p.g
    H, Vx, Vxx, Hx, Hxx = s.Hs, s.Vsx, s.Vsxx, s.Hsx, s.Hsxx
    qt1 = g - 4.0 * (1.0 + mu) * Vx / H
    qt2 = H.copy()
    qt1x = -4.0 * (1.0 + mu) * (Vxx * H - Vx * Hx) / H**2
    return LyapunovWeights(
        grid=s.grid, mu=mu,
        q1=g + mu * qt1, q2=H + mu * qt2, qt1=qt1, qt2=qt2, qt1x=qt1x,
        q1x=mu * qt1x, q2x=(1.0 + mu) * Hx, q2xx=(1.0 + mu) * Hxx,
    )


def evaluate_W(y: StateVector, w: LyapunovWeights, grid: Grid) -> float:
    y.check_grid(grid)
    return trapezoid(w.q1 * y.h**2 + w.q2 * y.v**2, grid.dx)


def QB_field(sys: LinearizedSystem, w: LyapunovWeights) -> np.ndarray:
    return w.Q() @ sys.B


def QB_x_field(sys: LinearizedSystem, w: LyapunovWeights) -> np.ndarray:
    """Analytic x-derivative of Q B by the product rule on every entry."""
    s, mu = sys.steady, w.mu
    H, V, Hx, Vx, Vxx, Hxx = s.Hs, s.Vs, s.Hsx, s.Vsx, s.Vsxx, s.Hsxx
    B = sys.B
    B10x = -4.0 * mu * (Vxx * H - Vx * Hx) / H**2
    B11x = Vx - 4.0 * mu * (Hxx * H - Hx**2) / H**2
    out = np.empty_like(B)
    out[:, 0, 0] = w.q1x * V + w.q1 * Vx
    out[:, 0, 1] = w.q1x * H + w.q1 * Hx
    out[:, 1, 0] = w.q2x * B[:, 1, 0] + w.q2 * B10x
    out[:, 1, 1] = w.q2x * B[:, 1, 1] + w.q2 * B11x
    return out


def phi_field(sys: LinearizedSystem, w: LyapunovWeights, gamma: float) -> np.ndarray:
    Q = w.Q()
    QC = Q @ sys.C
    QxxA = np.zeros_like(Q)
    QxxA[:, 1, 1] = w.q2xx * sys.A[1, 1]
    return gamma * Q - (QC + np.swapaxes(QC, 1, 2)) - QxxA + QB_x_field(sys, w)


def compute_phi(sys: LinearizedSystem, w: LyapunovWeights, gamma: float, i: int) -> np.ndarray:
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    phi = phi_field(sys, w, gamma)[i]
    asym = abs(phi[0, 1] - phi[1, 0])
    if asym > 1e-12 * max(np.abs(phi).max(), np.finfo(float).tiny):
        raise ArithmeticError(f"phi lost symmetry at index {i}: |phi01 - phi10| = {asym:.3e}")
    return phi


def _negdef(M: np.ndarray) -> np.ndarray:
    """Sylvester test with a rounding margin; zero counts as failure."""
    scale = np.abs(M).max(axis=(1, 2))
    tol = NEGDEF_RTOL * np.maximum(scale, np.finfo(float).tiny)
    det = M[:, 0, 0] * M[:, 1, 1] - M[:, 0, 1] * M[:, 1, 0]
    return (M[:, 0, 0] <= -tol) & (det >= tol * scale)


def det_field(M: np.ndarray) -> np.ndarray:
    return M[:, 0, 0] * M[:, 1, 1] - M[:, 0, 1] * M[:, 1, 0]


def certify_interior(sys: LinearizedSystem, w: LyapunovWeights) -> tuple[Optional[float], float]:
    """Largest gamma in (0, 1] keeping phi(gamma) negative definite on the grid, and min det D."""
    D = phi_field(sys, w, 0.0)
    detD_min = float(det_field(D).min())
    if not np.all(_negdef(D)):
        return None, detD_min
    Q = w.Q()
    if np.all(_negdef(D + GAMMA_HI * Q)):
        return GAMMA_HI, detD_min
    lo, hi = 0.0, GAMMA_HI
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if np.all(_negdef(D + mid * Q)):
            lo = mid
        else:
            hi = mid
    return (lo if lo > 0 else None), detD_min


@dataclass(frozen=True)
class IntervalBounds:
    b0_lo: float
    b0_hi: float
    b1_lo: float
    b1_hi: float
    c1_lo: float
    c1_hi: float
    c1mu_lo: float
    c1mu_hi: float


def b_intervals(s: SteadyState, p: PhysicalParams) -> tuple[float, float, float, float]:
    g = p.g
    V0, H0, VL, HL = s.Vs[0], s.Hs[0], s.Vs[-1], s.Hs[-1]
    r0 = 1.0 / V0**2 - 1.0 / (g * H0)
    rL = 1.0 / VL**2 - 1.0 / (g * HL)
    if r0 < 0 or rL < 0:
        raise ValueError("supercritical boundary state: interval square roots are not real")
    m0, w0 = g / V0, g * np.sqrt(r0)
    mL, wL = -g / VL, g * np.sqrt(rL)
    lo0, hi0 = _centered(m0, w0)
    return lo0, hi0, mL - wL, mL + wL


def _centered(m: float, w: float) -> tuple[float, float]:
    """(m - w, m + w), with the smaller-magnitude end nudged by a few ulps so the float midpoint is m."""
    lo, hi = float(m - w), float(m + w)
    move_lo = abs(lo) <= abs(hi)
    for _ in range(64):
        mid = (lo + hi) / 2.0
        if mid == m:
            break
        direction = -np.inf if mid > m else np.inf
        if move_lo:
            lo = float(np.nextafter(lo, direction))
        else:
            hi = float(np.nextafter(hi, direction))
    return lo, hi


def interior_limit_polynomial(g: float, H0: float, V0: float) -> float:
    """Sign of the small-viscosity limit of det(D)/mu^2 away from the inlet."""
    gh = g * H0
    return -2.0 * gh**2 + 8.0 * gh * V0**2 - 4.0 * V0**4


def polynomial_window(V0: float) -> tuple[float, float]:
    """Open interval of g H0 on which the limit polynomial is positive."""
    r = np.sqrt(2.0)
    return (2.0 - r) * V0**2, (2.0 + r) * V0**2


def c1_interval(s: SteadyState, p: PhysicalParams, b1: float) -> tuple[float, float]:
    """Inviscid-limit c1 interval at x = L; NaN when b1 lies inside [b1-, b1+]."""
    g, V, H = p.g, s.Vs[-1], s.Hs[-1]
    arg = V * (H * V * b1**2 / g + 2.0 * H * b1 + V)
    if arg < 0:
        return float("nan"), float("nan")
    r = np.sqrt(arg)
    den = g * H - V**2
    return 4.0 * (-V - b1 * H - r) / den, 4.0 * (-V - b1 * H + r) / den


@dataclass(frozen=True)
class BoundaryForm:
    a1: float
    a2: float
    a3: float
    a4: float
    delta_h: float
    alpha: float
    beta: float
    gamma_L: float
    d1: float
    d2: float
    d3: float
    delta_d: float

    @property
    def negative(self) -> bool:
        return self.a1 < 0 and self.a2 < 0 and self.delta_h < 0

    def P_d(self, c1: float) -> float:
        return self.d1 * c1**2 + self.d2 * c1 + self.d3

    def c1mu_roots(self) -> tuple[float, float]:
        if not (self.d1 > 0 and self.delta_d > 0):
            return float("nan"), float("nan")
        r = np.sqrt(self.delta_d)
        lo, hi = sorted(((-self.d2 - r) / (2 * self.d1), (-self.d2 + r) / (2 * self.d1)))
        return float(lo), float(hi)


def boundary_form(sys: LinearizedSystem, w: LyapunovWeights, bc: BoundaryCoeffs) -> BoundaryForm:
    mu = w.mu
    QB = QB_field(sys, w)
    QB0, QBL = QB[0], QB[-1]
    b0, b1, c1 = bc.b0, bc.b1, bc.c1
    q2L, q2xL, q2x0 = w.q2[-1], w.q2x[-1], w.q2x[0]
    u0 = np.array([1.0, -b0])
    uL = np.array([1.0, b1])
    alpha, beta, gam = QBL[0, 0], QBL[0, 1], QBL[1, 1]
    a1 = u0 @ QB0 @ u0 + 4.0 * mu * b0**2 * q2x0
    a2 = -(uL @ QBL @ uL) - 4.0 * mu * b1**2 * q2xL
    a3 = mu**2 * (-gam * c1**2 + 8.0 * c1 * q2L - 4.0 * mu * c1**2 * q2xL)
    a4 = mu * (-2.0 * beta * c1 - 2.0 * gam * b1 * c1 + 8.0 * b1 * q2L - 8.0 * mu * b1 * c1 * q2xL)
    dd1 = -4.0 * alpha * gam + 4.0 * beta**2 - 16.0 * alpha * mu * q2xL
    dd2 = 32.0 * q2L * (alpha + beta * b1)
    dd3 = 64.0 * b1**2 * q2L**2
    return BoundaryForm(
        a1=float(a1), a2=float(a2), a3=float(a3), a4=float(a4),
        delta_h=float(a4**2 - 4.0 * a2 * a3),
        alpha=float(alpha), beta=float(beta), gamma_L=float(gam),
        d1=float(dd1), d2=float(dd2), d3=float(dd3), delta_d=float(dd2**2 - 4.0 * dd1 * dd3),
    )


def coefficient_intervals(s: SteadyState, p: PhysicalParams, b1: float) -> IntervalBounds:
    from .linearization import build_linear_system

    b0_lo, b0_hi, b1_lo, b1_hi = b_intervals(s, p)
    c1_lo, c1_hi = c1_interval(s, p, b1)
    sys = build_linear_system(s, p, BoundaryCoeffs(0.0, b1, 0.0))
    bf = boundary_form(sys, build_weights(s, p), sys.bc)
    c1mu_lo, c1mu_hi = bf.c1mu_roots()
    return IntervalBounds(float(b0_lo), float(b0_hi), float(b1_lo), float(b1_hi),
                          float(c1_lo), float(c1_hi), c1mu_lo, c1mu_hi)


def auto_boundary_coeffs(s: SteadyState, p: PhysicalParams) -> BoundaryCoeffs:
    """b0 at the centre of its interval, b1 just above b1+, c1 at the centre of (c1-, c1+)."""
    _, _, _, b1_hi = b_intervals(s, p)
    step = 0.1 * abs(b1_hi) if b1_hi != 0 else 0.1 * p.g / s.Vs[-1]
    b1 = b1_hi + step
    c1_lo, c1_hi = c1_interval(s, p, b1)
    return BoundaryCoeffs(b0=p.g / s.Vs[0], b1=float(b1), c1=float(0.5 * (c1_lo + c1_hi)))


def demo_gains(s: SteadyState, p: PhysicalParams) -> BoundaryCoeffs:
    """Gains used for the 1 km channel demonstration."""
    g, VL, HL = p.g, s.Vs[-1], s.Hs[-1]
    b1 = g * np.sqrt(1.0 / VL**2 - 1.0 / (g * HL))
    c1 = 4.0 * (VL + b1 * HL) / (VL**2 - g * HL)
    return BoundaryCoeffs(b0=p.g / s.Vs[0], b1=float(b1), c1=float(c1))


@dataclass(frozen=True)
class EnergyBalance:
    I: float
    Bterm: float
    dWdt: float
    W: float
    residual: float


def energy_balance(sys: LinearizedSystem, w: LyapunovWeights, y: StateVector, gamma: float) -> EnergyBalance:
    """Discrete check of ``dW/dt + gamma W = I + Bterm`` for a given state."""
    grid = sys.grid
    y.check_grid(grid)
    dx, mu = grid.dx, w.mu
    h, v = y.h, y.v
    vx = d1(v, dx)
    phi = phi_field(sys, w, gamma)
    quad = phi[:, 0, 0] * h**2 + (phi[:, 0, 1] + phi[:, 1, 0]) * h * v + phi[:, 1, 1] * v**2
    I = trapezoid(quad, dx) + 2.0 * trapezoid(sys.A[1, 1] * w.q2 * vx**2, dx)
    QB = QB_field(sys, w)

    def edge(i):
        yy = np.array([h[i], v[i]])
        return (sys.A[1, 1] * w.q2x[i] * v[i] ** 2 - yy @ QB[i] @ yy
                - 2.0 * sys.A[1, 1] * w.q2[i] * v[i] * vx[i])

    Bterm = float(edge(-1) - edge(0))
    yt = apply_operator(sys, y)
    dWdt = 2.0 * trapezoid(w.q1 * h * yt.h + w.q2 * v * yt.v, dx)
    W = evaluate_W(y, w, grid)
    return EnergyBalance(I=I, Bterm=Bterm, dWdt=dWdt, W=W, residual=abs(dWdt + gamma * W - I - Bterm))


def smooth_bump(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


def smooth_bump_dt(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    out[inside] = np.exp(-1.0 / (1.0 - ti**2)) * (-2.0 * ti / (1.0 - ti**2) ** 2)
    return out


@dataclass(frozen=True)
class GrowthRow:
    n: int
    I_yx: float
    W: float


def offdiagonal_counterexample(w: LyapunovWeights, q3_profile: np.ndarray, n_modes: Sequence[int],
                               points_per_wave: int = 64) -> list[GrowthRow]:
    """Gradient dissipation of a non-diagonal Q along an oscillating compact sequence.

    With ``h_n = b(x) sin(n w x)`` and ``v_n = -sign(q3) b(x) sin(n w x) / n^(5/4)`` the
    cross term ``-8 mu int q3 h_x v_x`` grows like n^(3/4), the ``q2 v_x^2`` term vanishes
    like n^(-1/2) and W stays of order one, so no decay rate can be certified.
    """
    q3_profile = np.asarray(q3_profile, dtype=float)
    if q3_profile.shape != w.q1.shape:
        raise ValueError("q3 profile must live on the weights' grid")
    if not np.any(q3_profile != 0):
        raise ValueError("q3 is identically zero: Q is already diagonal")
    if any(int(n) < 1 for n in n_modes):
        raise ValueError("modes must be positive integers")

    x = w.grid.x
    sign = np.sign(q3_profile)
    # longest run of constant nonzero sign
    best, start = (0, 0, 0), None
    for i in range(len(x) + 1):
        s_i = sign[i] if i < len(x) else 0
        if start is not None and (s_i != sign[start]):
            if i - start > best[0]:
                best = (i - start, start, i - 1)
            start = None
        if start is None and s_i != 0:
            start = i
    _, i0, i1 = best
    a, b = x[i0], x[i1]
    if b <= a:
        raise ValueError("q3 must be nonzero on an interval of positive length")
    s3 = sign[i0]
    centre, radius = 0.5 * (a + b), 0.5 * (b - a)
    omega = 2.0 * np.pi / w.grid.L

    nmax = max(int(n) for n in n_modes)
    m = max(int(points_per_wave * nmax * (b - a) / w.grid.L) + 1, 2001)
    xf = np.linspace(a, b, m)
    dxf = xf[1] - xf[0]
    q1 = np.interp(xf, x, w.q1)
    q2 = np.interp(xf, x, w.q2)
    q3 = np.interp(xf, x, q3_profile)
    t = (xf - centre) / radius
    bump, bump_x = smooth_bump(t), smooth_bump_dt(t) / radius

    rows = []
    for n in n_modes:
        n = int(n)
        sn, cn = np.sin(n * omega * xf), np.cos(n * omega * xf)
        base, base_x = bump * sn, bump_x * sn + n * omega * bump * cn
        amp = -s3 / n**1.25
        h, hx = base, base_x
        v, vx = amp * base, amp * base_x
        I_yx = -8.0 * w.mu * trapezoid(q3 * hx * vx + q2 * vx**2, dxf)
        W = trapezoid(q1 * h**2 + q2 * v**2 + 2.0 * q3 * h * v, dxf)
        rows.append(GrowthRow(n=n, I_yx=float(I_yx), W=float(W)))
    return rows


@dataclass
class StabilityReport:
    b0_lo: float
    b0_hi: float
    b1_lo: float
    b1_hi: float
    c1_lo: float
    c1_hi: float
    c1mu_lo: float
    c1mu_hi: float
    gamma_cert: Optional[float]
    detD_min: float
    detD_over_mu2_min: float
    a1: float
    a2: float
    a3: float
    a4: float
    delta_h: float
    delta_d: float
    b0: float
    b1: float
    c1: float
    mu: float
    subcritical_margin: float
    flags: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, float) and not np.isfinite(v):
                d[k] = None
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)


def stability_report(s: SteadyState, p: PhysicalParams, bc: BoundaryCoeffs) -> StabilityReport:
    from .linearization import build_linear_system

    sys = build_linear_system(s, p, bc)
    w = build_weights(s, p)
    b0_lo, b0_hi, b1_lo, b1_hi = b_intervals(s, p)
    c1_lo, c1_hi = c1_interval(s, p, bc.b1)
    bf = boundary_form(sys, w, bc)
    c1mu_lo, c1mu_hi = bf.c1mu_roots()
    gamma, detD_min = certify_interior(sys, w)
    margin = check_subcritical(s)
    flags = {
        "assumption_nearcritical": check_assumption_nearcritical(s),
        "subcritical": margin > 0,
        "Q_positive": w.is_positive(),
        "b0_in_interval": bool(b0_lo < bc.b0 < b0_hi),
        "b1_outside_interval": bool(not (b1_lo <= bc.b1 <= b1_hi)),
        "c1_in_interval": bool(c1_lo < bc.c1 < c1_hi),
        "c1_in_mu_interval": bool(c1mu_lo < bc.c1 < c1mu_hi),
        "interior_negative_definite": gamma is not None,
        "boundary_a1_negative": bf.a1 < 0,
        "boundary_a2_negative": bf.a2 < 0,
        "boundary_delta_h_negative": bf.delta_h < 0,
    }
    flags["boundary_negative"] = bf.negative
    certified = flags["Q_positive"] and flags["interior_negative_definite"] and bf.negative
    flags["certified"] = bool(certified)
    return StabilityReport(
        b0_lo=b0_lo, b0_hi=b0_hi, b1_lo=b1_lo, b1_hi=b1_hi, c1_lo=c1_lo, c1_hi=c1_hi,
        c1mu_lo=c1mu_lo, c1mu_hi=c1mu_hi,
        gamma_cert=gamma if certified else None,
        detD_min=detD_min, detD_over_mu2_min=detD_min / p.mu**2,
        a1=bf.a1, a2=bf.a2, a3=bf.a3, a4=bf.a4, delta_h=bf.delta_h, delta_d=bf.delta_d,
        b0=bc.b0, b1=bc.b1, c1=bc.c1, mu=p.mu, subcritical_margin=margin,
        flags={k: bool(v) for k, v in flags.items()},
    )
