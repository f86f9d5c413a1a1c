"""The ten acceptance criteria, each at its stated tolerance and runtime budget.

Every test prints one ``criterion N: PASS|FAIL`` line (visible with ``pytest -v``).
"""

import time

import numpy as np
import pytest

from svstab.linearization import build_linear_system
from svstab.lyapunov import (QB_field, auto_boundary_coeffs, b_intervals, boundary_form, build_weights,
                             c1_interval, certify_interior, energy_balance, interior_limit_polynomial,
                             offdiagonal_counterexample, demo_gains, phi_field, smooth_bump, stability_report)
from svstab.model import Grid, PhysicalParams, StateVector, l2_norm
from svstab.simulator import (SimulationConfig, cfl_limit, lyapunov_monotonicity, simulate, spectrum,
                              weighted_monotonicity)
from svstab.steady import check_subcritical, solve_steady, verify_asymptotics

from conftest import G, smooth_case_at
from manufactured import manufactured

LONG_CHANNEL = PhysicalParams(g=G, mu=1e-3, kappa=2e-3, L=1000.0)
NEAR = PhysicalParams(g=G, mu=1e-4, kappa=2e-3, L=10.0)


def verdict(capsys, number, checks, elapsed, budget):
    checks = dict(checks)
    checks[f"runtime {elapsed:.1f}s < {budget:g}s"] = elapsed < budget
    failed = [name for name, ok in checks.items() if not ok]
    with capsys.disabled():
        status = "PASS" if not failed else "FAIL on " + "; ".join(failed)
        print(f"\ncriterion {number}: {status} | " + "; ".join(checks))
    assert not failed, failed


def near_system(n):
    s = solve_steady(NEAR, 0.2, 1.0, Grid(n, NEAR.L))
    return build_linear_system(s, NEAR, auto_boundary_coeffs(s, NEAR))


def near_initial(x):
    return StateVector(0.01 * np.cos(2 * x + 1), 0.01 * np.cos(x))


@pytest.fixture(scope="module")
def certified_run():
    t0 = time.perf_counter()
    sysm = near_system(401)
    dt = 0.9 * cfl_limit(sysm)
    trace = simulate(sysm, SimulationConfig(dt=dt, T=200.0, initial=near_initial(sysm.grid.x)))
    return sysm, trace, time.perf_counter() - t0


def test_criterion_1_long_channel_decay(capsys):
    t0 = time.perf_counter()
    grid = Grid.from_spacing(LONG_CHANNEL.L, 0.5)
    s = solve_steady(LONG_CHANNEL, 4.0, 1.0, grid)
    sysm = build_linear_system(s, LONG_CHANNEL, demo_gains(s, LONG_CHANNEL))
    x = grid.x
    y0 = StateVector(0.01 * np.cos(20 * x + 15), 0.01 * np.cos(x))
    tr = simulate(sysm, SimulationConfig(dt=0.033, T=3500.0, initial=y0))
    elapsed = time.perf_counter() - t0
    ratio = tr.l2[-1] / tr.l2[0]
    verdict(capsys, 1, {
        f"l2 ratio {ratio:.3g} < 0.5": ratio < 0.5,
        f"gamma_fit {tr.gamma_fit} > 0": tr.gamma_fit is not None and tr.gamma_fit > 0,
        f"R^2 {tr.fit_r2} > 0.95": tr.fit_r2 is not None and tr.fit_r2 > 0.95,
    }, elapsed, 120)


def test_criterion_2_steady_invariants(capsys):
    checks, slowest = {}, 0.0
    for name, p, H0, grid in (("long_channel", LONG_CHANNEL, 4.0, Grid.from_spacing(1000.0, 0.5)),
                              ("near-critical", NEAR, 0.2, Grid(2001, 10.0))):
        t0 = time.perf_counter()
        s = solve_steady(p, H0, 1.0, grid)
        slowest = max(slowest, time.perf_counter() - t0)
        flux = np.max(np.abs(s.Hs * s.Vs - s.Q0)) / s.Q0
        checks[f"{name}: flux drift {flux:.2e} <= 1e-10"] = flux <= 1e-10
        checks[f"{name}: subcritical margin {check_subcritical(s):.4g} > 0"] = check_subcritical(s) > 0
        checks[f"{name}: min V*_x {s.Vsx.min():.3g} >= -1e-12"] = s.Vsx.min() >= -1e-12
    verdict(capsys, 2, checks, slowest, 5)


def test_criterion_3_asymptotic_scaling(capsys):
    # the regime kappa H / (3 mu) >> 1, where V* - V0 is O(mu) on a fixed channel
    t0 = time.perf_counter()
    res = []
    for mu in (2e-4, 1e-4, 5e-5):
        p = PhysicalParams(g=G, mu=mu, kappa=0.1, L=0.05)
        res.append(verify_asymptotics(solve_steady(p, 0.2, 1.0, Grid(20001, p.L)), p))
    elapsed = time.perf_counter() - t0
    r1 = [res[i].R1 / res[i + 1].R1 for i in range(2)]
    r2 = [res[i].R2 / res[i + 1].R2 for i in range(2)]
    verdict(capsys, 3, {
        f"sup|V*-V0| ratios {np.round(r1, 3).tolist()} in [1.6, 2.4]": all(1.6 <= r <= 2.4 for r in r1),
        f"V*_x expansion residual ratios {np.round(r2, 3).tolist()} in [3.0, 5.5]":
            all(3.0 <= r <= 5.5 for r in r2),
    }, elapsed, 30)


def test_criterion_4_certificate(capsys):
    t0 = time.perf_counter()
    checks = {}
    for name, p, H0, grid, policy in (("long_channel", LONG_CHANNEL, 4.0, Grid.from_spacing(1000.0, 0.5), demo_gains),
                                      ("near-critical", NEAR, 0.2, Grid(2001, 10.0), auto_boundary_coeffs)):
        s = solve_steady(p, H0, 1.0, grid)
        sysm = build_linear_system(s, p, policy(s, p))
        QB = QB_field(sysm, build_weights(s, p))
        asym = np.max(np.abs(QB[:, 0, 1] - QB[:, 1, 0]) / np.abs(QB).max(axis=(1, 2)))
        checks[f"{name}: QB asymmetry {asym:.2e} <= 1e-12"] = asym <= 1e-12

    s = solve_steady(NEAR, 0.2, 1.0, Grid(2001, 10.0))
    sysm = build_linear_system(s, NEAR, auto_boundary_coeffs(s, NEAR))
    w = build_weights(s, NEAR)
    D = phi_field(sysm, w, 0.0)
    det = D[:, 0, 0] * D[:, 1, 1] - D[:, 0, 1] * D[:, 1, 0]
    gamma, _ = certify_interior(sysm, w)
    bf = boundary_form(sysm, w, sysm.bc)
    checks[f"det D min {det.min():.3g} > 0"] = det.min() > 0
    checks[f"gamma_cert {gamma} > 0"] = gamma is not None and gamma > 0
    checks[f"a1 {bf.a1:.3g} < 0"] = bf.a1 < 0
    checks[f"a2 {bf.a2:.3g} < 0"] = bf.a2 < 0
    checks[f"delta_h {bf.delta_h:.3g} < 0"] = bf.delta_h < 0

    scaled = []
    for mu in (1e-3, 5e-4, 2.5e-4):
        p = PhysicalParams(g=G, mu=mu, kappa=0.05, L=1.0)
        sm = solve_steady(p, 0.2, 1.0, Grid(20001, p.L))
        Dm = phi_field(build_linear_system(sm, p, auto_boundary_coeffs(sm, p)), build_weights(sm, p), 0.0)
        scaled.append(float(np.min(Dm[:, 0, 0] * Dm[:, 1, 1] - Dm[:, 0, 1] * Dm[:, 1, 0])) / mu**2)
    spread = [abs(a - b) / max(a, b) for a, b in zip(scaled, scaled[1:])]
    checks[f"det D / mu^2 minima {np.round(scaled, 1).tolist()} positive"] = min(scaled) > 0
    checks[f"successive minima differ {np.round(spread, 3).tolist()} < 50%"] = max(spread) < 0.5
    verdict(capsys, 4, checks, time.perf_counter() - t0, 30)


def test_criterion_5_interval_formulas(capsys):
    t0 = time.perf_counter()
    checks = {}
    s5 = solve_steady(LONG_CHANNEL, 4.0, 1.0, Grid.from_spacing(1000.0, 0.5))
    sn = solve_steady(NEAR, 0.2, 1.0, Grid(2001, 10.0))
    for name, s, p in (("long_channel", s5, LONG_CHANNEL), ("near-critical", sn, NEAR)):
        lo, hi, _, _ = b_intervals(s, p)
        checks[f"{name}: b0 midpoint exact"] = (lo + hi) / 2 == p.g / s.Vs[0]
    bc5 = demo_gains(s5, LONG_CHANNEL)
    lo, hi = c1_interval(s5, LONG_CHANNEL, bc5.b1)
    err = abs(bc5.c1 - 0.5 * (lo + hi)) / abs(0.5 * (lo + hi))
    checks[f"long_channel c1 vs midpoint {err:.2e} <= 1e-10"] = err <= 1e-10
    for name, s, p, bc in (("long_channel", s5, LONG_CHANNEL, bc5), ("near-critical", sn, NEAR, auto_boundary_coeffs(sn, NEAR))):
        sysm = build_linear_system(s, p, bc)
        w = build_weights(s, p)
        bf = boundary_form(sysm, w, bc)
        target = -1024 * w.q2[-1] ** 2 * bf.alpha * bf.a2
        err = abs(bf.delta_d - target) / abs(target)
        checks[f"{name}: delta_d identity {err:.2e} <= 1e-8"] = err <= 1e-8
    V0 = 1.0
    ratios = np.linspace(0.05, 5.0, 350)
    mismatches = sum((interior_limit_polynomial(G, r * V0**2 / G, V0) > 0) != (2 - np.sqrt(2) < r < 2 + np.sqrt(2))
                     for r in ratios)
    checks[f"polynomial window mismatches {mismatches}/350"] = mismatches == 0
    verdict(capsys, 5, checks, time.perf_counter() - t0, 10)


def test_criterion_6_lyapunov_decay(capsys, certified_run):
    sysm, trace, elapsed = certified_run
    t0 = time.perf_counter()
    rep = stability_report(sysm.steady, sysm.params, sysm.bc)
    gamma = rep.gamma_cert
    checks = {f"configuration certified (gamma_cert {gamma})": rep.flags["certified"]}
    if gamma is not None:
        checks[f"W violations {lyapunov_monotonicity(trace)} == 0"] = lyapunov_monotonicity(trace) == 0
        weighted = weighted_monotonicity(trace, gamma)
        checks[f"W e^(gamma t) violations {weighted} == 0"] = weighted == 0
    verdict(capsys, 6, checks, elapsed + time.perf_counter() - t0, 60)


def test_criterion_7_spectrum(capsys, certified_run):
    _, trace, sim_time = certified_run
    t0 = time.perf_counter()
    maxre = [spectrum(near_system(n)).max_real for n in (101, 201, 401)]
    elapsed = time.perf_counter() - t0 + sim_time
    ratio = abs(maxre[-1]) / trace.gamma_fit
    diffs = [abs(maxre[1] - maxre[0]), abs(maxre[2] - maxre[1])]
    verdict(capsys, 7, {
        f"max Re lambda {maxre[-1]:.4g} < 0": maxre[-1] < 0,
        f"|max Re| / gamma_fit {ratio:.3g} within factor 2": 0.5 <= ratio <= 2.0,
        f"successive differences {np.array(diffs).round(6).tolist()} shrink": diffs[1] < diffs[0],
    }, elapsed, 60)


def test_criterion_8_energy_balance(capsys):
    t0 = time.perf_counter()
    res = []
    for n in (101, 201, 401, 801):
        case = smooth_case_at(n)
        x = case.grid.x
        y = StateVector(np.cos(3 * x) + 0.3 * x, np.sin(2 * x) + x**2)
        res.append(energy_balance(case.sys, case.w, y, 0.01).residual)
    orders = np.log2(np.array(res[:-1]) / np.array(res[1:]))
    case = smooth_case_at(201)
    bump = smooth_bump((case.grid.x - 0.5) / 0.3)
    eb = energy_balance(case.sys, case.w, StateVector(bump, 0.5 * bump * np.sin(7 * case.grid.x)), 0.01)
    verdict(capsys, 8, {
        f"residual orders {orders.round(3).tolist()} >= 1.7": bool(np.all(orders >= 1.7)),
        f"boundary term {eb.Bterm} == 0 for compact support": eb.Bterm == 0.0,
    }, time.perf_counter() - t0, 30)


def test_criterion_9_offdiagonal_growth(capsys):
    t0 = time.perf_counter()
    s = solve_steady(NEAR, 0.2, 1.0, Grid(2001, 10.0))
    w = build_weights(s, NEAR)
    x, L = s.grid.x, s.grid.L
    q3 = np.where((x >= L / 4) & (x <= 3 * L / 4), 1.0, 0.0)
    rows = offdiagonal_counterexample(w, q3, [4, 8, 16, 32, 64])
    I = [r.I_yx for r in rows]
    W = [r.W for r in rows]
    ratio = I[3] / I[2]
    verdict(capsys, 9, {
        "I_yx increasing in n": all(a < b for a, b in zip(I, I[1:])),
        f"I(32)/I(16) = {ratio:.4f} in [1.45, 1.9]": 1.45 <= ratio <= 1.9,
        f"W max/min {max(W) / min(W):.3f} < 3": max(W) / min(W) < 3,
    }, time.perf_counter() - t0, 10)


def test_criterion_10_scheme_order(capsys):
    t0 = time.perf_counter()
    T = 0.5
    errs = []
    for n in (51, 101, 201, 401):
        sysm = smooth_case_at(n).sys
        forcing, exact = manufactured(sysm)
        steps = int(np.ceil(T / (2 * sysm.grid.dx**2)))
        tr = simulate(sysm, SimulationConfig(dt=T / steps, T=T, initial=exact(0.0)), forcing=forcing)
        errs.append(l2_norm(tr.final + exact(T) * -1.0, sysm.grid))
    space = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))

    sysm = smooth_case_at(101).sys
    forcing, exact = manufactured(sysm)
    finals = [simulate(sysm, SimulationConfig(dt=T / k, T=T, initial=exact(0.0)), forcing=forcing).final
              for k in (160, 320, 640, 1280)]
    diffs = [l2_norm(finals[i] + finals[i + 1] * -1.0, sysm.grid) for i in range(3)]
    time_orders = np.log2(np.array(diffs[:-1]) / np.array(diffs[1:]))
    verdict(capsys, 10, {
        f"temporal orders {time_orders.round(3).tolist()} in [0.8, 1.2]": bool(np.all((time_orders >= 0.8) & (time_orders <= 1.2))),
        f"spatial orders {space.round(3).tolist()} in [1.7, 2.3]": bool(np.all((space >= 1.7) & (space <= 2.3))),
    }, time.perf_counter() - t0, 120)
