"""Command line front end: ``svstab {steady,check,simulate,sweep,demo-offdiag,spectrum}``.

Exit codes: 0 success, 1 bad configuration or precondition, 2 steady state left the
admissible region, 3 numerical failure during time integration.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import os
import sys
from dataclasses import replace
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import ConfigError, RunConfig, load_config, parse_assignment
from .linearization import LinearizedSystem, build_linear_system
from .lyapunov import (auto_boundary_coeffs, build_weights, c1_interval, offdiagonal_counterexample,
                       demo_gains, stability_report)
from .model import BoundaryCoeffs, PhysicalParams
from .plotting import l2_figure
from .simulator import (ImplicitSolveError, SimulationConfig, SimulationDiverged, cfl_limit,
                        lyapunov_monotonicity, simulate, spectrum)
from .steady import SteadyState, SteadyStateError, check_assumption_nearcritical, check_subcritical, solve_steady

EXIT_OK, EXIT_CONFIG, EXIT_DOMAIN, EXIT_NUMERIC = 0, 1, 2, 3

FLAG_NAMES = (
    "assumption_nearcritical", "subcritical", "Q_positive", "b0_in_interval", "b1_outside_interval",
    "c1_in_interval", "c1_in_mu_interval", "interior_negative_definite", "boundary_a1_negative",
    "boundary_a2_negative", "boundary_delta_h_negative", "boundary_negative", "certified",
)
SWEEP_AXES = ("H0", "V0", "mu", "b0", "b1", "c1")
SWEEP_COLUMNS = SWEEP_AXES + ("gamma_cert", "detD_min", "detD_over_mu2_min", "a1", "a2", "delta_h") \
    + FLAG_NAMES + ("max_real", "error")


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to null."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if np.isfinite(obj) else None
    return obj


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_clean(obj), indent=2) + "\n")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


# pipeline ---------------------------------------------------------------------

def steady_from(cfg: RunConfig) -> SteadyState:
    return solve_steady(cfg.physical, cfg.H0, cfg.V0, cfg.grid)


def resolve_bc(cfg: RunConfig, s: SteadyState, p: PhysicalParams, overrides: Optional[dict] = None) -> BoundaryCoeffs:
    partial = dict(cfg.partial_bc)
    partial.update(overrides or {})
    if cfg.bc == "demo" and not partial:
        return demo_gains(s, p)
    base = auto_boundary_coeffs(s, p)
    if not partial:
        return base
    b0 = partial.get("b0", base.b0)
    b1 = partial.get("b1", base.b1)
    if "c1" in partial:
        c1 = partial["c1"]
    elif "b1" in partial:
        lo, hi = c1_interval(s, p, b1)
        c1 = 0.5 * (lo + hi) if np.isfinite(lo) else 0.0
    else:
        c1 = base.c1
    return BoundaryCoeffs(float(b0), float(b1), float(c1))


def system_from(cfg: RunConfig, overrides: Optional[dict] = None) -> LinearizedSystem:
    s = steady_from(cfg)
    return build_linear_system(s, cfg.physical, resolve_bc(cfg, s, cfg.physical, overrides))


def _bc_dict(bc: BoundaryCoeffs) -> dict:
    return {"b0": bc.b0, "b1": bc.b1, "c1": bc.c1}


# commands ---------------------------------------------------------------------

def cmd_steady(cfg: RunConfig) -> int:
    s = steady_from(cfg)
    out = cfg.outputs
    s.to_csv(out / "steady.csv")
    region = s.region
    summary = {
        "H0": s.H0, "V0": s.V0, "Q0": s.Q0, "C0": s.C0, "n": s.grid.n, "L": s.grid.L,
        "g": cfg.physical.g, "mu": cfg.physical.mu, "kappa": cfg.physical.kappa,
        "H_L": float(s.Hs[-1]), "V_L": float(s.Vs[-1]), "Vx_max": float(s.Vsx.max()),
        "subcritical_margin": check_subcritical(s),
        "assumption_nearcritical": check_assumption_nearcritical(s),
        "region": {"eps": region.eps, "c_y": region.c_y, "C_z": region.C_z, "C1": region.C1},
    }
    write_json(out / "steady.json", summary)
    print(f"steady state: Q0 = {s.Q0:.6g}, V(L) = {s.Vs[-1]:.6g}, subcritical margin = {summary['subcritical_margin']:.6g}")
    return EXIT_OK


def cmd_check(cfg: RunConfig) -> int:
    s = steady_from(cfg)
    bc = resolve_bc(cfg, s, cfg.physical)
    rep = stability_report(s, cfg.physical, bc)
    d = rep.to_dict()
    d["bc_policy"] = cfg.bc
    write_json(cfg.outputs / "report.json", d)
    gamma = "none" if rep.gamma_cert is None else f"{rep.gamma_cert:.6g} 1/s"
    print(f"certified: {rep.flags['certified']}  gamma_cert: {gamma}  "
          f"near-critical assumption: {rep.flags['assumption_nearcritical']}")
    return EXIT_OK


def _run_simulation(cfg: RunConfig):
    sysm = system_from(cfg)
    dt = cfg.dt if cfg.dt is not None else 0.5 * cfl_limit(sysm)
    sim = SimulationConfig(dt=dt, T=cfg.T, initial=cfg.initial_state(sysm.grid),
                           snapshot_stride=cfg.snapshot_stride)
    return sysm, sim, simulate(sysm, sim)


def cmd_simulate(cfg: RunConfig) -> int:
    out = cfg.outputs
    mus = cfg.mu_list or (cfg.physical.mu,)
    curves, summaries = [], []
    for mu in mus:
        run_cfg = cfg.with_mu(mu)
        sysm, sim, trace = _run_simulation(run_cfg)
        tag = "" if len(mus) == 1 else f"_mu{mu:g}"
        trace.to_csv(out / f"trace{tag}.csv")
        for t, y in trace.snapshots:
            k = int(round(t / sim.dt))
            write_csv(out / f"snapshot{tag}_{k:07d}.csv", ("x", "h", "v"),
                      list(zip(sysm.grid.x, y.h, y.v)))
        curves.append((f"mu = {mu:g}", trace.times, trace.l2))
        summaries.append({
            "mu": mu, "dt": sim.dt, "steps": sim.steps, "T": cfg.T, **_bc_dict(sysm.bc),
            "l2_initial": float(trace.l2[0]), "l2_final": float(trace.l2[-1]),
            "l2_ratio": float(trace.l2[-1] / trace.l2[0]) if trace.l2[0] > 0 else None,
            "gamma_fit": trace.gamma_fit, "fit_r2": trace.fit_r2,
            "W_violations": lyapunov_monotonicity(trace),
        })
        print(f"mu = {mu:g}: l2 {trace.l2[0]:.4g} -> {trace.l2[-1]:.4g}, gamma_fit = {trace.gamma_fit}")
    (out / "l2.svg").write_text(l2_figure(curves))
    write_json(out / "simulation.json", summaries if len(summaries) > 1 else summaries[0])
    return EXIT_OK


def sweep_row(job: tuple[RunConfig, dict]) -> list:
    """One sweep point; failures are reported in the ``error`` column."""
    cfg, point = job
    row = {k: point.get(k) for k in SWEEP_AXES}
    try:
        run = replace(cfg, H0=point["H0"], V0=point["V0"], physical=cfg.physical.with_mu(point["mu"]))
        s = steady_from(run)
        bc = resolve_bc(run, s, run.physical, {k: point[k] for k in ("b0", "b1", "c1") if k in point})
        rep = stability_report(s, run.physical, bc)
        row.update(b0=bc.b0, b1=bc.b1, c1=bc.c1, gamma_cert=rep.gamma_cert, detD_min=rep.detD_min,
                   detD_over_mu2_min=rep.detD_over_mu2_min, a1=rep.a1, a2=rep.a2, delta_h=rep.delta_h)
        row.update(rep.flags)
        if cfg.with_spectrum:
            row["max_real"] = spectrum(build_linear_system(s, run.physical, bc)).max_real
    except Exception as exc:  # noqa: BLE001 - recorded per row by design
        row["error"] = f"{type(exc).__name__}: {exc}"
    return [row.get(k) for k in SWEEP_COLUMNS]


def sweep_points(cfg: RunConfig) -> list[dict]:
    axes = []
    for name in SWEEP_AXES:
        if name in cfg.sweeps:
            axes.append([(name, v) for v in cfg.sweeps[name]])
        elif name in ("H0", "V0"):
            axes.append([(name, getattr(cfg, name))])
        elif name == "mu":
            axes.append([("mu", cfg.physical.mu)])
    return [dict(combo) for combo in itertools.product(*axes)]


def pool_size() -> int:
    env = os.environ.get("SVSTAB_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"SVSTAB_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigError("SVSTAB_THREADS must be at least 1")
        return n
    return os.cpu_count() or 1


def run_sweep(cfg: RunConfig) -> list[list]:
    jobs = [(cfg, pt) for pt in sweep_points(cfg)]
    workers = min(pool_size(), max(len(jobs), 1))
    if workers <= 1:
        return [sweep_row(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(sweep_row, jobs))


def cmd_sweep(cfg: RunConfig) -> int:
    rows = run_sweep(cfg)
    write_csv(cfg.outputs / "sweep.csv", SWEEP_COLUMNS, rows)
    ok = sum(1 for r in rows if r[SWEEP_COLUMNS.index("certified")])
    print(f"sweep: {len(rows)} rows, {ok} certified")
    return EXIT_OK


def q3_step_profile(x: np.ndarray, L: float, value: float) -> np.ndarray:
    return np.where((x >= 0.25 * L) & (x <= 0.75 * L), value, 0.0)


def cmd_demo_offdiag(cfg: RunConfig) -> int:
    s = steady_from(cfg)
    w = build_weights(s, cfg.physical)
    rows = offdiagonal_counterexample(w, q3_step_profile(s.grid.x, s.grid.L, cfg.q3), cfg.modes)
    write_csv(cfg.outputs / "offdiag.csv", ("n", "I_yx", "W"), [(r.n, r.I_yx, r.W) for r in rows])
    for r in rows:
        print(f"n = {r.n:4d}  I_yx = {r.I_yx:.6g}  W = {r.W:.6g}")
    return EXIT_OK


def cmd_spectrum(cfg: RunConfig) -> int:
    sysm = system_from(cfg)
    rep = spectrum(sysm)
    rep.to_csv(cfg.outputs / "spectrum.csv")
    write_json(cfg.outputs / "spectrum.json", {"max_real": rep.max_real, "n_used": rep.n_used,
                                               "count": int(rep.eigenvalues.size), **_bc_dict(sysm.bc)})
    print(f"max Re lambda = {rep.max_real:.6g} 1/s on n = {rep.n_used}")
    return EXIT_OK


COMMANDS = {
    "steady": cmd_steady, "check": cmd_check, "simulate": cmd_simulate, "sweep": cmd_sweep,
    "demo-offdiag": cmd_demo_offdiag, "spectrum": cmd_spectrum,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value configuration file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--mu", help="viscosity override")
    common.add_argument("--n", help="grid size override")
    common.add_argument("--mu-list", dest="mu_list", help="comma list of viscosities (simulate)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any configuration key (repeatable)")
    parser = _Parser(prog="svstab", description="Stability certificates and simulations for the "
                                                "linearized viscous Saint-Venant equations.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        overrides = dict(parse_assignment(item) for item in args.set)
        for key in ("out", "mu", "n", "mu_list"):
            val = getattr(args, key)
            if val is not None:
                overrides[key] = val
        cfg = load_config(args.config, overrides)
        cfg.outputs.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg)
    except SteadyStateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (SimulationDiverged, ImplicitSolveError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
