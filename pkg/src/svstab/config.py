"""Flat ``key = value`` run configuration.

Lines starting with ``#`` are comments.  Recognised keys::

    g mu kappa L H0 V0 n dx          physical data and grid (dx is used only when n is absent)
    bc                                auto | demo | manual
    b0 b1 c1                          explicit gains; any of them switches bc to manual,
                                      missing ones fall back to the auto policy
    dt T snapshot_stride init seed    simulation (dt = auto picks half the CFL limit;
                                      init = oscillatory | smooth | random)
    mu_list                           comma list, one simulation curve per value
    q3 modes                          off-diagonal demo weight and mode list
    sweep_H0 sweep_V0 sweep_mu
    sweep_b0 sweep_b1 sweep_c1        ranges: "a,b,c" or "start:stop:count"
    with_spectrum                     add max_real to sweep rows (true/false)
    out                               output directory
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .model import Grid, PhysicalParams, StateVector


class ConfigError(ValueError):
    pass


FLOAT_KEYS = {"g", "mu", "kappa", "L", "H0", "V0", "dx", "b0", "b1", "c1", "T", "q3"}
INT_KEYS = {"n", "snapshot_stride", "seed"}
STR_KEYS = {"bc", "dt", "init", "out", "mu_list", "modes", "with_spectrum"}
SWEEP_KEYS = ("sweep_H0", "sweep_V0", "sweep_mu", "sweep_b0", "sweep_b1", "sweep_c1")
ALL_KEYS = FLOAT_KEYS | INT_KEYS | STR_KEYS | set(SWEEP_KEYS)

DEFAULTS: dict[str, str] = {
    "g": "9.81", "mu": "0.001", "kappa": "0.002", "L": "1000", "H0": "4", "V0": "1",
    "dx": "0.5", "bc": "auto", "dt": "auto", "T": "3500", "snapshot_stride": "0",
    "init": "oscillatory", "seed": "0", "out": "svstab_out", "q3": "1.0", "modes": "4,8,16,32,64",
    "with_spectrum": "false",
}


def parse_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in ALL_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = value
    return out


def parse_assignment(item: str) -> tuple[str, str]:
    if "=" not in item:
        raise ConfigError(f"--set expects key=value, got {item!r}")
    key, value = (s.strip() for s in item.split("=", 1))
    if key not in ALL_KEYS:
        raise ConfigError(f"unknown key {key!r}")
    return key, value


def parse_range(text: str) -> list[float]:
    text = text.strip()
    if not text:
        return []
    try:
        if ":" in text:
            start, stop, count = text.split(":")
            return [float(v) for v in np.linspace(float(start), float(stop), int(count))]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad range {text!r}: {exc}") from exc


def _float(key: str, value: str) -> float:
    try:
        out = float(value)
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {value!r}") from None
    if not np.isfinite(out):
        raise ConfigError(f"{key} must be finite")
    return out


def _int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {value!r}") from None


@dataclass(frozen=True)
class RunConfig:
    physical: PhysicalParams
    H0: float
    V0: float
    n: int
    bc: str  # auto | demo | manual
    partial_bc: dict = field(default_factory=dict)
    dt: Optional[float] = None
    T: float = 3500.0
    snapshot_stride: int = 0
    init: str = "oscillatory"
    seed: int = 0
    outputs: Path = Path("svstab_out")
    mu_list: tuple = ()
    q3: float = 1.0
    modes: tuple = (4, 8, 16, 32, 64)
    sweeps: dict = field(default_factory=dict)
    with_spectrum: bool = False

    @property
    def grid(self) -> Grid:
        return Grid(self.n, self.physical.L)

    def with_mu(self, mu: float) -> "RunConfig":
        return replace(self, physical=self.physical.with_mu(mu))

    def initial_state(self, grid: Grid) -> StateVector:
        x = grid.x
        if self.init == "oscillatory":
            return StateVector(0.01 * np.cos(20.0 * x + 15.0), 0.01 * np.cos(x))
        if self.init == "smooth":
            k = 2.0 * np.pi / grid.L
            return StateVector(0.01 * np.cos(k * x), 0.01 * np.sin(0.5 * k * x))
        if self.init == "random":
            rng = np.random.default_rng(self.seed)
            a, b = rng.normal(size=(2, 4))
            k = np.pi * np.arange(1, 5)[:, None] * x[None, :] / grid.L
            return StateVector(0.01 * a @ np.cos(k), 0.01 * b @ np.cos(k))
        raise ConfigError(f"unknown init {self.init!r}")


def build_config(values: dict[str, str]) -> RunConfig:
    v = dict(DEFAULTS)
    v.update(values)
    try:
        phys = PhysicalParams(g=_float("g", v["g"]), mu=_float("mu", v["mu"]),
                              kappa=_float("kappa", v["kappa"]), L=_float("L", v["L"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if "n" in v:
        n = _int("n", v["n"])
    else:
        dx = _float("dx", v["dx"])
        if dx <= 0:
            raise ConfigError("dx must be positive")
        n = Grid.from_spacing(phys.L, dx).n
    if n < 5:
        raise ConfigError("n must be at least 5")

    bc = v["bc"]
    partial = {k: _float(k, v[k]) for k in ("b0", "b1", "c1") if k in v}
    if bc not in ("auto", "demo", "manual"):
        raise ConfigError(f"bc must be auto, demo or manual, got {bc!r}")
    if partial:
        bc = "manual"
    if bc == "manual" and not partial:
        raise ConfigError("bc = manual needs at least one of b0, b1, c1")

    dt = None if v["dt"] == "auto" else _float("dt", v["dt"])
    if dt is not None and dt <= 0:
        raise ConfigError("dt must be positive")
    T = _float("T", v["T"])
    if T < 0:
        raise ConfigError("T must be nonnegative")
    stride = _int("snapshot_stride", v["snapshot_stride"])
    if stride < 0:
        raise ConfigError("snapshot_stride must be nonnegative")
    if v["init"] not in ("oscillatory", "smooth", "random"):
        raise ConfigError(f"unknown init {v['init']!r}")
    try:
        modes = tuple(int(m) for m in v["modes"].split(",") if m.strip())
    except ValueError:
        raise ConfigError(f"modes must be a comma list of integers, got {v['modes']!r}") from None
    mu_list = tuple(parse_range(v.get("mu_list", "")))
    if any(m <= 0 for m in mu_list):
        raise ConfigError("mu_list values must be positive")
    sweeps = {k[len("sweep_"):]: parse_range(v[k]) for k in SWEEP_KEYS if k in v}
    flag = v["with_spectrum"].lower()
    if flag not in ("true", "false", "1", "0", "yes", "no"):
        raise ConfigError(f"with_spectrum must be a boolean, got {v['with_spectrum']!r}")
    return RunConfig(
        physical=phys, H0=_float("H0", v["H0"]), V0=_float("V0", v["V0"]), n=n, bc=bc,
        partial_bc=partial, dt=dt, T=T, snapshot_stride=stride, init=v["init"],
        seed=_int("seed", v["seed"]), outputs=Path(v["out"]), mu_list=mu_list,
        q3=_float("q3", v["q3"]), modes=modes, sweeps=sweeps,
        with_spectrum=flag in ("true", "1", "yes"),
    )


def load_config(path: Optional[Union[str, Path]], overrides: dict[str, str]) -> RunConfig:
    values: dict[str, str] = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        values.update(parse_text(text))
    values.update(overrides)
    return build_config(values)
