"""Experiment configuration read from TOML files."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .mesh import ChannelParams

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

__all__ = ["ExperimentConfig", "ConfigError", "load_config", "DEFAULT_PATCHES"]

DEFAULT_PATCHES = ((1.5, 0.3, 1.8, 0.45, "y"), (1.5, 0.55, 1.8, 0.7, "y"))


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """All knobs of the scaling and robustness experiments.

    TOML layout (every table and key optional)::

        name = "demo"
        output_dir = "out"

        [mesh]            # either `path = "..."` or channel parameters
        h = 0.5
        sides = 8

        [flow]
        nu = 0.01
        gamma = 0.1
        inflow = 1.0      # amplitude of the parabolic inflow profile
        control = 1.0     # amplitude of both control bumps

        [observation]
        patches = [[1.5, 0.3, 1.8, 0.45, "y"], [1.5, 0.55, 1.8, 0.7, "y"]]

        [family]
        source = "synthetic"      # or "newton"
        scales = [1e-1, 1e-2, 1e-3, 1e-4, 0.0]
        count = 6                 # newton family size (including the exact member)
        vortex_center = [1.25, 0.5]
        vortex_width = 0.2

        [tolerances]
        steady = 1e-12
        picard_switch = 1e-2
        hinf = 1e-4

        [synth]
        fraction = 0.8
        enabled = false   # scaling runs: also design and test controllers

        [run]
        workers = 1
        seed = 0
        gain_checks = 0   # random-input simulations per member (0 = off)
        save_system = false   # also write the nominal projected system
    """

    name: str = "experiment"
    output_dir: str = "out"
    mesh_path: str | None = None
    mesh: ChannelParams = field(default_factory=lambda: ChannelParams(h=0.5, sides=8))
    nu: float = 0.01
    gamma: float = 0.1
    inflow: float = 1.0
    control: float = 1.0
    patches: tuple = DEFAULT_PATCHES
    source: str = "synthetic"
    scales: tuple = (1e-1, 1e-2, 1e-3, 1e-4, 0.0)
    count: int = 6
    vortex_center: tuple = (1.25, 0.5)
    vortex_width: float = 0.2
    steady_tol: float = 1e-12
    picard_switch: float = 1e-2
    hinf_tol: float = 1e-4
    fraction: float = 0.8
    synthesize: bool = False
    workers: int = 1
    seed: int = 0
    gain_checks: int = 0
    gain_horizon: float = 20.0
    gain_dt: float = 1e-2
    gain_bandwidth: float = 10.0
    save_system: bool = False

    def __post_init__(self):
        self.check()

    def check(self) -> None:
        for key in ("nu", "gamma", "steady_tol", "picard_switch", "hinf_tol",
                    "vortex_width", "gain_horizon", "gain_dt", "gain_bandwidth"):
            if not getattr(self, key) > 0:
                raise ConfigError(f"{key} must be positive")
        if self.source not in ("synthetic", "newton"):
            raise ConfigError(f"family source must be 'synthetic' or 'newton', got {self.source!r}")
        if self.source == "synthetic":
            sc = self.scales
            if not sc:
                raise ConfigError("scales must be non-empty")
            if any(s < 0 for s in sc):
                raise ConfigError("scales must be non-negative")
            if any(b >= a for a, b in zip(sc, sc[1:])):
                raise ConfigError("scales must be strictly decreasing")
        if self.count < 1:
            raise ConfigError("count must be at least 1")
        if not 0 < self.fraction < 1:
            raise ConfigError("synth fraction must lie in (0, 1)")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.gain_checks < 0:
            raise ConfigError("gain_checks must be non-negative")
        if self.mesh_path is None:
            try:
                self.mesh.check()
            except ValueError as exc:
                raise ConfigError(f"mesh: {exc}") from None

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)


_TABLES = {
    "mesh": None,
    "flow": {"nu": "nu", "gamma": "gamma", "inflow": "inflow", "control": "control"},
    "observation": {"patches": "patches"},
    "family": {"source": "source", "scales": "scales", "count": "count",
               "vortex_center": "vortex_center", "vortex_width": "vortex_width"},
    "tolerances": {"steady": "steady_tol", "picard_switch": "picard_switch", "hinf": "hinf_tol"},
    "synth": {"fraction": "fraction", "enabled": "synthesize"},
    "run": {"workers": "workers", "seed": "seed", "gain_checks": "gain_checks",
            "gain_horizon": "gain_horizon", "gain_dt": "gain_dt",
            "gain_bandwidth": "gain_bandwidth", "save_system": "save_system"},
}


def _mesh_params(table: dict) -> tuple[str | None, ChannelParams]:
    table = dict(table)
    path = table.pop("path", None)
    known = {f.name for f in fields(ChannelParams)}
    unknown = set(table) - known
    if unknown:
        raise ConfigError(f"unknown mesh keys: {sorted(unknown)}")
    if "center" in table:
        table["center"] = tuple(table["center"])
    defaults = {"h": 0.5, "sides": 8}
    defaults.update(table)
    return path, ChannelParams(**defaults)


def config_from_dict(data: dict, base_dir: Path | None = None) -> ExperimentConfig:
    data = dict(data)
    kw = {}
    for key in ("name", "output_dir"):
        if key in data:
            kw[key] = str(data.pop(key))
    for table, mapping in _TABLES.items():
        sub = data.pop(table, None)
        if sub is None:
            continue
        if not isinstance(sub, dict):
            raise ConfigError(f"[{table}] must be a table")
        if mapping is None:
            path, params = _mesh_params(sub)
            kw["mesh"] = params
            if path is not None:
                p = Path(path)
                kw["mesh_path"] = str(p if p.is_absolute() or base_dir is None else base_dir / p)
            continue
        for key, val in sub.items():
            if key not in mapping:
                raise ConfigError(f"unknown key {key!r} in [{table}]")
            kw[mapping[key]] = val
    if data:
        raise ConfigError(f"unknown top-level keys: {sorted(data)}")
    if "patches" in kw:
        kw["patches"] = tuple(tuple(p) for p in kw["patches"])
    for key in ("scales", "vortex_center"):
        if key in kw:
            kw[key] = tuple(float(x) for x in kw[key])
    if "output_dir" in kw and base_dir is not None and not Path(kw["output_dir"]).is_absolute():
        kw["output_dir"] = str(base_dir / kw["output_dir"])
    try:
        return ExperimentConfig(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    """Parse a TOML file; relative paths inside it resolve against its directory."""
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(data, base_dir=path.parent)
