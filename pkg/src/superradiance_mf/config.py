"""Run configuration: a flat dataclass loaded from JSON with CLI overrides."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .model import ModelParams

MODES = ("evolve", "steady", "stability", "wc", "phase-diagram", "thermal-map", "spectrum",
         "path-A", "path-B")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SweepConfig:
    """Every field is optional; defaults reproduce the figure-fidelity runs.

    Grid axes are ``<axis>_min, <axis>_max, <axis>_count``: ``w`` and
    ``lam`` for the phase diagram and paths, ``w_over_lambda`` and ``temp``
    (scaled temperature) for the thermal map.
    """

    mode: str = "evolve"
    # model
    lam: float = 9.0
    w: float = 2.25
    delta_over_kappa: float = 0.5
    n_max: int = 15
    # numerics
    dt: float = 2e-3
    t_end: float = 4e4
    sample_every: float = 0.05
    snapshot_every: float = 5.0
    tol: float = 1e-9
    max_iter: int = 2000
    mixing: float = 0.5
    seed_epsilon: float = 1e-6
    X_seed: float = 0.1
    # grids
    w_min: float = 0.25
    w_max: float = 8.0
    w_count: int = 32
    lam_min: float = 1.0
    lam_max: float = 16.0
    lam_count: int = 31
    w_over_lambda_min: float = 0.0
    w_over_lambda_max: float = 0.6
    w_over_lambda_count: int = 40
    temp_min: float = 0.005
    temp_max: float = 0.3
    temp_count: int = 40
    # thermal map detuning; None follows delta_over_kappa
    thermal_delta_over_kappa: float | None = None
    # spectrum
    omega_max: float = 6.0
    n_omega: int = 0  # 0: spacing pi / t_end
    spectrum_t_start: float = 0.0
    # critical pump bracket
    wc_lo: float = 1.0
    wc_hi: float = 2.5
    wc_tol: float = 1e-2
    # output
    out: str = "results"
    workers: int = 1
    write_trajectories: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; choose from {', '.join(MODES)}")
        for axis in ("w", "lam", "w_over_lambda", "temp"):
            count = getattr(self, f"{axis}_count")
            if int(count) != count or count < 1:
                raise ConfigError(f"{axis}_count must be an integer >= 1, got {count}")
            if getattr(self, f"{axis}_max") < getattr(self, f"{axis}_min"):
                raise ConfigError(f"{axis}_max < {axis}_min")
        for name in ("lam", "w", "dt", "t_end", "sample_every", "snapshot_every", "tol", "mixing",
                     "w_min", "w_max", "lam_min", "lam_max", "w_over_lambda_min", "w_over_lambda_max",
                     "temp_min", "temp_max", "omega_max", "wc_lo", "wc_hi", "wc_tol"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative, got {getattr(self, name)}")
        if self.lam_min <= 0 and self.mode in ("phase-diagram", "path-A"):
            raise ConfigError("lam_min must be positive")
        if self.temp_min <= 0 and self.mode == "thermal-map":
            raise ConfigError("temp_min must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        try:
            self.model_params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    # ---- derived -------------------------------------------------------
    def model_params(self, **changes) -> ModelParams:
        base = dict(lam=self.lam, w=self.w, delta_over_kappa=self.delta_over_kappa, n_max=self.n_max)
        base.update(changes)
        return ModelParams(**base)

    def grid(self, axis: str) -> np.ndarray:
        return np.linspace(getattr(self, f"{axis}_min"), getattr(self, f"{axis}_max"),
                           int(getattr(self, f"{axis}_count")))

    def replace(self, **changes) -> "SweepConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    def header_lines(self) -> list[str]:
        return [f"superradiance_mf {__version__}", "config " + json.dumps(self.to_dict(), sort_keys=True)]

    def effective_workers(self) -> int:
        env = os.environ.get("SRMF_WORKERS")
        if env:
            try:
                n = int(env)
            except ValueError as exc:
                raise ConfigError(f"SRMF_WORKERS must be an integer, got {env!r}") from exc
            if n < 1:
                raise ConfigError("SRMF_WORKERS must be >= 1")
            return n
        return self.workers

    def output_dir(self) -> Path:
        """Create the output directory and check it is writable."""
        path = Path(self.out)
        try:
            path.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {path}: {exc}") from exc
        if not os.access(path, os.W_OK):
            raise ConfigError(f"output directory {path} is not writable")
        return path


PRESETS: dict[str, dict] = {
    # quick qualitative runs for CI
    "smoke": dict(n_max=6, t_end=500.0, dt=5e-3, snapshot_every=5.0, w_count=6, lam_count=6,
                  w_over_lambda_count=12, temp_count=12, lam_min=3.0, lam_max=10.0, w_min=0.5, w_max=3.0),
    # figure-fidelity defaults
    "figure": dict(n_max=15, t_end=4e4, dt=2e-3),
}


def field_names() -> set[str]:
    return {f.name for f in fields(SweepConfig)}


def load_config(path: str | Path | None = None, preset: str | None = None, **overrides) -> SweepConfig:
    """Resolve defaults < preset < JSON file < explicit overrides."""
    values: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
        values.update(PRESETS[preset])
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a flat JSON object")
        values.update(data)
    values.update({k: v for k, v in overrides.items() if v is not None})
    unknown = set(values) - field_names()
    if unknown:
        raise ConfigError(f"unknown config field(s): {', '.join(sorted(unknown))}")
    try:
        return SweepConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
