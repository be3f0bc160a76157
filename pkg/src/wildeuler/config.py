"""Run configuration: a TOML file with nested sections, validated at load.

Every run is a pure function of (resolved config, seeds); the resolved
configuration with all defaults applied is hashed and written into the
manifest so artifacts are self-describing and reproducible.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .convex import GeneratorParams
from .domain import Box, DomainSpec, GasData, required_lambda, sample_gas_data
from .verify import ToleranceModel, VerifierOptions

__all__ = ["RunConfig", "ConfigError", "load_config", "config_hash"]


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


_DEFAULTS = {
    "domain": {"lengths": [1.0, 1.0], "boundary": "periodic", "splits": [1, 1]},
    "gas": {"gamma": 2.0, "rho0": [1.0], "theta0": [1.0], "energy_target": 2.0},
    "grids": {"horizon": 1.0, "steps": 2048, "cells": [64, 64],
              "field_horizon": 4.0, "field_slices": 256},
    "generator": {"mode": "fixture", "seed": 0, "stripes": 2, "stages": 4,
                  "kill_fraction": 0.55, "ratio_bound": 0.8, "base_modes": 2,
                  "overshoot_factor": 2.5},
    "branch": {"time": 0.5, "seeds": [3, 4], "common_stages": 2,
               "branch_stages": 2},
    "ensemble": {"seeds": [42]},
    "verifier": {"checkpoints": 8, "scalar_modes": 2, "vector_modes": 2,
                 "block": 256},
    "tolerance": {"a_dt": 0.8, "b_dx": 0.4, "c_modes": 0.6, "d_defect": 3.0},
}


def _merge(defaults: dict, override: dict, path: str = "") -> dict:
    out = {}
    for key, val in defaults.items():
        if key in override and isinstance(val, dict):
            out[key] = _merge(val, override[key], f"{path}{key}.")
        else:
            out[key] = override.get(key, val)
    for key in override:
        if key not in defaults:
            raise ConfigError(f"unknown configuration key {path}{key}")
    return out


@dataclass(frozen=True)
class RunConfig:
    """Validated, fully resolved run description."""

    raw: dict
    domain: DomainSpec
    data: GasData
    lambda0: float
    energy_target: float | None
    horizon: float
    steps: int
    cells: tuple
    field_horizon: float
    field_slices: int
    generator_mode: str
    generator_seed: int
    stripes: int
    stages: int
    generator_params: GeneratorParams
    branch_time: float
    branch_seeds: tuple
    common_stages: int
    branch_stages: int
    ensemble_seeds: tuple
    verifier: VerifierOptions
    tolerance: ToleranceModel

    @property
    def hash(self) -> str:
        return config_hash(self.raw)

    @property
    def generation_hash(self) -> str:
        """Hash over the sections that determine generated artifacts.

        Verification-side settings (noise grid, ensemble seeds, batteries,
        tolerances) stay out so artifacts remain valid under resolution or
        seed overrides at verify time."""
        grids = self.raw["grids"]
        relevant = {
            "domain": self.raw["domain"],
            "gas": self.raw["gas"],
            "generator": self.raw["generator"],
            "field": {"cells": grids["cells"],
                      "field_horizon": grids["field_horizon"],
                      "field_slices": grids["field_slices"]},
        }
        return config_hash(relevant)

    def fixture_speed(self, i: int) -> float:
        """Stripe speed realizing the prescribed kinetic energy density."""
        gap = self.lambda0 - self.data.pressure0(i)
        return float(np.sqrt(2.0 * self.data.rho0[i] * gap))


def config_hash(resolved: dict) -> str:
    blob = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def load_config(source=None, overrides: dict = None) -> RunConfig:
    """Load and validate a configuration.

    ``source`` is a TOML path, a TOML string, or None (pure defaults);
    ``overrides`` merges programmatic adjustments (seed or resolution
    overrides from the command line) on top.
    """
    user = {}
    if source is not None:
        text = Path(source).read_text() if Path(str(source)).is_file() else str(source)
        try:
            user = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"TOML parse failure: {exc}") from exc
    resolved = _merge(_DEFAULTS, user)
    if overrides:
        resolved = _merge(resolved, overrides)
    return _build(resolved)


def _build(cfg: dict) -> RunConfig:
    dom = cfg["domain"]
    if len(dom["lengths"]) != 2:
        raise ConfigError("only two-dimensional boxes are supported")
    box = Box((0.0, 0.0), tuple(float(x) for x in dom["lengths"]))
    nx_s, ny_s = (int(s) for s in dom["splits"])
    if nx_s < 1 or ny_s < 1:
        raise ConfigError("subdomain splits must be positive")
    xs = np.linspace(0.0, box.hi[0], nx_s + 1)
    ys = np.linspace(0.0, box.hi[1], ny_s + 1)
    subs = tuple(Box((xs[i], ys[j]), (xs[i + 1], ys[j + 1]))
                 for i in range(nx_s) for j in range(ny_s))
    try:
        domain = DomainSpec(box, dom["boundary"], subs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    gas = cfg["gas"]
    gamma = float(gas["gamma"])
    if gamma <= 1.0:
        raise ConfigError(f"gamma must exceed 1, got {gamma}")
    sampled = "rho_bounds" in gas or "theta_bounds" in gas
    if sampled:
        for key in ("rho_bounds", "theta_bounds", "data_seed"):
            if key not in gas:
                raise ConfigError(f"sampled gas data needs gas.{key}")
        bounds = (tuple(map(float, gas["rho_bounds"])),
                  tuple(map(float, gas["theta_bounds"])))
        probe = sample_gas_data(domain, bounds, gamma,
                                lambda0=1e300, data_seed=int(gas["data_seed"]))
        rho0, theta0 = probe.rho0, probe.theta0
    else:
        rho0 = tuple(float(x) for x in gas["rho0"])
        theta0 = tuple(float(x) for x in gas["theta0"])
        bounds = ((min(rho0), max(rho0)), (min(theta0), max(theta0)))
    if len(rho0) != domain.n_subdomains or len(theta0) != domain.n_subdomains:
        raise ConfigError(
            f"gas data carries {len(rho0)} values for {domain.n_subdomains} subdomains"
        )

    energy_target = gas.get("energy_target")
    if "lambda0" in gas:
        lambda0 = float(gas["lambda0"])
        energy_target = None
    elif energy_target is not None:
        lambda0 = required_lambda(domain, rho0, theta0, gamma, float(energy_target))
    else:
        raise ConfigError("gas section needs either lambda0 or energy_target")
    try:
        data = GasData(rho0, theta0, gamma, lambda0, bounds=bounds)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    grids = cfg["grids"]
    horizon = float(grids["horizon"])
    steps = int(grids["steps"])
    cells = tuple(int(c) for c in grids["cells"])
    if horizon <= 0 or steps < 8:
        raise ConfigError("verification grid needs horizon > 0 and steps >= 8")
    if any(c < 8 for c in cells):
        raise ConfigError("at least 8 cells per axis required")

    gen = cfg["generator"]
    if gen["mode"] not in ("fixture", "wild"):
        raise ConfigError(f"unknown generator mode {gen['mode']!r}")
    if gen["mode"] == "fixture" and domain.boundary != "periodic":
        raise ConfigError("the stripe fixture requires a periodic box")
    params = GeneratorParams(
        kill_fraction=float(gen["kill_fraction"]),
        ratio_bound=float(gen["ratio_bound"]),
        overshoot_factor=float(gen["overshoot_factor"]),
        base_modes=int(gen["base_modes"]),
    )
    if not 0 < params.ratio_bound <= 0.8:
        raise ConfigError("ratio_bound must lie in (0, 0.8]")

    branch = cfg["branch"]
    branch_seeds = tuple(int(s) for s in branch["seeds"])
    ver = cfg["verifier"]
    tol = cfg["tolerance"]
    return RunConfig(
        raw=cfg,
        domain=domain,
        data=data,
        lambda0=lambda0,
        energy_target=None if energy_target is None else float(energy_target),
        horizon=horizon,
        steps=steps,
        cells=cells,
        field_horizon=float(grids["field_horizon"]),
        field_slices=int(grids["field_slices"]),
        generator_mode=gen["mode"],
        generator_seed=int(gen["seed"]),
        stripes=int(gen["stripes"]),
        stages=int(gen["stages"]),
        generator_params=params,
        branch_time=float(branch["time"]),
        branch_seeds=branch_seeds,
        common_stages=int(branch["common_stages"]),
        branch_stages=int(branch["branch_stages"]),
        ensemble_seeds=tuple(int(s) for s in cfg["ensemble"]["seeds"]),
        verifier=VerifierOptions(
            checkpoints=int(ver["checkpoints"]),
            block=int(ver["block"]),
            scalar_modes=int(ver["scalar_modes"]),
            vector_modes=int(ver["vector_modes"]),
        ),
        tolerance=ToleranceModel(
            a_dt=float(tol["a_dt"]),
            b_dx=float(tol["b_dx"]),
            c_modes=float(tol["c_modes"]),
            d_defect=float(tol["d_defect"]),
        ),
    )
