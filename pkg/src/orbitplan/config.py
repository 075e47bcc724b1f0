"""Run configuration: strict YAML schema, file resolution, context assembly.

Unknown keys are errors, not warnings, so a typo cannot silently fall back
to a default. Paths resolve relative to the config file; the prefix
"builtin:" points at the data files shipped with the package.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from datetime import datetime
from importlib import resources
from pathlib import Path

import yaml

from .astro import Body, DensityModel, SpacecraftParams
from .domain.grids import (AltitudeGrid, DomainError, DomainState, FuelGrid,
                           ManeuverActionSet, RewardParams)
from .domain.build import FUEL_COST_MODES, MissionContext
from .domain.scenario import ThrustModel, scenario_from_files
from .mdp.model import TimeGrid
from .resonance import resonance_altitudes
from .verify import SafetySpec


class ConfigError(ValueError):
    pass


_NUM = (int, float)

SCHEMA = {
    "version": int,
    "mission": {
        "epoch": str,
        "horizon_steps": int,
        "step_seconds": _NUM,
        "initial_altitude_km": _NUM,
        "initial_fuel": _NUM,
        "initial_cooldown": int,
    },
    "grids": {
        "altitude_min_km": _NUM,
        "altitude_max_km": _NUM,
        "altitude_bins": int,
        "fuel_min": _NUM,
        "fuel_max": _NUM,
        "fuel_bins": int,
        "cooldown_steps": int,
    },
    "actions": {"n_raises": int, "gamma_hat": _NUM},
    "spacecraft": {
        "mass_kg": _NUM,
        "drag_area_m2": _NUM,
        "drag_coeff": _NUM,
        "isp_seconds": _NUM,
        "g0": _NUM,
    },
    "body": {"mu": _NUM, "radius_m": _NUM, "rotation_rate": _NUM, "j2": _NUM},
    "environment": {"density_table": str, "inclination_deg": _NUM},
    "flux": {
        "low": str,
        "medium": str,
        "high": str,
        "priors": list,
        "quadrature": list,
    },
    "thrust": {"factors": list, "weights": list},
    "reward": {
        "alpha": _NUM,
        "beta": _NUM,
        "max_nodal_days": int,
        "crossed_interval": bool,
    },
    "safety": {"floor_km": _NUM, "spacing_steps": int, "delta": _NUM},
    "fuel_cost_mode": str,
}


def _check(raw, schema, path=""):
    if not isinstance(raw, dict):
        raise ConfigError(f"{path or 'top level'}: expected a mapping")
    for key in raw:
        if key not in schema:
            raise ConfigError(f"unknown config key {path}{key!r}")
    for key, spec in schema.items():
        if key not in raw:
            raise ConfigError(f"missing config key {path}{key!r}")
        val = raw[key]
        if isinstance(spec, dict):
            _check(val, spec, f"{path}{key}.")
        elif spec is _NUM:
            if isinstance(val, bool) or not isinstance(val, _NUM):
                raise ConfigError(f"{path}{key}: expected a number, got {val!r}")
        elif not isinstance(val, spec) or (spec is int and isinstance(val, bool)):
            raise ConfigError(
                f"{path}{key}: expected {getattr(spec, '__name__', spec)}, got {val!r}")


def resolve_path(ref: str, base: Path) -> Path:
    if ref.startswith("builtin:"):
        return Path(resources.files("orbitplan").joinpath("data", ref[8:]))
    p = Path(ref)
    return p if p.is_absolute() else base / p


@dataclass
class RunConfig:
    raw: dict
    base_dir: Path
    config_hash: str

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            with open(path) as fh:
                raw = yaml.safe_load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
        _check(raw, SCHEMA)
        if raw["version"] != 1:
            raise ConfigError(f"unsupported config version {raw['version']}")
        if raw["fuel_cost_mode"] not in FUEL_COST_MODES:
            raise ConfigError(f"fuel_cost_mode must be one of {FUEL_COST_MODES}")
        base = path.parent
        digest = hashlib.sha256(json.dumps(raw, sort_keys=True).encode())
        for ref in cls._file_refs(raw):
            digest.update(resolve_path(ref, base).read_bytes())
        return cls(raw=raw, base_dir=base, config_hash=digest.hexdigest())

    @staticmethod
    def _file_refs(raw):
        return [raw["environment"]["density_table"],
                raw["flux"]["low"], raw["flux"]["medium"], raw["flux"]["high"]]

    def path(self, ref: str) -> Path:
        return resolve_path(ref, self.base_dir)

    # -- assembly ---------------------------------------------------------

    def time_grid(self) -> TimeGrid:
        m = self.raw["mission"]
        return TimeGrid(m["horizon_steps"], float(m["step_seconds"]),
                        datetime.fromisoformat(m["epoch"]))

    def build_context(self, mode: str = "stoch") -> MissionContext:
        """Assemble the mission context; mode 'det' collapses all uncertainty
        to its central value (median flux of the medium class, exact thrust)."""
        if mode not in ("det", "stoch"):
            raise ConfigError(f"mode must be 'det' or 'stoch', got {mode!r}")
        raw = self.raw
        g = raw["grids"]
        alt_grid = AltitudeGrid(g["altitude_min_km"], g["altitude_max_km"],
                                g["altitude_bins"])
        fuel_grid = FuelGrid(g["fuel_min"], g["fuel_max"], g["fuel_bins"])
        action_set = ManeuverActionSet(raw["actions"]["n_raises"],
                                       raw["actions"]["gamma_hat"])
        sc = SpacecraftParams(
            mass=raw["spacecraft"]["mass_kg"],
            drag_area=raw["spacecraft"]["drag_area_m2"],
            drag_coeff=raw["spacecraft"]["drag_coeff"],
            isp_seconds=raw["spacecraft"]["isp_seconds"],
            g0=raw["spacecraft"]["g0"])
        body = Body(mu=raw["body"]["mu"], radius=raw["body"]["radius_m"],
                    rotation_rate=raw["body"]["rotation_rate"], j2=raw["body"]["j2"])
        density = DensityModel.from_file(self.path(raw["environment"]["density_table"]))
        time = self.time_grid()
        scenario = scenario_from_files(
            {name: self.path(raw["flux"][name]) for name in ("low", "medium", "high")},
            priors=raw["flux"]["priors"], time_grid=time,
            quadrature=raw["flux"]["quadrature"])
        thrust = ThrustModel(factors=raw["thrust"]["factors"],
                             weights=raw["thrust"]["weights"])
        if mode == "det":
            scenario = scenario.collapsed("medium")
            thrust = ThrustModel.exact()
        rp = RewardParams(alpha=raw["reward"]["alpha"], beta=raw["reward"]["beta"],
                          max_nodal_days=raw["reward"]["max_nodal_days"],
                          crossed_interval=raw["reward"]["crossed_interval"])
        res_table = resonance_altitudes(
            (g["altitude_min_km"], g["altitude_max_km"]),
            rp.max_nodal_days,
            math.radians(raw["environment"]["inclination_deg"]),
            body)
        m = raw["mission"]
        initial = DomainState(
            alt_bin=int(alt_grid.bin(m["initial_altitude_km"])),
            fuel_bin=int(fuel_grid.bin(m["initial_fuel"])),
            cooldown=m["initial_cooldown"])
        if initial.alt_bin < 0:
            raise ConfigError("initial altitude below the grid floor")
        if not (0 <= initial.cooldown <= g["cooldown_steps"]):
            raise ConfigError("initial cooldown outside the cooldown range")
        return MissionContext(
            alt_grid=alt_grid, fuel_grid=fuel_grid,
            cooldown_steps=g["cooldown_steps"], action_set=action_set,
            time=time, scenario=scenario, thrust=thrust, spacecraft=sc,
            body=body, density=density, reward_params=rp,
            resonance_table=res_table, fuel_cost_mode=raw["fuel_cost_mode"],
            initial_state=initial)

    def safety_spec(self) -> SafetySpec:
        s = self.raw["safety"]
        return SafetySpec(altitude_floor_km=s["floor_km"],
                          spacing_steps=s["spacing_steps"], delta=s["delta"])
