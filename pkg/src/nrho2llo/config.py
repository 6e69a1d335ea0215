"""Run configuration: TOML ingestion with strict unknown-key rejection,
default provenance for --explain, and builders for the problem objects.

Configs are SI throughout; canonical units stay internal to the solvers.
Paths are resolved relative to the config file location.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .attitude import AttitudeGains
from .constants import PropulsionParams
from .ephemeris import (
    EphemerisSet,
    generate_cr3bp_nrho,
    load_table,
    nrho_from_table,
)
from .guidance import GuidanceGains
from .indirect import PsoSettings, TransferProblem
from .simulation import FailureWindow, SimConfig
from .wheels import WheelArray

__all__ = ["RunConfig", "ConfigError", "parse_config"]


class ConfigError(ValueError):
    pass


def _positive(name):
    def check(v):
        if v <= 0:
            raise ConfigError(f"{name} must be positive, got {v}")
    return check


def _nonneg(name):
    def check(v):
        if v < 0:
            raise ConfigError(f"{name} must be non-negative, got {v}")
    return check


# section -> key -> (python type(s), default, validator | None)
_SCHEMA = {
    "scenario": {
        "pd_km": (float, 1837.4, _positive("scenario.pd_km")),
        "ed": (float, 0.0, _nonneg("scenario.ed")),
        "id_deg": (float, 90.0, None),
        "ut_max_km_s2": (float, 4.903e-7, _positive("scenario.ut_max_km_s2")),
        "c_km_s": (float, 30.0, _positive("scenario.c_km_s")),
    },
    "ephemeris": {
        "earth": (str, "data/earth_mci.csv", None),
        "sun": (str, "data/sun_mci.csv", None),
        "gateway": (str, "cr3bp", None),
        "perilune_target_km": (float, 3366.0, _positive("ephemeris.perilune_target_km")),
    },
    "optimizer": {
        "particles": (int, 100, _positive("optimizer.particles")),
        "max_iter": (int, 250, _positive("optimizer.max_iter")),
        "stall_limit": (int, 60, _positive("optimizer.stall_limit")),
        "fitness_threshold": (float, 3.2e-2, _positive("optimizer.fitness_threshold")),
        "seed": (int, 0, None),
        "workers": (int, 2, _positive("optimizer.workers")),
        "dt_bounds_days": (list, [25.0, 45.0], None),
        "rtol_search": (float, 1e-7, _positive("optimizer.rtol_search")),
        "rtol_refine": (float, 1e-10, _positive("optimizer.rtol_refine")),
        "simplex_max_iter": (int, 3000, _positive("optimizer.simplex_max_iter")),
    },
    "sim": {
        "guidance_interval_s": (float, 600.0, _positive("sim.guidance_interval_s")),
        "endgame_interval_s": (float, 10.0, _positive("sim.endgame_interval_s")),
        "attitude_substep_s": (float, 1.0, _positive("sim.attitude_substep_s")),
        "orbit_substep_s": (float, 10.0, _positive("sim.orbit_substep_s")),
        "max_flight_days": (float, 60.0, _positive("sim.max_flight_days")),
        "t0_s": (float, float("nan"), None),   # NaN: gateway reference epoch
        "seed": (int, 0, None),
        "k1": (float, 0.0338, _positive("sim.k1")),
        "k2": (float, 813.373, _positive("sim.k2")),
        "k3": (float, 1.286, _positive("sim.k3")),
        "attitude_a_s2": (float, 5000.0, _positive("sim.attitude_a_s2")),
        "attitude_b_s": (float, 100.0, _positive("sim.attitude_b_s")),
        "inertia_kg_m2": (list, [1.3e5, 2.0e5, 2.0e5], None),
        "wheel_inertia_kg_m2": (float, 1.0, _positive("sim.wheel_inertia_kg_m2")),
        "wheel_rate_limit_deg_s": (float, 9000.0, _positive("sim.wheel_rate_limit_deg_s")),
        "wheel_accel_limit_deg_s2": (float, 350.0, _positive("sim.wheel_accel_limit_deg_s2")),
        "record_stride_s": (float, 60.0, _positive("sim.record_stride_s")),
        "record_fine_window_s": (float, 7200.0, _nonneg("sim.record_fine_window_s")),
    },
    "sim.failure": {
        "onset_days": (float, float("nan"), None),
        "duration_days": (float, float("nan"), None),
    },
    "output": {
        "dir": (str, "out", None),
    },
}


@dataclass
class RunConfig:
    """Validated configuration with per-key provenance."""

    values: dict                       # section -> key -> value
    provenance: dict                   # section -> key -> "config" | "default"
    base_dir: Path
    path: Path | None = None
    _eph_cache: EphemerisSet | None = field(default=None, repr=False)

    def __getitem__(self, section_key: str):
        section, key = section_key.split(".", 1)
        if "." in key:  # nested section like sim.failure
            return self.values[section_key.rsplit(".", 1)[0]][section_key.rsplit(".", 1)[1]]
        return self.values[section][key]

    @property
    def config_hash(self) -> str:
        payload = json.dumps(self.values, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()

    def explain(self) -> str:
        lines = []
        for section in sorted(self.values):
            for key in sorted(self.values[section]):
                src = self.provenance[section][key]
                lines.append(f"{section}.{key} = {self.values[section][key]!r}  [{src}]")
        return "\n".join(lines)

    def resolve_path(self, p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else (self.base_dir / q)

    # ---- builders -------------------------------------------------------

    def propulsion(self) -> PropulsionParams:
        s = self.values["scenario"]
        return PropulsionParams(ut_max_km_s2=s["ut_max_km_s2"], c_km_s=s["c_km_s"])

    def ephemeris_set(self) -> EphemerisSet:
        if self._eph_cache is None:
            e = self.values["ephemeris"]
            earth = load_table(self.resolve_path(e["earth"]), body="earth")
            sun = load_table(self.resolve_path(e["sun"]), body="sun")
            if e["gateway"] == "cr3bp":
                gw = generate_cr3bp_nrho(perilune_target_km=e["perilune_target_km"])
            else:
                gw = nrho_from_table(load_table(self.resolve_path(e["gateway"]),
                                                body="gateway"))
            self._eph_cache = EphemerisSet(earth=earth, sun=sun, gateway=gw)
        return self._eph_cache

    def pso_settings(self, seed: int | None = None) -> PsoSettings:
        o = self.values["optimizer"]
        return PsoSettings(
            n_particles=o["particles"], max_iter=o["max_iter"],
            stall_limit=o["stall_limit"], fitness_threshold=o["fitness_threshold"],
            seed=o["seed"] if seed is None else seed, n_workers=o["workers"])

    def transfer_problem(self, eph: EphemerisSet | None = None) -> TransferProblem:
        o = self.values["optimizer"]
        s = self.values["scenario"]
        return TransferProblem.from_si(
            eph or self.ephemeris_set(),
            pd_km=s["pd_km"], ed=s["ed"], id_deg=s["id_deg"],
            propulsion=self.propulsion(),
            dt_bounds_days=tuple(o["dt_bounds_days"]),
            rtol_search=o["rtol_search"], rtol_refine=o["rtol_refine"])

    def sim_config(self, perfect_attitude: bool = False) -> SimConfig:
        s = self.values["sim"]
        sc = self.values["scenario"]
        fail = self.values.get("sim.failure", {})
        failure = None
        if np.isfinite(fail.get("onset_days", float("nan"))):
            if not np.isfinite(fail.get("duration_days", float("nan"))):
                raise ConfigError("sim.failure.duration_days required with onset_days")
            failure = FailureWindow(fail["onset_days"], fail["duration_days"])
        return SimConfig(
            pd_km=sc["pd_km"], ed=sc["ed"], id_deg=sc["id_deg"],
            propulsion=self.propulsion(),
            guidance_gains=GuidanceGains(s["k1"], s["k2"], s["k3"]),
            attitude_gains=AttitudeGains(s["attitude_a_s2"], s["attitude_b_s"]),
            inertia=np.diag(np.asarray(s["inertia_kg_m2"], dtype=float)),
            wheels=WheelArray(
                inertia=s["wheel_inertia_kg_m2"],
                rate_limit=np.deg2rad(s["wheel_rate_limit_deg_s"]),
                accel_limit=np.deg2rad(s["wheel_accel_limit_deg_s2"])),
            guidance_interval_s=s["guidance_interval_s"],
            endgame_interval_s=s["endgame_interval_s"],
            attitude_substep_s=s["attitude_substep_s"],
            orbit_substep_s=s["orbit_substep_s"],
            t0_s=None if not np.isfinite(s["t0_s"]) else s["t0_s"],
            max_flight_days=s["max_flight_days"],
            failure=failure,
            perfect_attitude=perfect_attitude,
            record_stride_s=s["record_stride_s"],
            record_fine_window_s=s["record_fine_window_s"])


def _coerce(section: str, key: str, value, want_type):
    if want_type is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if want_type is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{section}.{key}: expected integer, got {value!r}")
        return value
    if not isinstance(value, want_type):
        raise ConfigError(
            f"{section}.{key}: expected {want_type.__name__}, got {type(value).__name__}")
    return value


def parse_config(path) -> RunConfig:
    """Load and validate a TOML run configuration.

    Unknown sections or keys are rejected outright; missing keys take
    documented defaults whose provenance shows up in --explain output.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None

    values: dict = {}
    provenance: dict = {}

    def handle_section(sec_name: str, payload: dict):
        schema = _SCHEMA[sec_name]
        values.setdefault(sec_name, {})
        provenance.setdefault(sec_name, {})
        for key, val in payload.items():
            if isinstance(val, dict):
                sub = f"{sec_name}.{key}"
                if sub not in _SCHEMA:
                    raise ConfigError(f"unknown section [{sub}]")
                handle_section(sub, val)
                continue
            if key not in schema:
                raise ConfigError(f"unknown key {sec_name}.{key}")
            want_type, _, validator = schema[key]
            val = _coerce(sec_name, key, val, want_type)
            if validator is not None:
                validator(val)
            values[sec_name][key] = val
            provenance[sec_name][key] = "config"

    for sec_name, payload in raw.items():
        if sec_name not in _SCHEMA:
            raise ConfigError(f"unknown section [{sec_name}]")
        if not isinstance(payload, dict):
            raise ConfigError(f"top-level key {sec_name} must be a section")
        handle_section(sec_name, payload)

    for sec_name, schema in _SCHEMA.items():
        values.setdefault(sec_name, {})
        provenance.setdefault(sec_name, {})
        for key, (want_type, default, _) in schema.items():
            if key not in values[sec_name]:
                values[sec_name][key] = default
                provenance[sec_name][key] = "default"

    return RunConfig(values=values, provenance=provenance,
                     base_dir=path.parent.resolve(), path=path)
